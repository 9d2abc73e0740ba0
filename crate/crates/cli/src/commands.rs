use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

use mcse_core::agents::{random_dynamic_schedule, AgentSpec, DecisionModel, DynamicKind, SkillSchedule};
use mcse_core::baseball::{
    confidence_ellipse, estimate_pitchers, group_by_pitcher, ingest_pitches, pitch_estimator, ColumnMap, IngestOptions,
    PitchModel, StrikeZone, DEFAULT_MIN_PITCHES,
};
use mcse_core::cov::Cov2;
use mcse_core::darts::{read_states_jsonl, write_states_jsonl, BoardConfig, DartboardState};
use mcse_core::experiment::{
    mean_jd_curve, parameter_sweep, read_records, replay, run_experiment, simulate_agent, summarize, write_experiment,
    write_sweep, AgentTemplate, Dynamics, EstimatorSpec, ExperimentConfig, SweepPreset, SweepSpec,
};
use mcse_core::jeeds::JeedsConfig;
use mcse_core::mcse::{FilterConfig, NeffMode, ResampleStrategy};
use mcse_core::metrics::generalized_variance;
use mcse_core::noise::{ExecutionSkillParams, SkillRanges};
use mcse_core::plot::{EllipsePlot, LinePlot, Series};
use mcse_core::rng::{SeedStreams, AGENT_SKILL};
use mcse_core::trace::{read_trace, write_trace};
use mcse_core::Error;

use crate::args::*;

const FULL_SCALE_REPETITIONS: usize = 4000;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Error::Config(msg.into()).into()
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let mut out = create(dir, name)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn with_workers<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(0) => Err(usage("--workers must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            Ok(pool.install(job))
        }
    }
}

fn parse_skill(text: &str) -> Result<ExecutionSkillParams> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("skill {text:?} is not sigma_x,sigma_y,rho")))?;
    match parts[..] {
        [sx, sy, rho] => Ok(ExecutionSkillParams::new(sx, sy, rho)?),
        _ => Err(usage(format!("skill {text:?} is not sigma_x,sigma_y,rho"))),
    }
}

/// One row of the observation file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub obs_index: usize,
    pub state_id: u64,
    pub x: f64,
    pub y: f64,
}

/// Ground truth written next to simulated observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub agent: String,
    pub spec: AgentSpec,
    pub seed: u64,
    pub n_observations: usize,
    pub board: BoardConfig,
    /// Skill in force at each observation.
    pub skill: Vec<ExecutionSkillParams>,
}

pub fn simulate(args: SimulateArgs, out_dir: &Path) -> Result<()> {
    let a = args.merged()?;
    let n = a.n.unwrap_or(100);
    let seed = a.seed.unwrap_or(0);
    let template: AgentTemplate = a.agent.as_deref().unwrap_or("rational").parse()?;
    let board = BoardConfig {
        resolution: a.resolution.unwrap_or(5.0),
        shuffle_bull: a.shuffle_bull.unwrap_or(false),
        ..BoardConfig::default()
    };
    let streams = SeedStreams::new(seed);
    let mut skill_rng = streams.stream(AGENT_SKILL);
    let initial = a.sigma.as_deref().map(parse_skill).transpose()?;
    let final_skill = a.final_sigma.as_deref().map(parse_skill).transpose()?;
    let independent_rho = a.independent_rho.unwrap_or(true);

    let schedule = match template.dynamics {
        Dynamics::Stationary => {
            if final_skill.is_some() || a.change_step.is_some() {
                return Err(usage(
                    "--final-sigma and --change-step need an abrupt- or gradual- agent",
                ));
            }
            SkillSchedule::stationary(initial.unwrap_or_else(|| SkillRanges::darts().sample_skill(&mut skill_rng)))
        }
        Dynamics::Abrupt | Dynamics::Gradual => {
            let kind = if template.dynamics == Dynamics::Abrupt {
                DynamicKind::Abrupt
            } else {
                DynamicKind::Gradual
            };
            let random = random_dynamic_schedule(kind, n, independent_rho, &mut skill_rng);
            match (initial, final_skill, random) {
                (
                    None,
                    None,
                    SkillSchedule::Abrupt {
                        initial,
                        final_skill,
                        change_step,
                    },
                ) => SkillSchedule::Abrupt {
                    initial,
                    final_skill,
                    change_step: a.change_step.unwrap_or(change_step),
                },
                (None, None, s) => s,
                (Some(i), Some(f), SkillSchedule::Abrupt { change_step, .. }) => SkillSchedule::Abrupt {
                    initial: i,
                    final_skill: f,
                    change_step: a.change_step.unwrap_or(change_step),
                },
                (Some(i), Some(f), _) => SkillSchedule::Gradual {
                    initial: i,
                    final_skill: f,
                },
                _ => return Err(usage("give both --sigma and --final-sigma, or neither")),
            }
        }
    };
    let decision = match a.lambda {
        Some(l) => DecisionModel::with_lambda(template.kind, l)?,
        None => DecisionModel::random(template.kind, &mut streams.stream("agent-decision")),
    };
    let spec = AgentSpec::new(decision, schedule);
    let steps = simulate_agent(&spec, &board, n, seed)?;

    let mut w = csv::Writer::from_writer(create(out_dir, "observations.csv")?);
    for s in &steps {
        w.serialize(ObservationRow {
            obs_index: s.obs_index,
            state_id: s.state.state_id,
            x: s.executed_action[0],
            y: s.executed_action[1],
        })?;
    }
    w.flush()?;
    let states: Vec<DartboardState> = steps.iter().map(|s| s.state.clone()).collect();
    let mut out = create(out_dir, "states.jsonl")?;
    write_states_jsonl(&mut out, &states)?;
    out.flush()?;
    write_json(
        out_dir,
        "truth.json",
        &TruthFile {
            agent: spec.label(),
            spec: spec.clone(),
            seed,
            n_observations: n,
            board,
            skill: steps.iter().map(|s| s.truth).collect(),
        },
    )?;
    log::info!("simulated {n} observations of a {} agent", spec.label());
    Ok(())
}

/// Final estimate written by `estimate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateFile {
    pub label: String,
    pub n_observations: usize,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
    pub lambda: f64,
    pub gv: f64,
    pub final_jd: Option<f64>,
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

pub fn estimator_from(a: &EstimateArgs) -> Result<EstimatorSpec> {
    let method = a.method.unwrap_or(Method::Mcse);
    let spec = match method {
        Method::Mcse => {
            let d = FilterConfig::default();
            let resample = match a.resample.unwrap_or(Resample::Neff) {
                Resample::Always => ResampleStrategy::Always,
                Resample::Neff => ResampleStrategy::EffThreshold {
                    tau: a.tau.unwrap_or(0.5),
                },
            };
            EstimatorSpec::mcse(FilterConfig {
                m: a.m.unwrap_or(d.m),
                r: a.r.unwrap_or(d.r),
                w_pct: a.w_pct.unwrap_or(d.w_pct),
                resample,
                neff_mode: match a.neff_mode.unwrap_or(NeffModeArg::RawSum) {
                    NeffModeArg::RawSum => NeffMode::RawSumFraction,
                    NeffModeArg::Normalized => NeffMode::NormalizedEss,
                },
                ..d
            })
        }
        Method::Jeeds => {
            let d = JeedsConfig::default();
            EstimatorSpec::jeeds(JeedsConfig {
                sigma_levels: a.sigma_levels.unwrap_or(d.sigma_levels),
                lambda_levels: a.lambda_levels.unwrap_or(d.lambda_levels),
                ..d
            })
        }
    };
    spec.validate()?;
    Ok(spec)
}

pub fn estimate(args: EstimateArgs, out_dir: &Path) -> Result<()> {
    let a = args.merged()?;
    let obs_path = a
        .observations
        .clone()
        .ok_or_else(|| usage("--observations is required"))?;
    let spec = estimator_from(&a)?;
    let board = BoardConfig {
        resolution: a.resolution.unwrap_or(5.0),
        ..BoardConfig::default()
    };

    let mut reader = csv::Reader::from_reader(open(&obs_path)?);
    let rows: Vec<ObservationRow> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("reading {}", obs_path.display()))?;
    if rows.is_empty() {
        return Err(Error::InvalidObservation(format!("{} has no observations", obs_path.display())).into());
    }
    let states_path = a.states.clone().unwrap_or_else(|| sibling(&obs_path, "states.jsonl"));
    let states: BTreeMap<u64, DartboardState> = read_states_jsonl(open(&states_path)?, board.geometry)?
        .into_iter()
        .map(|s| (s.state_id, s))
        .collect();
    let steps = rows
        .iter()
        .map(|r| {
            states
                .get(&r.state_id)
                .map(|s| (s.clone(), [r.x, r.y]))
                .ok_or_else(|| anyhow!("state {} missing from {}", r.state_id, states_path.display()))
        })
        .collect::<Result<Vec<_>>>()?;

    let truth_path = match (a.no_truth.unwrap_or(false), &a.truth) {
        (true, _) => None,
        (false, Some(p)) => Some(p.clone()),
        (false, None) => Some(sibling(&obs_path, "truth.json")).filter(|p| p.exists()),
    };
    let truth: Option<TruthFile> = truth_path
        .as_deref()
        .map(|p| -> Result<TruthFile> {
            serde_json::from_reader(open(p)?).with_context(|| format!("reading {}", p.display()))
        })
        .transpose()?;
    let truth_skill = truth.as_ref().map(|t| t.skill.as_slice());

    let mut estimator = spec.build(&SeedStreams::new(a.seed.unwrap_or(0)))?;
    let trace = replay(estimator.as_mut(), &board, &steps, truth_skill)?;
    let name = a.name.clone().unwrap_or_else(|| {
        match a.method.unwrap_or(Method::Mcse) {
            Method::Mcse => "mcse",
            Method::Jeeds => "jeeds",
        }
        .to_string()
    });
    let mut out = create(out_dir, &format!("{name}-trace.csv"))?;
    write_trace(&mut out, &trace)?;
    out.flush()?;
    let last = trace.last().expect("non-empty trace");
    let e = last.estimate();
    write_json(
        out_dir,
        &format!("{name}-estimate.json"),
        &EstimateFile {
            label: spec.label(),
            n_observations: trace.len(),
            sigma_x: e.sigma_x,
            sigma_y: e.sigma_y,
            rho: e.rho,
            lambda: e.lambda,
            gv: generalized_variance(&e.covariance()),
            final_jd: last.jd_if_truth_known,
        },
    )?;
    Ok(())
}

fn curves_plot(records: &[mcse_core::experiment::RunRecord], title: &str) -> Result<String> {
    let mut groups: BTreeMap<(usize, usize), (String, Vec<&mcse_core::experiment::RunRecord>)> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.estimator_id, r.agent_id))
            .or_insert_with(|| (format!("{} / {}", r.estimator, r.agent), Vec::new()))
            .1
            .push(r);
    }
    let series = groups
        .into_values()
        .map(|(label, rs)| Series {
            label,
            points: mean_jd_curve(rs)
                .iter()
                .map(|p| (p.obs_index as f64, p.mean_jd))
                .collect(),
        })
        .collect();
    Ok(LinePlot {
        title: title.into(),
        x_label: "observation".into(),
        y_label: "mean JD".into(),
        series,
    }
    .render()?)
}

pub fn experiment(args: ExperimentArgs, out_dir: &Path) -> Result<()> {
    let a = args.merged()?;
    let mut config = match &a.experiment {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(r) = a.repetitions {
        config.repetitions = r;
    }
    if a.full_scale.unwrap_or(false) {
        config.repetitions = FULL_SCALE_REPETITIONS;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(n) = a.n {
        config.n_observations = n;
    }
    config.validate()?;
    let dir = config.output_dir.clone().unwrap_or_else(|| out_dir.to_path_buf());
    let records = with_workers(a.workers, || run_experiment(&config))??;
    write_experiment(&dir, &config, &records)?;
    let mut w = csv::Writer::from_writer(create(&dir, "summary.csv")?);
    for s in summarize(&records) {
        w.serialize(s)?;
    }
    w.flush()?;
    write_text(&dir, "jd.svg", &curves_plot(&records, "Mean JD by observation")?)?;
    Ok(())
}

pub fn sweep(args: SweepArgs, out_dir: &Path) -> Result<()> {
    let a = args.merged()?;
    let mut spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<SweepSpec>(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => {
            let preset = match a.preset.unwrap_or(Preset::Round1) {
                Preset::Round1 => SweepPreset::Round1,
                Preset::Round2 => SweepPreset::Round2,
            };
            let base = FilterConfig {
                m: a.m.unwrap_or(1000),
                ..FilterConfig::default()
            };
            SweepSpec::preset(preset, &base)
        }
    };
    if let Some(r) = a.repetitions {
        spec.repetitions = r;
    }
    if let Some(n) = a.n {
        spec.n_observations = n;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(res) = a.resolution {
        spec.board.resolution = res;
    }
    for c in &spec.configs {
        c.validate()?;
    }
    let rows = with_workers(a.workers, || parameter_sweep(&spec))??;
    let mut out = create(out_dir, "sweep.csv")?;
    write_sweep(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}

pub fn baseball(args: BaseballArgs, out_dir: &Path) -> Result<()> {
    let a = args.merged()?;
    let input = a.input.clone().ok_or_else(|| usage("--input is required"))?;
    let delimiter = a.delimiter.unwrap_or(',');
    if !delimiter.is_ascii() {
        return Err(usage("--delimiter must be a single ASCII character"));
    }
    let d = ColumnMap::default();
    let min_count = a.min_count.unwrap_or(DEFAULT_MIN_PITCHES);
    let options = IngestOptions {
        columns: ColumnMap {
            pitcher: a.col_pitcher.clone().unwrap_or(d.pitcher),
            pitch_type: a.col_pitch_type.clone().unwrap_or(d.pitch_type),
            plate_x: a.col_plate_x.clone().unwrap_or(d.plate_x),
            plate_z: a.col_plate_z.clone().unwrap_or(d.plate_z),
        },
        delimiter: delimiter as u8,
        pitcher: a.pitcher.clone(),
        pitch_type: Some(a.pitch_type.clone().unwrap_or_else(|| "FF".into())),
        min_count,
    };
    let ingested = ingest_pitches(open(&input)?, &options)?;
    if ingested.dropped > 0 {
        log::warn!("dropped {} pitches without a usable location", ingested.dropped);
    }
    let groups = group_by_pitcher(ingested.records, min_count);
    if groups.is_empty() {
        return Err(Error::InsufficientData {
            subject: "every pitcher".into(),
            count: 0,
            required: min_count,
        }
        .into());
    }
    let dz = StrikeZone::default();
    let dm = PitchModel::default();
    let model = PitchModel {
        zone: StrikeZone {
            x_half_width: a.zone_half_width.unwrap_or(dz.x_half_width),
            z_low: a.zone_low.unwrap_or(dz.z_low),
            z_high: a.zone_high.unwrap_or(dz.z_high),
        },
        resolution: a.resolution.unwrap_or(dm.resolution),
        margin: a.margin.unwrap_or(dm.margin),
    };
    model.zone.validate()?;
    let methods: &[&str] = match a.method.unwrap_or(BaseballMethod::Both) {
        BaseballMethod::Mcse => &["mcse"],
        BaseballMethod::Jeeds => &["jeeds"],
        BaseballMethod::Both => &["mcse", "jeeds"],
    };
    let estimators = methods
        .iter()
        .map(|m| {
            let spec = pitch_estimator(m)?;
            Ok(match (spec, a.m) {
                (EstimatorSpec::Mcse { config, label }, Some(m)) => EstimatorSpec::Mcse {
                    config: FilterConfig { m, ..config },
                    label,
                },
                (spec, _) => spec,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let seed = a.seed.unwrap_or(0);
    let reports = with_workers(a.workers, || estimate_pitchers(&groups, &estimators, &model, seed))??;
    write_json(out_dir, "baseball.json", &reports)?;
    for spec in &estimators {
        let label = spec.label();
        let ellipses = reports
            .iter()
            .filter(|r| r.estimator == label)
            .map(|r| {
                Ok((
                    r.pitcher.clone(),
                    confidence_ellipse(&r.covariance(), 0.5, r.mean_location)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let svg = EllipsePlot {
            title: format!("50% ellipses, {label}"),
            x_label: "plate_x (ft)".into(),
            y_label: "plate_z (ft)".into(),
            ellipses,
            zone: Some(model.zone.rect()),
        }
        .render()?;
        write_text(out_dir, &format!("ellipses-{label}.svg"), &svg)?;
    }
    Ok(())
}

/// Pulls (label, covariance, centre) out of an `estimate` or `baseball`
/// JSON file.
fn read_estimates(path: &Path) -> Result<Vec<(String, Cov2, [f64; 2])>> {
    let value: serde_json::Value =
        serde_json::from_reader(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    let items = match value {
        serde_json::Value::Array(items) => items,
        other => vec![other],
    };
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("estimate")
        .to_string();
    items
        .iter()
        .map(|v| {
            let num = |k: &str| {
                v.get(k)
                    .and_then(serde_json::Value::as_f64)
                    .ok_or_else(|| anyhow!("{}: missing numeric field {k}", path.display()))
            };
            let (sx, sy, rho) = (num("sigma_x")?, num("sigma_y")?, num("rho")?);
            let label = v
                .get("pitcher")
                .or_else(|| v.get("label"))
                .and_then(serde_json::Value::as_str)
                .map(str::to_string)
                .unwrap_or_else(|| stem.clone());
            let center = v
                .get("mean_location")
                .and_then(|c| serde_json::from_value::<[f64; 2]>(c.clone()).ok())
                .unwrap_or([0.0, 0.0]);
            Ok((label, Cov2::new(sx * sx, rho * sx * sy, sy * sy), center))
        })
        .collect()
}

pub fn plot(a: PlotArgs, out_dir: &Path) -> Result<()> {
    let modes =
        usize::from(!a.trace.is_empty()) + usize::from(a.records.is_some()) + usize::from(!a.ellipse.is_empty());
    if modes == 0 {
        return Err(usage("nothing to plot: give --trace, --records or --ellipse"));
    }
    if modes > 1 {
        return Err(usage("--trace, --records and --ellipse are mutually exclusive"));
    }
    if !a.label.is_empty() && a.label.len() != a.trace.len() {
        return Err(usage("give one --label per --trace"));
    }
    if !a.ellipse.is_empty() {
        let mut ellipses = Vec::new();
        for p in &a.ellipse {
            for (label, cov, center) in read_estimates(p)? {
                ellipses.push((label, confidence_ellipse(&cov, a.mass, center)?));
            }
        }
        let svg = EllipsePlot {
            title: a
                .title
                .clone()
                .unwrap_or_else(|| format!("{}% confidence ellipses", a.mass * 100.0)),
            x_label: "x".into(),
            y_label: "y".into(),
            ellipses,
            zone: None,
        }
        .render()?;
        return write_text(out_dir, a.output.as_deref().unwrap_or("ellipses.svg"), &svg);
    }
    let title = a.title.clone().unwrap_or_else(|| "Mean JD by observation".into());
    let svg = if let Some(p) = &a.records {
        let records = read_records(open(p)?).with_context(|| format!("reading {}", p.display()))?;
        if records.is_empty() {
            return Err(Error::InvalidObservation(format!("{} has no records", p.display())).into());
        }
        curves_plot(&records, &title)?
    } else {
        let mut series = Vec::new();
        for (i, p) in a.trace.iter().enumerate() {
            let rows = read_trace(open(p)?).with_context(|| format!("reading {}", p.display()))?;
            let points = rows
                .iter()
                .map(|r| {
                    r.jd_if_truth_known
                        .map(|jd| (r.obs_index as f64, jd))
                        .ok_or_else(|| anyhow!("{} has no JD column values", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            if points.is_empty() {
                return Err(Error::InvalidObservation(format!("{} is empty", p.display())).into());
            }
            let label = a
                .label
                .get(i)
                .cloned()
                .unwrap_or_else(|| p.file_stem().and_then(|s| s.to_str()).unwrap_or("trace").to_string());
            series.push(Series { label, points });
        }
        LinePlot {
            title,
            x_label: "observation".into(),
            y_label: "JD".into(),
            series,
        }
        .render()?
    };
    write_text(out_dir, a.output.as_deref().unwrap_or("jd.svg"), &svg)
}

pub fn validate_config(a: ValidateArgs) -> Result<()> {
    let text = fs::read_to_string(&a.path).with_context(|| format!("reading {}", a.path.display()))?;
    let bad = |e: serde_json::Error| usage(format!("{}: {e}", a.path.display()));
    match a.kind {
        ConfigKind::Experiment => {
            let c = ExperimentConfig::from_json(&text)?;
            println!(
                "ok: experiment with {} agents x {} estimators, {} repetitions of {} observations",
                c.agents.len(),
                c.estimators.len(),
                c.repetitions,
                c.n_observations
            );
        }
        ConfigKind::Sweep => {
            let s: SweepSpec = serde_json::from_str(&text).map_err(bad)?;
            if s.configs.is_empty() {
                return Err(usage("sweep has no configurations"));
            }
            for c in &s.configs {
                c.validate()?;
            }
            println!(
                "ok: sweep of {} configurations over {} agents",
                s.configs.len(),
                s.roster.len()
            );
        }
        ConfigKind::Filter => {
            let c: FilterConfig = serde_json::from_str(&text).map_err(bad)?;
            c.validate()?;
            println!("ok: {}", c.label());
        }
    }
    Ok(())
}

/// Process exit code for a failed command.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) | Error::InvalidParameter(_) => 2,
                e if e.is_numerical() => 4,
                _ => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<csv::Error>().is_some() {
            return 3;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 3;
        }
    }
    3
}
