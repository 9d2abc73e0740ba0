//! Experiment harness: many agents observed in lockstep on one sequence of
//! states and noise draws, each fed to every configured estimator.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{
    random_dynamic_schedule, shared_normals, Agent, AgentSpec, DecisionKind, DecisionModel, DynamicKind, SkillSchedule,
};
use crate::darts::{generate_state, rasterize_reward, BoardConfig, DartboardState};
use crate::estimator::{SkillEstimate, SkillEstimator, StepInfo};
use crate::jeeds::{HypothesisGrid, JeedsConfig};
use crate::mcse::{FilterConfig, ParticleFilter, ResampleStrategy};
use crate::metrics::skill_jd;
use crate::noise::{ExecutionSkillParams, SkillRanges};
use crate::rng::{SeedStreams, AGENT_SKILL, STATES};
use crate::trace::TraceRow;
use crate::value_field::ValueFieldEngine;
use crate::{Error, Result};

/// Bumped whenever a column of [`RunRecord`] or [`SweepRow`] changes.
pub const SCHEMA_VERSION: u32 = 1;

const AGENT_DECISION: &str = "agent-decision";
const MAX_SYMMETRY_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    Symmetric,
    Asymmetric,
}

impl Symmetry {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Symmetric => "symmetric",
            Self::Asymmetric => "asymmetric",
        }
    }
}

/// Symmetric iff `|sigma_x - sigma_y| < 50` and `|rho| < 0.2`, both strict.
pub fn classify_symmetry(skill: &ExecutionSkillParams) -> Symmetry {
    if (skill.sigma_x - skill.sigma_y).abs() < 50.0 && skill.rho.abs() < 0.2 {
        Symmetry::Symmetric
    } else {
        Symmetry::Asymmetric
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryFilter {
    #[default]
    Any,
    Symmetric,
    Asymmetric,
}

impl SymmetryFilter {
    fn accepts(&self, skill: &ExecutionSkillParams) -> bool {
        match self {
            Self::Any => true,
            Self::Symmetric => classify_symmetry(skill) == Symmetry::Symmetric,
            Self::Asymmetric => classify_symmetry(skill) == Symmetry::Asymmetric,
        }
    }
}

/// The stationary skill shared by every stationary agent of a repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SkillDraw {
    Fixed {
        skill: ExecutionSkillParams,
    },
    /// Uniform over the configured ranges, redrawn until the symmetry
    /// filter accepts.
    Uniform {
        #[serde(default)]
        symmetry: SymmetryFilter,
    },
}

impl Default for SkillDraw {
    fn default() -> Self {
        Self::Uniform {
            symmetry: SymmetryFilter::Any,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    #[default]
    Stationary,
    Abrupt,
    Gradual,
}

/// One roster entry. A missing `lambda` is drawn per repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentTemplate {
    pub kind: DecisionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub dynamics: Dynamics,
}

impl AgentTemplate {
    pub fn new(kind: DecisionKind, dynamics: Dynamics) -> Self {
        Self {
            kind,
            lambda: None,
            dynamics,
        }
    }
}

impl FromStr for AgentTemplate {
    type Err = Error;

    /// `rational`, `softmax`, `abrupt-flip`, `gradual-deceptive`, ...
    fn from_str(s: &str) -> Result<Self> {
        let (dynamics, kind) = match s.split_once('-') {
            Some(("abrupt", k)) => (Dynamics::Abrupt, k),
            Some(("gradual", k)) => (Dynamics::Gradual, k),
            _ => (Dynamics::Stationary, s),
        };
        Ok(Self::new(kind.parse()?, dynamics))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    Mcse {
        #[serde(default)]
        config: FilterConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Jeeds {
        #[serde(default)]
        config: JeedsConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

impl EstimatorSpec {
    pub fn mcse(config: FilterConfig) -> Self {
        Self::Mcse { config, label: None }
    }

    pub fn jeeds(config: JeedsConfig) -> Self {
        Self::Jeeds { config, label: None }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Mcse { config, label } => label.clone().unwrap_or_else(|| config.label()),
            Self::Jeeds { config, label } => label.clone().unwrap_or_else(|| config.label()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Mcse { config, .. } => config.validate(),
            Self::Jeeds { config, .. } => config.validate(),
        }
    }

    pub fn build(&self, streams: &SeedStreams) -> Result<Box<dyn SkillEstimator>> {
        let label = self.label();
        Ok(match self {
            Self::Mcse { config, .. } => Box::new(ParticleFilter::new(*config, streams)?.with_label(label)),
            Self::Jeeds { config, .. } => Box::new(HypothesisGrid::new(*config)?.with_label(label)),
        })
    }
}

fn default_n_observations() -> usize {
    100
}

fn default_repetitions() -> usize {
    30
}

fn default_true() -> bool {
    true
}

fn default_agents() -> Vec<AgentTemplate> {
    vec![
        AgentTemplate::new(DecisionKind::Rational, Dynamics::Stationary),
        AgentTemplate::new(DecisionKind::Softmax, Dynamics::Stationary),
    ]
}

fn default_estimators() -> Vec<EstimatorSpec> {
    vec![
        EstimatorSpec::mcse(FilterConfig::default()),
        EstimatorSpec::jeeds(JeedsConfig::default()),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_n_observations")]
    pub n_observations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Independent repetitions, each with its own skill draw and states.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub board: BoardConfig,
    #[serde(default)]
    pub skill: SkillDraw,
    /// Ranges of the uniform skill draw.
    #[serde(default)]
    pub ranges: SkillRanges,
    /// Dynamic agents draw rho separately for each endpoint.
    #[serde(default = "default_true")]
    pub independent_rho: bool,
    #[serde(default = "default_agents")]
    pub agents: Vec<AgentTemplate>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_observations: default_n_observations(),
            seed: 0,
            repetitions: default_repetitions(),
            board: BoardConfig::default(),
            skill: SkillDraw::default(),
            ranges: SkillRanges::darts(),
            independent_rho: true,
            agents: default_agents(),
            estimators: default_estimators(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_observations == 0 {
            return Err(Error::Config("n_observations must be positive".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        if self.agents.is_empty() {
            return Err(Error::Config("agent roster is empty".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators configured".into()));
        }
        self.board.geometry.validate()?;
        self.board.action_grid()?;
        self.ranges.validate()?;
        if let SkillDraw::Fixed { skill } = &self.skill {
            skill.validate()?;
        }
        for a in &self.agents {
            if let Some(l) = a.lambda {
                DecisionModel::with_lambda(a.kind, l)?;
            }
        }
        let mut labels = Vec::new();
        for e in &self.estimators {
            e.validate()?;
            let label = e.label();
            if labels.contains(&label) {
                return Err(Error::Config(format!("duplicate estimator label {label}")));
            }
            labels.push(label);
        }
        Ok(())
    }

    fn repetition_streams(&self, repetition: usize) -> SeedStreams {
        SeedStreams::new(self.seed).child("repetition", repetition as u64)
    }

    /// The agents of one repetition. Every draw happens in a fixed order
    /// whatever the roster, so adding an agent never changes the others.
    pub fn agents_for(&self, repetition: usize) -> Result<Vec<AgentSpec>> {
        let streams = self.repetition_streams(repetition);
        let n = self.n_observations;
        let mut rng = streams.stream(AGENT_SKILL);
        let stationary = match self.skill {
            SkillDraw::Fixed { skill } => skill,
            SkillDraw::Uniform { symmetry } => (0..MAX_SYMMETRY_DRAWS)
                .map(|_| self.ranges.sample_skill(&mut rng))
                .find(|s| symmetry.accepts(s))
                .ok_or_else(|| Error::Config(format!("no {symmetry:?} skill found in the configured ranges")))?,
        };
        let abrupt = random_dynamic_schedule(DynamicKind::Abrupt, n, self.independent_rho, &mut rng);
        let gradual = random_dynamic_schedule(DynamicKind::Gradual, n, self.independent_rho, &mut rng);
        let mut decisions = streams.stream(AGENT_DECISION);
        self.agents
            .iter()
            .map(|t| {
                let drawn = DecisionModel::random(t.kind, &mut decisions);
                let decision = match t.lambda {
                    Some(l) => DecisionModel::with_lambda(t.kind, l)?,
                    None => drawn,
                };
                let skill = match t.dynamics {
                    Dynamics::Stationary => SkillSchedule::stationary(stationary),
                    Dynamics::Abrupt => abrupt,
                    Dynamics::Gradual => gradual,
                };
                let spec = AgentSpec::new(decision, skill);
                spec.validate(n)?;
                Ok(spec)
            })
            .collect()
    }
}

/// One long-form output row: an estimate of one agent by one estimator
/// after one observation of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repetition: usize,
    pub obs_index: usize,
    pub agent_id: usize,
    pub agent: String,
    pub estimator_id: usize,
    pub estimator: String,
    pub jd: f64,
    pub est_sigma_x: f64,
    pub est_sigma_y: f64,
    pub est_rho: f64,
    pub est_lambda: f64,
    pub true_sigma_x: f64,
    pub true_sigma_y: f64,
    pub true_rho: f64,
    /// Empty for rational agents.
    pub true_lambda: Option<f64>,
    pub change_step: Option<usize>,
    pub neff: f64,
    pub resampled: bool,
}

impl RunRecord {
    pub fn true_skill(&self) -> ExecutionSkillParams {
        ExecutionSkillParams {
            sigma_x: self.true_sigma_x,
            sigma_y: self.true_sigma_y,
            rho: self.true_rho,
        }
    }

    pub fn estimate(&self) -> SkillEstimate {
        SkillEstimate {
            sigma_x: self.est_sigma_x,
            sigma_y: self.est_sigma_y,
            rho: self.est_rho,
            lambda: self.est_lambda,
        }
    }
}

fn state_for(board: &BoardConfig, streams: &SeedStreams, obs_index: usize) -> DartboardState {
    let mut rng = streams.indexed(STATES, obs_index as u64);
    generate_state(obs_index as u64, board.geometry, board.shuffle_bull, &mut rng)
}

fn engine_for(board: &BoardConfig, state: &DartboardState) -> Result<ValueFieldEngine> {
    Ok(ValueFieldEngine::new(rasterize_reward(state, &board.action_grid()?)))
}

/// Runs one repetition: every agent throws at the same states with the same
/// standard-normal draws, and every (agent, estimator) pair starts from the
/// same estimator streams.
pub fn run_repetition(config: &ExperimentConfig, repetition: usize) -> Result<Vec<RunRecord>> {
    let n = config.n_observations;
    let streams = config.repetition_streams(repetition);
    let specs = config.agents_for(repetition)?;
    let labels: Vec<String> = config.estimators.iter().map(EstimatorSpec::label).collect();
    let mut agents: Vec<Agent> = specs
        .iter()
        .enumerate()
        .map(|(i, s)| Agent::new(s.clone(), &streams, i as u64))
        .collect();
    let mut estimators: Vec<Vec<Box<dyn SkillEstimator>>> = specs
        .iter()
        .map(|_| {
            config
                .estimators
                .iter()
                .enumerate()
                .map(|(e, spec)| spec.build(&streams.child("estimator", e as u64)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(n * specs.len() * labels.len());
    for obs_index in 0..n {
        let state = state_for(&config.board, &streams, obs_index);
        let engine = engine_for(&config.board, &state)?;
        let normals = shared_normals(&streams, obs_index);
        for (agent_id, agent) in agents.iter_mut().enumerate() {
            let obs = agent.step(&engine, obs_index, n, normals);
            let truth = agent.spec.current_skill(obs_index, n);
            let change_step = match agent.spec.skill {
                SkillSchedule::Abrupt { change_step, .. } => Some(change_step),
                _ => None,
            };
            for (estimator_id, est) in estimators[agent_id].iter_mut().enumerate() {
                let info = est.observe(&engine, obs.executed_action)?;
                let e = est.estimate();
                records.push(RunRecord {
                    repetition,
                    obs_index,
                    agent_id,
                    agent: agent.spec.label(),
                    estimator_id,
                    estimator: labels[estimator_id].clone(),
                    jd: skill_jd(&truth, &e)?,
                    est_sigma_x: e.sigma_x,
                    est_sigma_y: e.sigma_y,
                    est_rho: e.rho,
                    est_lambda: e.lambda,
                    true_sigma_x: truth.sigma_x,
                    true_sigma_y: truth.sigma_y,
                    true_rho: truth.rho,
                    true_lambda: agent.spec.decision.lambda(),
                    change_step,
                    neff: info.neff,
                    resampled: info.resampled,
                });
            }
        }
    }
    Ok(records)
}

/// All repetitions, run in parallel; the output order depends only on the
/// config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let per_rep = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(config, rep))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}

/// One step of a single simulated agent.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedStep {
    pub obs_index: usize,
    pub state: DartboardState,
    pub executed_action: [f64; 2],
    pub truth: ExecutionSkillParams,
}

/// Simulates one agent with the same streams `run_repetition` would use
/// for agent 0.
pub fn simulate_agent(spec: &AgentSpec, board: &BoardConfig, n: usize, seed: u64) -> Result<Vec<SimulatedStep>> {
    spec.validate(n)?;
    let streams = SeedStreams::new(seed);
    let mut agent = Agent::new(spec.clone(), &streams, 0);
    (0..n)
        .map(|i| {
            let state = state_for(board, &streams, i);
            let engine = engine_for(board, &state)?;
            let obs = agent.step(&engine, i, n, shared_normals(&streams, i));
            Ok(SimulatedStep {
                obs_index: i,
                state,
                executed_action: obs.executed_action,
                truth: spec.current_skill(i, n),
            })
        })
        .collect()
}

/// Feeds a recorded sequence of (state, executed action) pairs to one
/// estimator. With `truth`, each row carries the JD against the skill in
/// force at that step.
pub fn replay(
    estimator: &mut dyn SkillEstimator,
    board: &BoardConfig,
    steps: &[(DartboardState, [f64; 2])],
    truth: Option<&[ExecutionSkillParams]>,
) -> Result<Vec<TraceRow>> {
    if let Some(t) = truth {
        if t.len() != steps.len() {
            return Err(Error::Config(format!(
                "truth has {} steps but there are {} observations",
                t.len(),
                steps.len()
            )));
        }
    }
    let grid = board.action_grid()?;
    let mut rows = Vec::with_capacity(steps.len());
    for (i, (state, x)) in steps.iter().enumerate() {
        let engine = ValueFieldEngine::new(rasterize_reward(state, &grid));
        let info: StepInfo = estimator.observe(&engine, *x)?;
        let e = estimator.estimate();
        let jd = truth.map(|t| skill_jd(&t[i], &e)).transpose()?;
        rows.push(TraceRow::new(i, &e, &info, jd));
    }
    Ok(rows)
}

pub fn write_records<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<Vec<RunRecord>, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub records: String,
    pub n_records: usize,
    pub config: ExperimentConfig,
}

/// Writes `records.csv` and `manifest.json` into `dir`.
pub fn write_experiment(dir: &Path, config: &ExperimentConfig, records: &[RunRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_records(fs::File::create(dir.join("records.csv"))?, records)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        records: "records.csv".into(),
        n_records: records.len(),
        config: config.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub obs_index: usize,
    pub mean_jd: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Mean JD at each observation index, averaged across whatever runs are
/// passed in.
pub fn mean_jd_curve<'a>(records: impl IntoIterator<Item = &'a RunRecord>) -> Vec<CurvePoint> {
    let mut by_obs: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_obs.entry(r.obs_index).or_default().push(r.jd);
    }
    by_obs
        .into_iter()
        .map(|(obs_index, jds)| {
            let (mean_jd, std_error) = mean_and_se(&jds);
            CurvePoint {
                obs_index,
                mean_jd,
                std_error,
                n: jds.len(),
            }
        })
        .collect()
}

/// The last row of every (repetition, agent, estimator) run.
pub fn final_records(records: &[RunRecord]) -> Vec<&RunRecord> {
    let mut last: BTreeMap<(usize, usize, usize), &RunRecord> = BTreeMap::new();
    for r in records {
        let key = (r.repetition, r.agent_id, r.estimator_id);
        match last.get(&key) {
            Some(prev) if prev.obs_index >= r.obs_index => {}
            _ => {
                last.insert(key, r);
            }
        }
    }
    last.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub estimator: String,
    pub agent: String,
    pub n_runs: usize,
    pub mean_final_jd: f64,
    pub std_error: f64,
}

/// Final-JD mean per (estimator, agent label), in estimator then agent order.
pub fn summarize(records: &[RunRecord]) -> Vec<Summary> {
    let mut groups: BTreeMap<(usize, usize), (String, String, Vec<f64>)> = BTreeMap::new();
    for r in final_records(records) {
        groups
            .entry((r.estimator_id, r.agent_id))
            .or_insert_with(|| (r.estimator.clone(), r.agent.clone(), Vec::new()))
            .2
            .push(r.jd);
    }
    groups
        .into_values()
        .map(|(estimator, agent, jds)| {
            let (mean_final_jd, std_error) = mean_and_se(&jds);
            Summary {
                estimator,
                agent,
                n_runs: jds.len(),
                mean_final_jd,
                std_error,
            }
        })
        .collect()
}

/// The nine rational agents of the tuning rounds.
pub fn tuning_roster() -> Vec<ExecutionSkillParams> {
    let mut roster = Vec::new();
    for (sx, sy) in [(10.0, 10.0), (10.0, 100.0), (100.0, 100.0)] {
        for rho in [-0.75, 0.0, 0.75] {
            roster.push(ExecutionSkillParams {
                sigma_x: sx,
                sigma_y: sy,
                rho,
            });
        }
    }
    roster
}

/// Round one: noise scale x resample fraction x resampling strategy, 18
/// filters sharing `base`'s remaining settings.
pub fn round1_configs(base: &FilterConfig) -> Vec<FilterConfig> {
    let mut out = Vec::new();
    for w_pct in [0.002, 0.005, 0.020] {
        for r in [0.75, 0.90, 0.95] {
            for resample in [ResampleStrategy::EffThreshold { tau: 0.5 }, ResampleStrategy::Always] {
                out.push(FilterConfig {
                    w_pct,
                    r,
                    resample,
                    ..*base
                });
            }
        }
    }
    out
}

/// Round two: the particle count.
pub fn round2_configs(base: &FilterConfig) -> Vec<FilterConfig> {
    [50, 100, 500, 1000, 1500, 2000]
        .into_iter()
        .map(|m| FilterConfig { m, ..*base })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepPreset {
    Round1,
    Round2,
}

impl FromStr for SweepPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "round1" => Ok(Self::Round1),
            "round2" => Ok(Self::Round2),
            other => Err(Error::Config(format!("unknown sweep preset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub configs: Vec<FilterConfig>,
    #[serde(default = "tuning_roster")]
    pub roster: Vec<ExecutionSkillParams>,
    /// Seeds per (configuration, agent) cell.
    #[serde(default = "default_sweep_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_n_observations")]
    pub n_observations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub board: BoardConfig,
}

fn default_sweep_repetitions() -> usize {
    10
}

impl SweepSpec {
    pub fn preset(preset: SweepPreset, base: &FilterConfig) -> Self {
        let configs = match preset {
            SweepPreset::Round1 => round1_configs(base),
            SweepPreset::Round2 => round2_configs(base),
        };
        Self {
            configs,
            roster: tuning_roster(),
            repetitions: default_sweep_repetitions(),
            n_observations: default_n_observations(),
            seed: 0,
            board: BoardConfig::default(),
        }
    }

    /// The experiment run for roster entry `index`: one rational agent and
    /// every configuration as an estimator.
    pub fn experiment_for(&self, index: usize) -> ExperimentConfig {
        ExperimentConfig {
            n_observations: self.n_observations,
            seed: SeedStreams::new(self.seed).child("sweep-agent", index as u64).seed(),
            repetitions: self.repetitions,
            board: self.board.clone(),
            skill: SkillDraw::Fixed {
                skill: self.roster[index],
            },
            ranges: SkillRanges::darts(),
            independent_rho: true,
            agents: vec![AgentTemplate::new(DecisionKind::Rational, Dynamics::Stationary)],
            estimators: self.configs.iter().cloned().map(EstimatorSpec::mcse).collect(),
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rank: usize,
    pub label: String,
    pub m: usize,
    pub r: f64,
    pub w_pct: f64,
    pub strategy: String,
    pub mean_final_jd: f64,
    pub std_error: f64,
    pub n_runs: usize,
}

fn strategy_name(s: &ResampleStrategy) -> String {
    match s {
        ResampleStrategy::Always => "always".into(),
        ResampleStrategy::EffThreshold { tau } => format!("neff<{tau}"),
    }
}

/// Final JD of every configuration averaged over all roster agents and
/// seeds, ranked from best to worst. Ties keep configuration order.
pub fn parameter_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.configs.is_empty() {
        return Err(Error::Config("sweep has no configurations".into()));
    }
    if spec.roster.is_empty() {
        return Err(Error::Config("sweep roster is empty".into()));
    }
    let mut finals: Vec<Vec<f64>> = vec![Vec::new(); spec.configs.len()];
    for index in 0..spec.roster.len() {
        let records = run_experiment(&spec.experiment_for(index))?;
        for r in final_records(&records) {
            finals[r.estimator_id].push(r.jd);
        }
    }
    let mut rows: Vec<SweepRow> = spec
        .configs
        .iter()
        .zip(&finals)
        .map(|(c, jds)| {
            let (mean_final_jd, std_error) = mean_and_se(jds);
            SweepRow {
                rank: 0,
                label: c.label(),
                m: c.m,
                r: c.r,
                w_pct: c.w_pct,
                strategy: strategy_name(&c.resample),
                mean_final_jd,
                std_error,
                n_runs: jds.len(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.mean_final_jd.total_cmp(&b.mean_final_jd));
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank = i + 1;
    }
    Ok(rows)
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?)
}
