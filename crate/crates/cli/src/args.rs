use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(
    name = "mcse",
    version,
    about = "Estimate execution and decision-making skill from observed actions"
)]
pub struct Cli {
    /// Directory for output files. Falls back to $MCSE_OUT_DIR, then the
    /// current directory.
    #[arg(long, global = true, env = "MCSE_OUT_DIR")]
    pub out_dir: Option<PathBuf>,

    /// More log output: -v for progress, -vv for debugging.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate one agent and write its observations, states and true skill.
    Simulate(SimulateArgs),
    /// Run one estimator over an observation file.
    Estimate(EstimateArgs),
    /// Run a multi-agent, multi-estimator experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Rank particle-filter settings over the tuning roster.
    Sweep(SweepArgs),
    /// Estimate pitcher skill from pitch-location data.
    Baseball(BaseballArgs),
    /// Render JD curves or confidence ellipses as SVG.
    Plot(PlotArgs),
    /// Check a config file without running anything.
    ValidateConfig(ValidateArgs),
}

#[derive(ValueEnum, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mcse,
    Jeeds,
}

#[derive(ValueEnum, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum BaseballMethod {
    Mcse,
    Jeeds,
    Both,
}

#[derive(ValueEnum, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Resample {
    /// Resample when the effective count drops below --tau.
    Neff,
    /// Resample after every observation.
    Always,
}

#[derive(ValueEnum, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum NeffModeArg {
    /// Sum of unnormalised weights over M.
    RawSum,
    /// Classic 1 / sum(w^2) over M.
    Normalized,
}

#[derive(ValueEnum, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Round1,
    Round2,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigKind {
    Experiment,
    Sweep,
    Filter,
}

/// Reads a JSON config whose keys mirror a subcommand's long flags.
fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| mcse_core::Error::Config(format!("{}: {e}", path.display())))
        .map_err(Into::into)
}

/// Declares a flag set whose every value is optional, so that a JSON config
/// file can supply anything the command line leaves out.
macro_rules! mergeable_args {
    ($(#[$sm:meta])* pub struct $name:ident { $($(#[$fm:meta])* pub $field:ident: $ty:ty,)* }) => {
        $(#[$sm])*
        #[derive(clap::Args, Deserialize, Debug, Default, Clone)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            /// JSON file providing defaults for any flag of this command
            /// (keys are flag names with underscores); flags win.
            #[arg(long)]
            #[serde(skip)]
            pub config: Option<PathBuf>,
            $($(#[$fm])* pub $field: $ty,)*
        }

        impl $name {
            pub fn merged(self) -> Result<Self> {
                let Some(path) = self.config.clone() else {
                    return Ok(self);
                };
                let file: Self = read_config(&path)?;
                Ok(Self {
                    config: self.config,
                    $($field: self.$field.or(file.$field),)*
                })
            }
        }
    };
}

mergeable_args! {
    pub struct SimulateArgs {
        /// Agent type, optionally with dynamics: rational, flip, softmax,
        /// deceptive, abrupt-<type>, gradual-<type> [default: rational]
        #[arg(long)]
        pub agent: Option<String>,
        /// Execution skill as sigma_x,sigma_y,rho (mm). Drawn at random
        /// when absent. For dynamic agents this is the initial skill.
        #[arg(long)]
        pub sigma: Option<String>,
        /// Final skill of a dynamic agent as sigma_x,sigma_y,rho.
        #[arg(long)]
        pub final_sigma: Option<String>,
        /// Observation index at which an abrupt agent switches skill.
        #[arg(long)]
        pub change_step: Option<usize>,
        /// Rationality of flip, softmax and deceptive agents. Drawn at
        /// random when absent.
        #[arg(long)]
        pub lambda: Option<f64>,
        /// Number of observations [default: 100]
        #[arg(long)]
        pub n: Option<usize>,
        /// Root seed [default: 0]
        #[arg(long)]
        pub seed: Option<u64>,
        /// Action grid resolution in mm [default: 5.0]
        #[arg(long)]
        pub resolution: Option<f64>,
        /// Shuffle the bull values together with the sector values.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        pub shuffle_bull: Option<bool>,
        /// Draw rho independently for the two endpoints of a random dynamic
        /// agent [default: true]
        #[arg(long)]
        pub independent_rho: Option<bool>,
    }
}

mergeable_args! {
    pub struct EstimateArgs {
        /// Observation CSV written by `simulate`.
        #[arg(long)]
        pub observations: Option<PathBuf>,
        /// States file [default: states.jsonl next to the observations]
        #[arg(long)]
        pub states: Option<PathBuf>,
        /// Truth file for per-step JD [default: truth.json next to the
        /// observations, when present]
        #[arg(long)]
        pub truth: Option<PathBuf>,
        /// Ignore any truth file.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        pub no_truth: Option<bool>,
        /// Estimator [default: mcse]
        #[arg(long, value_enum)]
        pub method: Option<Method>,
        /// Particle count [default: 1000]
        #[arg(long)]
        pub m: Option<usize>,
        /// Fraction of particles resampled from the old set [default: 0.9]
        #[arg(long)]
        pub r: Option<f64>,
        /// Perturbation std as a fraction of each parameter range [default: 0.005]
        #[arg(long)]
        pub w_pct: Option<f64>,
        /// Resampling strategy [default: neff]
        #[arg(long, value_enum)]
        pub resample: Option<Resample>,
        /// Effective-count threshold for --resample neff [default: 0.5]
        #[arg(long)]
        pub tau: Option<f64>,
        /// Effective-count definition [default: raw-sum]
        #[arg(long, value_enum)]
        pub neff_mode: Option<NeffModeArg>,
        /// JEEDS sigma levels [default: 33]
        #[arg(long)]
        pub sigma_levels: Option<usize>,
        /// JEEDS lambda levels [default: 33]
        #[arg(long)]
        pub lambda_levels: Option<usize>,
        /// Root seed for the estimator's random streams [default: 0]
        #[arg(long)]
        pub seed: Option<u64>,
        /// Action grid resolution in mm [default: 5.0]
        #[arg(long)]
        pub resolution: Option<f64>,
        /// Prefix of the output files [default: the method name]
        #[arg(long)]
        pub name: Option<String>,
    }
}

mergeable_args! {
    pub struct ExperimentArgs {
        /// Experiment definition (JSON). Without it the built-in default
        /// experiment runs.
        #[arg(long)]
        pub experiment: Option<PathBuf>,
        /// Override the number of repetitions.
        #[arg(long)]
        pub repetitions: Option<usize>,
        /// Override the root seed.
        #[arg(long)]
        pub seed: Option<u64>,
        /// Override the number of observations per agent.
        #[arg(long)]
        pub n: Option<usize>,
        /// Run 4000 repetitions per agent type instead of the desk-scale 30.
        /// Takes days on a single machine.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        pub full_scale: Option<bool>,
        /// Worker threads [default: all cores]
        #[arg(long)]
        pub workers: Option<usize>,
    }
}

mergeable_args! {
    pub struct SweepArgs {
        /// Built-in configuration grid [default: round1]
        #[arg(long, value_enum)]
        pub preset: Option<Preset>,
        /// Full sweep definition (JSON); replaces the preset.
        #[arg(long)]
        pub spec: Option<PathBuf>,
        /// Seeds per configuration and agent [default: 10]
        #[arg(long)]
        pub repetitions: Option<usize>,
        /// Observations per agent [default: 100]
        #[arg(long)]
        pub n: Option<usize>,
        /// Root seed [default: 0]
        #[arg(long)]
        pub seed: Option<u64>,
        /// Particle count of the round-one grid [default: 1000]
        #[arg(long)]
        pub m: Option<usize>,
        /// Action grid resolution in mm [default: 5.0]
        #[arg(long)]
        pub resolution: Option<f64>,
        /// Worker threads [default: all cores]
        #[arg(long)]
        pub workers: Option<usize>,
    }
}

mergeable_args! {
    pub struct BaseballArgs {
        /// Delimited pitch data with a header row.
        #[arg(long)]
        pub input: Option<PathBuf>,
        /// Only this pitcher [default: every pitcher with enough pitches]
        #[arg(long)]
        pub pitcher: Option<String>,
        /// Pitch type code [default: FF]
        #[arg(long)]
        pub pitch_type: Option<String>,
        /// Minimum usable pitches per pitcher [default: 100]
        #[arg(long)]
        pub min_count: Option<usize>,
        /// Estimators to run [default: both]
        #[arg(long, value_enum)]
        pub method: Option<BaseballMethod>,
        /// Particle count for MCSE [default: 1000]
        #[arg(long)]
        pub m: Option<usize>,
        /// Column holding the pitcher id [default: pitcher]
        #[arg(long)]
        pub col_pitcher: Option<String>,
        /// Column holding the pitch type [default: pitch_type]
        #[arg(long)]
        pub col_pitch_type: Option<String>,
        /// Column holding the horizontal location in feet [default: plate_x]
        #[arg(long)]
        pub col_plate_x: Option<String>,
        /// Column holding the height in feet [default: plate_z]
        #[arg(long)]
        pub col_plate_z: Option<String>,
        /// Field delimiter [default: ,]
        #[arg(long)]
        pub delimiter: Option<char>,
        /// Strike zone half width in feet [default: 0.83]
        #[arg(long)]
        pub zone_half_width: Option<f64>,
        /// Bottom of the strike zone in feet [default: 1.5]
        #[arg(long)]
        pub zone_low: Option<f64>,
        /// Top of the strike zone in feet [default: 3.5]
        #[arg(long)]
        pub zone_high: Option<f64>,
        /// Reward grid resolution in feet [default: 0.05]
        #[arg(long)]
        pub resolution: Option<f64>,
        /// Grid extent beyond the zone in feet [default: 4.0]
        #[arg(long)]
        pub margin: Option<f64>,
        /// Root seed [default: 0]
        #[arg(long)]
        pub seed: Option<u64>,
        /// Worker threads [default: all cores]
        #[arg(long)]
        pub workers: Option<usize>,
    }
}

#[derive(clap::Args, Debug, Clone)]
pub struct PlotArgs {
    /// Trace CSVs from `estimate`; each becomes one JD series.
    #[arg(long)]
    pub trace: Vec<PathBuf>,
    /// Series labels for --trace, in order [default: file stems]
    #[arg(long)]
    pub label: Vec<String>,
    /// Records CSV from `experiment`; plots mean JD per estimator and agent.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Estimate JSON from `estimate` or `baseball`; each estimate becomes
    /// one confidence ellipse.
    #[arg(long)]
    pub ellipse: Vec<PathBuf>,
    /// Probability mass inside each ellipse.
    #[arg(long, default_value_t = 0.5)]
    pub mass: f64,
    /// Plot title.
    #[arg(long)]
    pub title: Option<String>,
    /// Output file name inside the output directory [default: jd.svg or
    /// ellipses.svg]
    #[arg(long)]
    pub output: Option<String>,
}

#[derive(clap::Args, Debug, Clone)]
pub struct ValidateArgs {
    /// The config file.
    pub path: PathBuf,
    /// What the file describes.
    #[arg(long, value_enum, default_value_t = ConfigKind::Experiment)]
    pub kind: ConfigKind,
}
