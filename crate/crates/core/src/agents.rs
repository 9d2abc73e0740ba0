//! Simulated agents: a decision model picks a target on the value field for
//! the agent's true skill, then execution noise moves it.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::noise::{ExecutionSkillParams, ParamRange, SkillRanges};
use crate::rng::{SeedStreams, Stream, AGENT_NOISE, AGENT_TARGETS};
use crate::value_field::{optimal_action, ValueField, ValueFieldEngine};
use crate::{Error, Result};

/// Range of the flip and deceptive parameters.
pub const UNIT_RANGE: ParamRange = ParamRange::new(0.0, 1.0);
/// Representative sigma ranges for accurate and inaccurate dynamic agents.
pub const ACCURATE_SIGMA: ParamRange = ParamRange::new(8.0, 15.0);
pub const INACCURATE_SIGMA: ParamRange = ParamRange::new(130.0, 145.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Rational,
    Flip,
    Softmax,
    Deceptive,
}

impl DecisionKind {
    pub const ALL: [DecisionKind; 4] = [Self::Rational, Self::Flip, Self::Softmax, Self::Deceptive];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Rational => "rational",
            Self::Flip => "flip",
            Self::Softmax => "softmax",
            Self::Deceptive => "deceptive",
        }
    }
}

impl fmt::Display for DecisionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecisionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown decision model `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionModel {
    Rational,
    /// Optimal with probability `lambda`, otherwise a uniform grid cell.
    Flip {
        lambda: f64,
    },
    /// Samples the softmax of the value field.
    Softmax {
        lambda: f64,
    },
    /// Farthest cell from the optimum whose value is at least
    /// `lambda * max`.
    Deceptive {
        lambda: f64,
    },
}

impl DecisionModel {
    pub fn kind(&self) -> DecisionKind {
        match self {
            Self::Rational => DecisionKind::Rational,
            Self::Flip { .. } => DecisionKind::Flip,
            Self::Softmax { .. } => DecisionKind::Softmax,
            Self::Deceptive { .. } => DecisionKind::Deceptive,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            Self::Rational => None,
            Self::Flip { lambda } | Self::Softmax { lambda } | Self::Deceptive { lambda } => Some(lambda),
        }
    }

    pub fn with_lambda(kind: DecisionKind, lambda: f64) -> Result<Self> {
        let m = match kind {
            DecisionKind::Rational => Self::Rational,
            DecisionKind::Flip => Self::Flip { lambda },
            DecisionKind::Softmax => Self::Softmax { lambda },
            DecisionKind::Deceptive => Self::Deceptive { lambda },
        };
        m.validate()?;
        Ok(m)
    }

    /// Draws the rationality parameter uniformly from its range.
    pub fn random<R: Rng + ?Sized>(kind: DecisionKind, rng: &mut R) -> Self {
        match kind {
            DecisionKind::Rational => Self::Rational,
            DecisionKind::Flip => Self::Flip {
                lambda: UNIT_RANGE.sample(rng),
            },
            DecisionKind::Softmax => Self::Softmax {
                lambda: SkillRanges::darts().lambda.sample(rng),
            },
            DecisionKind::Deceptive => Self::Deceptive {
                lambda: UNIT_RANGE.sample(rng),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Rational => true,
            Self::Flip { lambda } | Self::Deceptive { lambda } => UNIT_RANGE.contains(lambda),
            Self::Softmax { lambda } => lambda.is_finite() && lambda >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("rationality out of range: {self:?}")))
        }
    }
}

/// How the true execution skill evolves over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SkillSchedule {
    Stationary {
        skill: ExecutionSkillParams,
    },
    /// `initial` before `change_step`, `final` from it on.
    Abrupt {
        initial: ExecutionSkillParams,
        #[serde(rename = "final")]
        final_skill: ExecutionSkillParams,
        change_step: usize,
    },
    /// Componentwise linear from `initial` at index 0 to `final` at N-1.
    Gradual {
        initial: ExecutionSkillParams,
        #[serde(rename = "final")]
        final_skill: ExecutionSkillParams,
    },
}

impl SkillSchedule {
    pub fn stationary(skill: ExecutionSkillParams) -> Self {
        Self::Stationary { skill }
    }

    pub fn is_dynamic(&self) -> bool {
        !matches!(self, Self::Stationary { .. })
    }

    pub fn initial(&self) -> ExecutionSkillParams {
        match *self {
            Self::Stationary { skill } => skill,
            Self::Abrupt { initial, .. } | Self::Gradual { initial, .. } => initial,
        }
    }

    pub fn current(&self, obs_index: usize, n: usize) -> ExecutionSkillParams {
        match *self {
            Self::Stationary { skill } => skill,
            Self::Abrupt {
                initial,
                final_skill,
                change_step,
            } => {
                if obs_index < change_step {
                    initial
                } else {
                    final_skill
                }
            }
            Self::Gradual { initial, final_skill } => {
                let t = if n > 1 {
                    obs_index.min(n - 1) as f64 / (n - 1) as f64
                } else {
                    0.0
                };
                initial.lerp(&final_skill, t)
            }
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Self::Stationary { skill } => skill.validate(),
            Self::Abrupt {
                initial,
                final_skill,
                change_step,
            } => {
                initial.validate()?;
                final_skill.validate()?;
                let (lo, hi) = change_step_bounds(n);
                if change_step < lo || change_step > hi {
                    return Err(Error::InvalidParameter(format!(
                        "change step {change_step} outside the middle third [{lo}, {hi}] of {n} observations"
                    )));
                }
                Ok(())
            }
            Self::Gradual { initial, final_skill } => {
                initial.validate()?;
                final_skill.validate()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicKind {
    Abrupt,
    Gradual,
}

/// Inclusive range of admissible abrupt change steps: `33..=66` for 100
/// observations.
pub fn change_step_bounds(n: usize) -> (usize, usize) {
    (n / 3, 2 * n / 3)
}

/// Draws the endpoints of a dynamic agent: one endpoint from the accurate
/// sigma range, the other from the inaccurate one, in random order. With
/// `independent_rho` each endpoint gets its own rho, otherwise both share
/// one.
pub fn random_dynamic_schedule<R: Rng + ?Sized>(
    kind: DynamicKind,
    n: usize,
    independent_rho: bool,
    rng: &mut R,
) -> SkillSchedule {
    let rho = SkillRanges::darts().rho;
    let mut endpoint = |range: ParamRange, rho_value: Option<f64>| ExecutionSkillParams {
        sigma_x: range.sample(rng),
        sigma_y: range.sample(rng),
        rho: rho_value.unwrap_or_else(|| rho.sample(rng)),
    };
    let accurate = endpoint(ACCURATE_SIGMA, None);
    let shared = (!independent_rho).then_some(accurate.rho);
    let inaccurate = endpoint(INACCURATE_SIGMA, shared);
    let (initial, final_skill) = if rng.random::<bool>() {
        (accurate, inaccurate)
    } else {
        (inaccurate, accurate)
    };
    match kind {
        DynamicKind::Abrupt => {
            let (lo, hi) = change_step_bounds(n);
            SkillSchedule::Abrupt {
                initial,
                final_skill,
                change_step: rng.random_range(lo..=hi),
            }
        }
        DynamicKind::Gradual => SkillSchedule::Gradual { initial, final_skill },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub decision: DecisionModel,
    pub skill: SkillSchedule,
}

impl AgentSpec {
    pub fn new(decision: DecisionModel, skill: SkillSchedule) -> Self {
        Self { decision, skill }
    }

    pub fn current_skill(&self, obs_index: usize, n: usize) -> ExecutionSkillParams {
        self.skill.current(obs_index, n)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.decision.validate()?;
        self.skill.validate(n)
    }

    /// Short label such as `softmax` or `abrupt-rational`.
    pub fn label(&self) -> String {
        match self.skill {
            SkillSchedule::Stationary { .. } => self.decision.kind().to_string(),
            SkillSchedule::Abrupt { .. } => format!("abrupt-{}", self.decision.kind()),
            SkillSchedule::Gradual { .. } => format!("gradual-{}", self.decision.kind()),
        }
    }
}

/// One observed throw. The intended target is deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub state_id: u64,
    pub executed_action: [f64; 2],
}

/// Softmax weights over raw values, shifted by the maximum so large
/// `lambda * V` cannot overflow.
pub fn softmax_weights(values: &[f64], lambda: f64) -> Vec<f64> {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = values.iter().map(|&v| (lambda * (v - hi)).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Probability of each grid cell being chosen as the target.
pub fn softmax_distribution(field: &ValueField, lambda: f64) -> Vec<f64> {
    softmax_weights(&field.values, lambda)
}

fn sample_softmax<R: Rng + ?Sized>(values: &[f64], max_value: f64, lambda: f64, rng: &mut R) -> usize {
    let w: Vec<f64> = values.iter().map(|&v| (lambda * (v - max_value)).exp()).collect();
    let total: f64 = w.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, x) in w.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    // Round-off left `u` past the final partial sum.
    w.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

fn deceptive_index(field: &ValueField, lambda: f64) -> usize {
    let opt = optimal_action(field);
    let slack = 1e-10 * field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = lambda * field.max_value - slack;
    let mut best = (field.argmax, -1.0);
    for (i, &v) in field.values.iter().enumerate() {
        if v >= threshold {
            let c = field.grid.cell_center(i);
            let d = (c[0] - opt[0]).hypot(c[1] - opt[1]);
            if d > best.1 {
                best = (i, d);
            }
        }
    }
    best.0
}

/// Target cell index chosen by `decision` on `field`.
pub fn select_target_index<R: Rng + ?Sized>(decision: &DecisionModel, field: &ValueField, rng: &mut R) -> usize {
    match *decision {
        DecisionModel::Rational => field.argmax,
        DecisionModel::Flip { lambda } => {
            if rng.random::<f64>() < lambda {
                field.argmax
            } else {
                rng.random_range(0..field.values.len())
            }
        }
        DecisionModel::Softmax { lambda } => sample_softmax(&field.values, field.max_value, lambda, rng),
        DecisionModel::Deceptive { lambda } => deceptive_index(field, lambda),
    }
}

/// Target action (a grid cell centre) chosen by `decision` on `field`.
pub fn select_target<R: Rng + ?Sized>(decision: &DecisionModel, field: &ValueField, rng: &mut R) -> [f64; 2] {
    field.grid.cell_center(select_target_index(decision, field, rng))
}

/// Standard-normal pair shared by every agent at `obs_index`.
pub fn shared_normals(streams: &SeedStreams, obs_index: usize) -> [f64; 2] {
    crate::noise::standard_normal_pair(&mut streams.indexed(AGENT_NOISE, obs_index as u64))
}

/// An agent with its own target stream.
#[derive(Debug, Clone)]
pub struct Agent {
    pub spec: AgentSpec,
    targets: Stream,
}

impl Agent {
    /// `index` separates the target streams of agents sharing one seed.
    pub fn new(spec: AgentSpec, streams: &SeedStreams, index: u64) -> Self {
        Self {
            spec,
            targets: streams.indexed(AGENT_TARGETS, index),
        }
    }

    /// Picks a target on the field for the current true skill and adds
    /// the perturbation `L z` for the shared normals `z`. Passing zero
    /// normals executes the target exactly.
    pub fn step(&mut self, engine: &ValueFieldEngine, obs_index: usize, n: usize, normals: [f64; 2]) -> Observation {
        let skill = self.spec.current_skill(obs_index, n);
        let field = engine.field(&skill);
        let target = select_target(&self.spec.decision, &field, &mut self.targets);
        let eps = skill.perturbation_from_normals(normals);
        Observation {
            state_id: engine.reward().state_id,
            executed_action: [target[0] + eps[0], target[1] + eps[1]],
        }
    }
}
