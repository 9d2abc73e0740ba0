//! Interface shared by the particle filter and the grid-Bayes baseline.

use serde::{Deserialize, Serialize};

use crate::cov::Cov2;
use crate::noise::ExecutionSkillParams;
use crate::value_field::ValueFieldEngine;
use crate::Result;

/// Point estimate of an agent's skill.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillEstimate {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
    pub lambda: f64,
}

impl SkillEstimate {
    pub fn skill(&self) -> ExecutionSkillParams {
        ExecutionSkillParams {
            sigma_x: self.sigma_x,
            sigma_y: self.sigma_y,
            rho: self.rho,
        }
    }

    pub fn covariance(&self) -> Cov2 {
        self.skill().covariance()
    }
}

/// What happened while folding in one observation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepInfo {
    /// Effective count compared against the resampling threshold, computed
    /// after the weight update.
    pub neff: f64,
    pub resampled: bool,
    pub perturbed: bool,
    /// The belief collapsed numerically and was reset to its prior.
    pub reinitialized: bool,
}

pub trait SkillEstimator: Send {
    fn name(&self) -> &str;

    /// Folds in one executed action observed on the state behind `engine`.
    fn observe(&mut self, engine: &ValueFieldEngine, executed: [f64; 2]) -> Result<StepInfo>;

    fn estimate(&self) -> SkillEstimate;
}
