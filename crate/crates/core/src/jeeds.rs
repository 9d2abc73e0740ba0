//! Grid-Bayes baseline over isotropic noise levels and rationalities.
//!
//! Every hypothesis is a pair `(sigma, lambda)` with `sigma_x = sigma_y =
//! sigma` and `rho = 0`. The posterior over the grid is updated exactly with
//! the same mixture likelihood the particle filter uses, and the estimate is
//! the posterior mean of each parameter.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::estimator::{SkillEstimate, SkillEstimator, StepInfo};
use crate::mcse::log_likelihoods;
use crate::noise::{ExecutionSkillParams, ParamRange, SkillRanges};
use crate::value_field::ValueFieldEngine;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JeedsConfig {
    pub sigma_levels: usize,
    pub lambda_levels: usize,
    pub sigma_range: ParamRange,
    pub lambda_range: ParamRange,
    pub sigma_spacing: Spacing,
}

impl Default for JeedsConfig {
    fn default() -> Self {
        let r = SkillRanges::darts();
        Self {
            sigma_levels: 33,
            lambda_levels: 33,
            sigma_range: r.sigma,
            lambda_range: r.lambda,
            sigma_spacing: Spacing::Linear,
        }
    }
}

impl JeedsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_levels < 1 || self.lambda_levels < 1 {
            return Err(Error::Config(
                "hypothesis grid needs at least one level per axis".into(),
            ));
        }
        let r = &self.sigma_range;
        if !(r.lo > 0.0 && r.lo <= r.hi) {
            return Err(Error::Config(format!("invalid sigma range [{}, {}]", r.lo, r.hi)));
        }
        let l = &self.lambda_range;
        if !(l.lo > 0.0 && l.lo <= l.hi) {
            return Err(Error::Config(format!(
                "lambda levels are log-spaced and need 0 < lo <= hi, got [{}, {}]",
                l.lo, l.hi
            )));
        }
        Ok(())
    }

    /// Label such as `jeeds-33x33`.
    pub fn label(&self) -> String {
        format!("jeeds-{}x{}", self.sigma_levels, self.lambda_levels)
    }
}

/// `n` points from `lo` to `hi` inclusive.
pub fn levels(range: ParamRange, n: usize, spacing: Spacing) -> Vec<f64> {
    if n == 1 {
        return vec![match spacing {
            Spacing::Linear => 0.5 * (range.lo + range.hi),
            Spacing::Log => (range.lo * range.hi).sqrt(),
        }];
    }
    let t = |i: usize| i as f64 / (n - 1) as f64;
    (0..n)
        .map(|i| match spacing {
            Spacing::Linear => range.lo + (range.hi - range.lo) * t(i),
            Spacing::Log => (range.lo.ln() + (range.hi.ln() - range.lo.ln()) * t(i)).exp(),
        })
        .map(|v| range.clamp(v))
        .collect()
}

#[derive(Debug, Clone)]
pub struct HypothesisGrid {
    config: JeedsConfig,
    sigma_levels: Vec<f64>,
    lambda_levels: Vec<f64>,
    /// Normalised log posterior, row-major over `(sigma, lambda)`.
    log_beliefs: Vec<f64>,
    label: String,
}

impl HypothesisGrid {
    /// Uniform prior over the grid.
    pub fn new(config: JeedsConfig) -> Result<Self> {
        config.validate()?;
        let sigma_levels = levels(config.sigma_range, config.sigma_levels, config.sigma_spacing);
        let lambda_levels = levels(config.lambda_range, config.lambda_levels, Spacing::Log);
        let n = sigma_levels.len() * lambda_levels.len();
        Ok(Self {
            label: config.label(),
            config,
            sigma_levels,
            lambda_levels,
            log_beliefs: vec![-(n as f64).ln(); n],
        })
    }

    /// Starts from an explicit prior; `prior` is row-major over
    /// `(sigma, lambda)` and need not be normalised.
    pub fn with_prior(config: JeedsConfig, prior: &[f64]) -> Result<Self> {
        let mut g = Self::new(config)?;
        if prior.len() != g.log_beliefs.len() || prior.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter(
                "prior must be finite, non-negative and match the grid".into(),
            ));
        }
        g.log_beliefs = prior.iter().map(|p| p.ln()).collect();
        if !g.normalize() {
            return Err(Error::InvalidParameter("prior has zero mass".into()));
        }
        Ok(g)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn config(&self) -> &JeedsConfig {
        &self.config
    }

    pub fn sigma_levels(&self) -> &[f64] {
        &self.sigma_levels
    }

    pub fn lambda_levels(&self) -> &[f64] {
        &self.lambda_levels
    }

    /// Posterior probabilities, row-major over `(sigma, lambda)`.
    pub fn beliefs(&self) -> Vec<f64> {
        self.log_beliefs.iter().map(|l| l.exp()).collect()
    }

    pub fn belief(&self, sigma_index: usize, lambda_index: usize) -> f64 {
        self.log_beliefs[sigma_index * self.lambda_levels.len() + lambda_index].exp()
    }

    fn reset(&mut self) {
        let n = self.log_beliefs.len() as f64;
        self.log_beliefs.iter_mut().for_each(|l| *l = -n.ln());
    }

    /// Returns false when the total mass is zero or not finite.
    fn normalize(&mut self) -> bool {
        let hi = self.log_beliefs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !hi.is_finite() {
            return false;
        }
        let lse = hi + self.log_beliefs.iter().map(|l| (l - hi).exp()).sum::<f64>().ln();
        self.log_beliefs.iter_mut().for_each(|l| *l -= lse);
        true
    }

    /// Log likelihood of `x` for every hypothesis, row-major.
    pub fn log_likelihood_table(&self, engine: &ValueFieldEngine, x: [f64; 2]) -> Result<Vec<f64>> {
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidObservation(format!(
                "executed action {x:?} is not finite"
            )));
        }
        let params: Vec<ExecutionSkillParams> = self
            .sigma_levels
            .iter()
            .map(|&s| ExecutionSkillParams {
                sigma_x: s,
                sigma_y: s,
                rho: 0.0,
            })
            .collect();
        let rows = engine.map_fields(&params, |_, f| log_likelihoods(f, &self.lambda_levels, x));
        Ok(rows.into_iter().flatten().collect())
    }

    /// Bayes update with the likelihood of one executed action. Returns
    /// false if the posterior collapsed and was reset to uniform.
    pub fn update(&mut self, engine: &ValueFieldEngine, x: [f64; 2]) -> Result<bool> {
        let table = self.log_likelihood_table(engine, x)?;
        for (b, l) in self.log_beliefs.iter_mut().zip(table) {
            *b += l;
        }
        if self.normalize() {
            Ok(true)
        } else {
            warn!("{}: posterior has zero mass, resetting to uniform", self.label);
            self.reset();
            Ok(false)
        }
    }

    /// Marginal posterior means of sigma and lambda.
    pub fn posterior_means(&self) -> (f64, f64) {
        let nl = self.lambda_levels.len();
        let (mut s, mut l) = (0.0, 0.0);
        for (k, lb) in self.log_beliefs.iter().enumerate() {
            let b = lb.exp();
            s += b * self.sigma_levels[k / nl];
            l += b * self.lambda_levels[k % nl];
        }
        (s, l)
    }

    /// Normalised effective number of hypotheses, `1 / sum(b^2) / n`.
    pub fn effective_fraction(&self) -> f64 {
        let sq: f64 = self.log_beliefs.iter().map(|l| (2.0 * l).exp()).sum();
        1.0 / sq / self.log_beliefs.len() as f64
    }
}

impl SkillEstimator for HypothesisGrid {
    fn name(&self) -> &str {
        &self.label
    }

    fn observe(&mut self, engine: &ValueFieldEngine, executed: [f64; 2]) -> Result<StepInfo> {
        let ok = self.update(engine, executed)?;
        Ok(StepInfo {
            neff: self.effective_fraction(),
            resampled: false,
            perturbed: false,
            reinitialized: !ok,
        })
    }

    fn estimate(&self) -> SkillEstimate {
        let (sigma, lambda) = self.posterior_means();
        SkillEstimate {
            sigma_x: sigma,
            sigma_y: sigma,
            rho: 0.0,
            lambda,
        }
    }
}
