//! Divergences between bivariate normals and spread summaries.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cov::Cov2;
use crate::estimator::SkillEstimate;
use crate::noise::{standard_normal_pair, ExecutionSkillParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian2 {
    pub mean: [f64; 2],
    pub cov: Cov2,
}

impl Gaussian2 {
    pub fn new(mean: [f64; 2], cov: Cov2) -> Self {
        Self { mean, cov }
    }

    pub fn centered(cov: Cov2) -> Self {
        Self::new([0.0, 0.0], cov)
    }
}

/// `KL(P || Q)` in nats.
pub fn kl_bivariate(p: &Gaussian2, q: &Gaussian2) -> Result<f64> {
    p.cov.check_spd()?;
    let q_inv = q.cov.inverse()?;
    let d = [q.mean[0] - p.mean[0], q.mean[1] - p.mean[1]];
    let kl = 0.5 * (q_inv.trace_product(&p.cov) + q_inv.quad(d) - 2.0 + (q.cov.det() / p.cov.det()).ln());
    // Exact zero can come out as -1e-17.
    Ok(kl.max(0.0))
}

/// Symmetrised KL: `KL(P || Q) + KL(Q || P)`.
pub fn jeffreys(p: &Gaussian2, q: &Gaussian2) -> Result<f64> {
    Ok(kl_bivariate(p, q)? + kl_bivariate(q, p)?)
}

/// Jeffreys divergence between the true noise and an estimate, both read as
/// zero-mean Gaussians.
pub fn skill_jd(truth: &ExecutionSkillParams, estimate: &SkillEstimate) -> Result<f64> {
    jeffreys(
        &Gaussian2::centered(truth.covariance()),
        &Gaussian2::centered(estimate.covariance()),
    )
}

/// Determinant of a covariance matrix.
pub fn generalized_variance(cov: &Cov2) -> f64 {
    cov.det()
}

/// Axis-aligned rectangle, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Rect {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.x_lo..=self.x_hi).contains(&p[0]) && (self.y_lo..=self.y_hi).contains(&p[1])
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi)]
    }

    pub fn area(&self) -> f64 {
        (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)
    }
}

/// Monte Carlo probability with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneProbability {
    pub probability: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Fraction of `aim + N(0, cov)` draws landing in `zone`.
pub fn strike_zone_probability<R: Rng + ?Sized>(
    cov: &Cov2,
    aim: [f64; 2],
    zone: &Rect,
    n_samples: usize,
    rng: &mut R,
) -> Result<ZoneProbability> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let l = cov.cholesky()?;
    let mut hits = 0usize;
    for _ in 0..n_samples {
        let z = standard_normal_pair(rng);
        let p = [aim[0] + l[0][0] * z[0], aim[1] + l[1][0] * z[0] + l[1][1] * z[1]];
        if zone.contains(p) {
            hits += 1;
        }
    }
    let p = hits as f64 / n_samples as f64;
    Ok(ZoneProbability {
        probability: p,
        std_error: (p * (1.0 - p) / n_samples as f64).sqrt(),
        samples: n_samples,
    })
}
