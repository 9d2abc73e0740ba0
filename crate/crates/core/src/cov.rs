//! Symmetric 2x2 matrices, the only linear algebra the estimators need.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cov2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

/// Eigen-decomposition of a [`Cov2`]: `major >= minor`, `angle` is the
/// direction of the major eigenvector in radians, measured from +x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen2 {
    pub major: f64,
    pub minor: f64,
    pub angle: f64,
}

impl Cov2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub const fn diag(xx: f64, yy: f64) -> Self {
        Self { xx, xy: 0.0, yy }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn is_spd(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite() && self.xx > 0.0 && self.det() > 0.0
    }

    pub fn check_spd(&self) -> Result<()> {
        if self.is_spd() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "covariance {self:?} is not symmetric positive definite"
            )))
        }
    }

    pub fn inverse(&self) -> Result<Cov2> {
        self.check_spd()?;
        let d = self.det();
        Ok(Cov2::new(self.yy / d, -self.xy / d, self.xx / d))
    }

    /// Matrix product trace `tr(self * other)` for symmetric operands.
    pub fn trace_product(&self, other: &Cov2) -> f64 {
        self.xx * other.xx + 2.0 * self.xy * other.xy + self.yy * other.yy
    }

    /// Quadratic form `v^T self v`.
    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.xx * v[0] * v[0] + 2.0 * self.xy * v[0] * v[1] + self.yy * v[1] * v[1]
    }

    pub fn scale(&self, c: f64) -> Cov2 {
        Cov2::new(self.xx * c, self.xy * c, self.yy * c)
    }

    /// Lower Cholesky factor `[[l11, 0], [l21, l22]]`.
    pub fn cholesky(&self) -> Result<[[f64; 2]; 2]> {
        self.check_spd()?;
        let l11 = self.xx.sqrt();
        let l21 = self.xy / l11;
        let l22 = (self.yy - l21 * l21).sqrt();
        Ok([[l11, 0.0], [l21, l22]])
    }

    /// `R self R^T` for the rotation by `theta` radians.
    pub fn rotate(&self, theta: f64) -> Cov2 {
        let (s, c) = theta.sin_cos();
        let xx = c * c * self.xx - 2.0 * c * s * self.xy + s * s * self.yy;
        let yy = s * s * self.xx + 2.0 * c * s * self.xy + c * c * self.yy;
        let xy = c * s * (self.xx - self.yy) + (c * c - s * s) * self.xy;
        Cov2::new(xx, xy, yy)
    }

    pub fn eigen(&self) -> Eigen2 {
        let half_tr = 0.5 * self.trace();
        let disc = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        let major = half_tr + disc;
        let minor = (half_tr - disc).max(0.0);
        let angle = 0.5 * (2.0 * self.xy).atan2(self.xx - self.yy);
        Eigen2 { major, minor, angle }
    }
}
