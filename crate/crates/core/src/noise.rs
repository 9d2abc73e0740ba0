//! Zero-mean bivariate Gaussian execution noise.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cov::Cov2;
use crate::darts::ActionGrid;
use crate::{Error, Result};

/// Kernels are truncated at this many marginal standard deviations.
pub const KERNEL_TRUNCATION_SIGMAS: f64 = 5.0;
/// Sub-samples per axis when a cell is wider than the noise.
pub const KERNEL_SUBSAMPLES: usize = 5;

/// Execution skill `(sigma_x, sigma_y, rho)`, in the units of the action space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionSkillParams {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
}

impl ExecutionSkillParams {
    pub fn new(sigma_x: f64, sigma_y: f64, rho: f64) -> Result<Self> {
        let p = Self { sigma_x, sigma_y, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn isotropic(sigma: f64) -> Result<Self> {
        Self::new(sigma, sigma, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_x > 0.0
            && self.sigma_y > 0.0
            && self.sigma_x.is_finite()
            && self.sigma_y.is_finite()
            && self.rho.abs() < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "execution skill needs sigma > 0 and |rho| < 1, got {self:?}"
            )))
        }
    }

    pub fn covariance(&self) -> Cov2 {
        let off = self.sigma_x * self.sigma_y * self.rho;
        Cov2::new(self.sigma_x * self.sigma_x, off, self.sigma_y * self.sigma_y)
    }

    pub fn density(&self) -> GaussianDensity {
        GaussianDensity::new(self)
    }

    pub fn pdf(&self, offset: [f64; 2]) -> f64 {
        self.density().pdf(offset)
    }

    /// Maps a pair of independent standard normals through the Cholesky
    /// factor of the covariance.
    pub fn perturbation_from_normals(&self, z: [f64; 2]) -> [f64; 2] {
        let s = (1.0 - self.rho * self.rho).sqrt();
        [self.sigma_x * z[0], self.sigma_y * (self.rho * z[0] + s * z[1])]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        self.perturbation_from_normals(standard_normal_pair(rng))
    }

    /// Componentwise linear interpolation, `t` in `[0, 1]`.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        let l = |a: f64, b: f64| a + (b - a) * t;
        Self {
            sigma_x: l(self.sigma_x, other.sigma_x),
            sigma_y: l(self.sigma_y, other.sigma_y),
            rho: l(self.rho, other.rho),
        }
    }
}

/// Validating constructor for the covariance matrix.
pub fn covariance(params: &ExecutionSkillParams) -> Result<Cov2> {
    params.validate()?;
    Ok(params.covariance())
}

pub fn standard_normal_pair<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    [rng.sample(StandardNormal), rng.sample(StandardNormal)]
}

/// A density over execution offsets `x - t`.
pub trait NoiseDensity {
    fn log_pdf(&self, offset: [f64; 2]) -> f64;

    fn pdf(&self, offset: [f64; 2]) -> f64 {
        self.log_pdf(offset).exp()
    }
}

/// Precomputed inverse covariance and normaliser of a bivariate normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDensity {
    /// Inverse covariance `[[a, b], [b, c]]`.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub log_norm: f64,
}

impl GaussianDensity {
    pub fn new(p: &ExecutionSkillParams) -> Self {
        let one_m = 1.0 - p.rho * p.rho;
        let sx2 = p.sigma_x * p.sigma_x;
        let sy2 = p.sigma_y * p.sigma_y;
        Self {
            a: 1.0 / (sx2 * one_m),
            b: -p.rho / (p.sigma_x * p.sigma_y * one_m),
            c: 1.0 / (sy2 * one_m),
            log_norm: -(2.0 * PI * p.sigma_x * p.sigma_y * one_m.sqrt()).ln(),
        }
    }

    /// Squared Mahalanobis distance of an offset.
    #[inline]
    pub fn mahalanobis2(&self, d: [f64; 2]) -> f64 {
        self.a * d[0] * d[0] + 2.0 * self.b * d[0] * d[1] + self.c * d[1] * d[1]
    }
}

impl NoiseDensity for GaussianDensity {
    #[inline]
    fn log_pdf(&self, offset: [f64; 2]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis2(offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

impl ParamRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.lo + self.width() * rng.random::<f64>()
    }

    pub fn sample_log<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (l, h) = (self.lo.ln(), self.hi.ln());
        (l + (h - l) * rng.random::<f64>()).exp().clamp(self.lo, self.hi)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.lo < self.hi && self.lo.is_finite() && self.hi.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{name} range must satisfy lo < hi, got [{}, {}]",
                self.lo, self.hi
            )))
        }
    }
}

/// Admissible ranges for every skill parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillRanges {
    pub sigma: ParamRange,
    pub rho: ParamRange,
    pub lambda: ParamRange,
}

impl Default for SkillRanges {
    fn default() -> Self {
        Self::darts()
    }
}

impl SkillRanges {
    /// Ranges used for 2D-Darts, sigma in mm.
    pub const fn darts() -> Self {
        Self {
            sigma: ParamRange::new(3.0, 150.5),
            rho: ParamRange::new(-0.75, 0.75),
            lambda: ParamRange::new(0.001, 32.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sigma.validate("sigma")?;
        self.rho.validate("rho")?;
        self.lambda.validate("lambda")?;
        if self.sigma.lo <= 0.0 {
            return Err(Error::InvalidParameter("sigma range must be positive".into()));
        }
        if self.rho.lo <= -1.0 || self.rho.hi >= 1.0 {
            return Err(Error::InvalidParameter("rho range must lie inside (-1, 1)".into()));
        }
        if self.lambda.lo < 0.0 {
            return Err(Error::InvalidParameter("lambda range must be non-negative".into()));
        }
        Ok(())
    }

    pub fn sample_skill<R: Rng + ?Sized>(&self, rng: &mut R) -> ExecutionSkillParams {
        ExecutionSkillParams {
            sigma_x: self.sigma.sample(rng),
            sigma_y: self.sigma.sample(rng),
            rho: self.rho.sample(rng),
        }
    }
}

/// Noise density discretised onto grid offsets, normalised to unit mass.
/// `weights` is row-major over offsets `dy in -half_y..=half_y`,
/// `dx in -half_x..=half_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub resolution: f64,
    pub half_x: usize,
    pub half_y: usize,
    pub weights: Vec<f64>,
}

impl Kernel {
    pub fn width(&self) -> usize {
        2 * self.half_x + 1
    }

    pub fn height(&self) -> usize {
        2 * self.half_y + 1
    }

    pub fn get(&self, dx: isize, dy: isize) -> f64 {
        let (hx, hy) = (self.half_x as isize, self.half_y as isize);
        if dx.abs() > hx || dy.abs() > hy {
            return 0.0;
        }
        self.weights[((dy + hy) * (2 * hx + 1) + dx + hx) as usize]
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted mean offset in action units.
    pub fn centroid(&self) -> [f64; 2] {
        let (mut mx, mut my) = (0.0, 0.0);
        for (k, w) in self.weights.iter().enumerate() {
            let dx = (k % self.width()) as f64 - self.half_x as f64;
            let dy = (k / self.width()) as f64 - self.half_y as f64;
            mx += w * dx;
            my += w * dy;
        }
        [mx * self.resolution, my * self.resolution]
    }
}

/// Samples the noise density at grid offsets. Support is the smaller of the
/// grid span and +/-5 marginal sigmas per axis; cells wider than the noise
/// are integrated on a 5x5 sub-grid to avoid aliasing a near-delta kernel.
pub fn discretized_kernel(params: &ExecutionSkillParams, grid: &ActionGrid) -> Kernel {
    let h = grid.resolution;
    let half = |sigma: f64, n: usize| {
        let k = (KERNEL_TRUNCATION_SIGMAS * sigma / h).ceil() as usize;
        k.min(n - 1)
    };
    let half_x = half(params.sigma_x, grid.nx());
    let half_y = half(params.sigma_y, grid.ny());
    let density = params.density();
    let width = 2 * half_x + 1;
    let mut weights = vec![0.0; width * (2 * half_y + 1)];

    if h > params.sigma_x.min(params.sigma_y) {
        log::debug!("resolution {h} exceeds noise {params:?}; using sub-grid kernel");
        let n = KERNEL_SUBSAMPLES;
        let sub: Vec<f64> = (0..n).map(|s| ((s as f64 + 0.5) / n as f64 - 0.5) * h).collect();
        for (k, w) in weights.iter_mut().enumerate() {
            let dx = ((k % width) as f64 - half_x as f64) * h;
            let dy = ((k / width) as f64 - half_y as f64) * h;
            let mut acc = 0.0;
            for &sy in &sub {
                for &sx in &sub {
                    acc += density.pdf([dx + sx, dy + sy]);
                }
            }
            *w = acc / (n * n) as f64;
        }
    } else {
        // Along a row the exponent is quadratic in dx, so consecutive values
        // differ by a ratio that itself changes by a constant factor.
        let hh = h * h;
        let curvature = (-density.a * hh).exp();
        let dx0 = -(half_x as f64) * h;
        for (j, row) in weights.chunks_mut(width).enumerate() {
            let dy = (j as f64 - half_y as f64) * h;
            let start = density.log_pdf([dx0, dy]);
            if start < -700.0 {
                for (i, w) in row.iter_mut().enumerate() {
                    *w = density.pdf([dx0 + i as f64 * h, dy]);
                }
                continue;
            }
            let mut v = start.exp();
            let mut ratio = (-0.5 * (density.a * (2.0 * dx0 * h + hh) + 2.0 * density.b * h * dy)).exp();
            for w in row.iter_mut() {
                *w = v;
                v *= ratio;
                ratio *= curvature;
            }
        }
    }

    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Kernel {
        resolution: h,
        half_x,
        half_y,
        weights,
    }
}
