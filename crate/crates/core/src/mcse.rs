//! Particle-filter skill estimator.
//!
//! Each particle is a joint hypothesis `(sigma_x, sigma_y, rho, lambda)`.
//! Observing an executed action multiplies every particle's weight by the
//! probability of that action under the softmax-over-targets mixture; the
//! set is then possibly resampled (a fraction `r` drawn by weight, the rest
//! fresh uniform draws) and finally jittered so it can follow skill that
//! drifts over time. Weights are kept as logarithms: products of raw
//! densities over a hundred observations underflow `f64`.

use log::{trace, warn};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::estimator::{SkillEstimate, SkillEstimator, StepInfo};
use crate::noise::{ExecutionSkillParams, GaussianDensity, SkillRanges};
use crate::rng::{SeedStreams, Stream, FILTER_INIT, FILTER_PERTURB, FILTER_RESAMPLE};
use crate::value_field::{ValueField, ValueFieldEngine};
use crate::{Error, Result};

/// Mixture terms this far (in log units) below the largest one are dropped;
/// their combined relative contribution is below `|A| e^-60`.
const LOG_CUTOFF: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ResampleStrategy {
    Always,
    /// Resample when the effective count falls below `tau`.
    EffThreshold {
        tau: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeffMode {
    /// Sum of raw weights divided by `M`.
    RawSumFraction,
    /// `1 / sum(w_hat^2)` over normalised weights, divided by `M`.
    NormalizedEss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbSchedule {
    EveryStep,
    AfterResample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Particle count.
    pub m: usize,
    /// Fraction of the new set drawn from the old one.
    pub r: f64,
    /// Perturbation std as a fraction of each parameter's range width.
    pub w_pct: f64,
    pub resample: ResampleStrategy,
    pub neff_mode: NeffMode,
    pub ranges: SkillRanges,
    pub lambda_scale: LambdaScale,
    pub perturb: PerturbSchedule,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            m: 1000,
            r: 0.9,
            w_pct: 0.005,
            resample: ResampleStrategy::EffThreshold { tau: 0.5 },
            neff_mode: NeffMode::RawSumFraction,
            ranges: SkillRanges::darts(),
            lambda_scale: LambdaScale::Linear,
            perturb: PerturbSchedule::EveryStep,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m < 2 {
            return bad(format!("particle count must be at least 2, got {}", self.m));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return bad(format!("resample fraction must lie in (0, 1], got {}", self.r));
        }
        if !(self.w_pct >= 0.0 && self.w_pct.is_finite()) {
            return bad(format!("perturbation fraction must be >= 0, got {}", self.w_pct));
        }
        if let ResampleStrategy::EffThreshold { tau } = self.resample {
            if !(tau > 0.0 && tau < 1.0) {
                return bad(format!("n_eff threshold must lie in (0, 1), got {tau}"));
            }
        }
        if self.lambda_scale == LambdaScale::Log && self.ranges.lambda.lo <= 0.0 {
            return bad("log-scale lambda needs a positive lower bound".into());
        }
        self.ranges.validate()
    }

    /// Compact identifier such as `mcse-m1000-r0.9-w0.005-neff0.5`.
    pub fn label(&self) -> String {
        let strategy = match self.resample {
            ResampleStrategy::Always => "always".to_string(),
            ResampleStrategy::EffThreshold { tau } => format!("neff{tau}"),
        };
        format!("mcse-m{}-r{}-w{}-{}", self.m, self.r, self.w_pct, strategy)
    }

    pub fn kept(&self) -> usize {
        ((self.r * self.m as f64) + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
    pub lambda: f64,
    /// Natural log of the weight; `-inf` is weight zero.
    pub log_weight: f64,
    /// Injected as a random particle at the latest resample.
    pub fresh: bool,
}

impl Particle {
    pub fn skill(&self) -> ExecutionSkillParams {
        ExecutionSkillParams {
            sigma_x: self.sigma_x,
            sigma_y: self.sigma_y,
            rho: self.rho,
        }
    }

    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    fn random<R: Rng + ?Sized>(config: &FilterConfig, rng: &mut R) -> Self {
        let g = &config.ranges;
        let skill = g.sample_skill(rng);
        let lambda = match config.lambda_scale {
            LambdaScale::Linear => g.lambda.sample(rng),
            LambdaScale::Log => g.lambda.sample_log(rng),
        };
        Self {
            sigma_x: skill.sigma_x,
            sigma_y: skill.sigma_y,
            rho: skill.rho,
            lambda,
            log_weight: 0.0,
            fresh: false,
        }
    }
}

/// `M` particles drawn uniformly over the configured ranges, weight 1.
pub fn init_particles<R: Rng + ?Sized>(config: &FilterConfig, rng: &mut R) -> Vec<Particle> {
    (0..config.m).map(|_| Particle::random(config, rng)).collect()
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let hi = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY || hi.is_nan() {
        return hi;
    }
    hi + xs.map(|x| (x - hi).exp()).sum::<f64>().ln()
}

/// `ln P(x | sigma, lambda)` for several rationalities sharing one value
/// field: the softmax-weighted mixture over every grid target of the noise
/// density at `x - t`.
pub fn log_likelihoods(field: &ValueField, lambdas: &[f64], x: [f64; 2]) -> Vec<f64> {
    let density = GaussianDensity::new(&field.params);
    let g = &field.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let h = g.resolution;
    let x0 = g.center[0] - g.half_x as f64 * h;
    let y0 = g.center[1] - g.half_y as f64 * h;

    // Half squared Mahalanobis distance from every target to x.
    let mut half_m2 = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let dy = x[1] - (y0 + j as f64 * h);
        for i in 0..nx {
            let dx = x[0] - (x0 + i as f64 * h);
            half_m2.push(0.5 * density.mahalanobis2([dx, dy]));
        }
    }
    let vmax = field.max_value;

    lambdas
        .iter()
        .map(|&lambda| {
            // log of the softmax normaliser, shifted by lambda * vmax.
            let mut z = 0.0;
            for &v in &field.values {
                let s = lambda * (v - vmax);
                if s > -LOG_CUTOFF {
                    z += s.exp();
                }
            }
            // Largest mixture exponent; terms far below it are skipped.
            let mut amax = f64::NEG_INFINITY;
            for (v, m) in field.values.iter().zip(&half_m2) {
                let a = lambda * (v - vmax) - m;
                if a > amax {
                    amax = a;
                }
            }
            let floor = amax - LOG_CUTOFF;
            let mut mix = 0.0;
            for (v, m) in field.values.iter().zip(&half_m2) {
                if -m < floor {
                    continue;
                }
                let a = lambda * (v - vmax) - m;
                if a > floor {
                    mix += (a - amax).exp();
                }
            }
            density.log_norm + amax + mix.ln() - z.ln()
        })
        .collect()
}

/// `ln P(x | sigma, lambda)`; see [`log_likelihoods`].
pub fn log_likelihood(field: &ValueField, lambda: f64, x: [f64; 2]) -> f64 {
    log_likelihoods(field, &[lambda], x)[0]
}

/// The softmax-mixture density of the executed action `x` for a particle
/// on the state behind `engine`.
pub fn likelihood(particle: &Particle, x: [f64; 2], engine: &ValueFieldEngine) -> Result<f64> {
    check_action(x)?;
    let field = engine.field(&particle.skill());
    let p = log_likelihood(&field, particle.lambda, x).exp();
    if p.is_finite() {
        Ok(p)
    } else {
        Err(Error::InvalidObservation(format!("likelihood of {x:?} is not finite")))
    }
}

fn check_action(x: [f64; 2]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidObservation(format!(
            "executed action {x:?} is not finite"
        )))
    }
}

/// Degeneracy measure compared against the resampling threshold.
pub fn effective_count(particles: &[Particle], mode: NeffMode) -> f64 {
    let m = particles.len() as f64;
    let lse = log_sum_exp(particles.iter().map(|p| p.log_weight));
    if lse == f64::NEG_INFINITY || lse.is_nan() {
        return 0.0;
    }
    match mode {
        NeffMode::RawSumFraction => (lse - m.ln()).exp(),
        NeffMode::NormalizedEss => {
            let sq: f64 = particles.iter().map(|p| (2.0 * (p.log_weight - lse)).exp()).sum();
            1.0 / sq / m
        }
    }
}

/// Draws `floor(r M)` particles by weight with replacement and tops up with
/// fresh uniform particles. Every weight of the result is 1.
pub fn resample<R: Rng + ?Sized>(particles: &[Particle], config: &FilterConfig, rng: &mut R) -> Result<Vec<Particle>> {
    let lse = log_sum_exp(particles.iter().map(|p| p.log_weight));
    if !lse.is_finite() {
        return Err(Error::DegenerateFilter("total particle weight is zero".into()));
    }
    let mut cdf = Vec::with_capacity(particles.len());
    let mut acc = 0.0;
    for p in particles {
        acc += (p.log_weight - lse).exp();
        cdf.push(acc);
    }
    let total = acc;
    let last = particles
        .iter()
        .rposition(|p| p.log_weight > f64::NEG_INFINITY)
        .expect("finite total weight implies a positive particle");
    let kept = config.kept().min(config.m);
    let mut out = Vec::with_capacity(config.m);
    for _ in 0..kept {
        let u = rng.random::<f64>() * total;
        let i = cdf.partition_point(|&c| c <= u).min(last);
        out.push(Particle {
            log_weight: 0.0,
            fresh: false,
            ..particles[i]
        });
    }
    while out.len() < config.m {
        let mut p = Particle::random(config, rng);
        p.fresh = true;
        out.push(p);
    }
    Ok(out)
}

/// Independent Gaussian jitter on every parameter, std `w_pct` times the
/// range width, clamped back into range.
pub fn perturb<R: Rng + ?Sized>(particles: &mut [Particle], config: &FilterConfig, rng: &mut R) {
    if config.w_pct == 0.0 {
        return;
    }
    let g = &config.ranges;
    let normal = |width: f64| Normal::new(0.0, config.w_pct * width).expect("finite std");
    let (ns, nr, nl) = (normal(g.sigma.width()), normal(g.rho.width()), normal(g.lambda.width()));
    for p in particles {
        p.sigma_x = g.sigma.clamp(p.sigma_x + ns.sample(rng));
        p.sigma_y = g.sigma.clamp(p.sigma_y + ns.sample(rng));
        p.rho = g.rho.clamp(p.rho + nr.sample(rng));
        p.lambda = g.lambda.clamp(p.lambda + nl.sample(rng));
    }
}

/// Weighted mean over particles that were not injected at the latest
/// resample; falls back to every particle when none of those carries weight.
pub fn estimate(particles: &[Particle]) -> SkillEstimate {
    let eligible = |p: &&Particle| !p.fresh && p.log_weight > f64::NEG_INFINITY;
    let pick: Vec<&Particle> = if particles.iter().any(|p| eligible(&p)) {
        particles.iter().filter(eligible).collect()
    } else {
        particles.iter().collect()
    };
    let hi = pick.iter().map(|p| p.log_weight).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = if hi.is_finite() {
        pick.iter().map(|p| (p.log_weight - hi).exp()).collect()
    } else {
        vec![1.0; pick.len()]
    };
    let total: f64 = w.iter().sum();
    let mean = |f: fn(&Particle) -> f64| pick.iter().zip(&w).map(|(p, w)| w * f(p)).sum::<f64>() / total;
    SkillEstimate {
        sigma_x: mean(|p| p.sigma_x),
        sigma_y: mean(|p| p.sigma_y),
        rho: mean(|p| p.rho),
        lambda: mean(|p| p.lambda),
    }
}

/// Stages of one filter step, recorded in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Weight,
    Reinitialize,
    Resample,
    Perturb,
}

#[derive(Debug, Clone)]
pub struct ParticleFilter {
    config: FilterConfig,
    particles: Vec<Particle>,
    init_rng: Stream,
    resample_rng: Stream,
    perturb_rng: Stream,
    label: String,
    phases: Vec<Phase>,
    steps: usize,
}

impl ParticleFilter {
    pub fn new(config: FilterConfig, streams: &SeedStreams) -> Result<Self> {
        config.validate()?;
        let mut init_rng = streams.stream(FILTER_INIT);
        let particles = init_particles(&config, &mut init_rng);
        Ok(Self::with_particles(config, particles, streams, init_rng))
    }

    /// Starts from an explicit particle set instead of uniform draws.
    pub fn from_particles(config: FilterConfig, particles: Vec<Particle>, streams: &SeedStreams) -> Result<Self> {
        config.validate()?;
        if particles.len() != config.m {
            return Err(Error::Config(format!(
                "expected {} particles, got {}",
                config.m,
                particles.len()
            )));
        }
        Ok(Self::with_particles(
            config,
            particles,
            streams,
            streams.stream(FILTER_INIT),
        ))
    }

    fn with_particles(config: FilterConfig, particles: Vec<Particle>, streams: &SeedStreams, init_rng: Stream) -> Self {
        Self {
            label: config.label(),
            config,
            particles,
            init_rng,
            resample_rng: streams.stream(FILTER_RESAMPLE),
            perturb_rng: streams.stream(FILTER_PERTURB),
            phases: Vec::new(),
            steps: 0,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    /// Stages run by the most recent step, in order.
    pub fn last_phases(&self) -> &[Phase] {
        &self.phases
    }

    /// Multiplies every weight by its likelihood of `x` and clears the fresh
    /// flags.
    pub fn reweight(&mut self, engine: &ValueFieldEngine, x: [f64; 2]) -> Result<()> {
        check_action(x)?;
        let params: Vec<ExecutionSkillParams> = self.particles.iter().map(Particle::skill).collect();
        let lambdas: Vec<f64> = self.particles.iter().map(|p| p.lambda).collect();
        let lls = engine.map_fields(&params, |i, f| log_likelihood(f, lambdas[i], x));
        for (p, ll) in self.particles.iter_mut().zip(lls) {
            p.log_weight += ll;
            p.fresh = false;
        }
        Ok(())
    }

    fn reinitialize(&mut self) {
        self.particles = init_particles(&self.config, &mut self.init_rng);
    }
}

impl SkillEstimator for ParticleFilter {
    fn name(&self) -> &str {
        &self.label
    }

    fn observe(&mut self, engine: &ValueFieldEngine, executed: [f64; 2]) -> Result<StepInfo> {
        self.phases.clear();
        self.reweight(engine, executed)?;
        self.phases.push(Phase::Weight);
        let mut info = StepInfo::default();
        if !self
            .particles
            .iter()
            .any(|p| p.log_weight > f64::NEG_INFINITY && !p.log_weight.is_nan())
        {
            warn!(
                "{}: all particle weights vanished at step {}, reinitializing",
                self.label, self.steps
            );
            self.reinitialize();
            self.phases.push(Phase::Reinitialize);
            info.reinitialized = true;
        }
        info.neff = effective_count(&self.particles, self.config.neff_mode);
        info.resampled = match self.config.resample {
            ResampleStrategy::Always => true,
            ResampleStrategy::EffThreshold { tau } => info.neff < tau,
        };
        if info.resampled {
            self.particles = resample(&self.particles, &self.config, &mut self.resample_rng)?;
            self.phases.push(Phase::Resample);
        }
        if info.resampled || self.config.perturb == PerturbSchedule::EveryStep {
            perturb(&mut self.particles, &self.config, &mut self.perturb_rng);
            self.phases.push(Phase::Perturb);
            info.perturbed = true;
        }
        trace!("{} step {}: {:?}", self.label, self.steps, self.phases);
        self.steps += 1;
        Ok(info)
    }

    fn estimate(&self) -> SkillEstimate {
        estimate(&self.particles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darts::{ActionGrid, RewardGrid};
    use crate::noise::NoiseDensity;
    use proptest::prelude::*;
    use rand::Rng;

    fn particle(sx: f64, sy: f64, rho: f64, lambda: f64) -> Particle {
        Particle {
            sigma_x: sx,
            sigma_y: sy,
            rho,
            lambda,
            log_weight: 0.0,
            fresh: false,
        }
    }

    fn small_engine(seed: u64, half: usize) -> ValueFieldEngine {
        let grid = ActionGrid::new(5.0, [0.0, 0.0], half, half).unwrap();
        let mut rng = SeedStreams::new(seed).stream("r");
        let values = (0..grid.len()).map(|_| rng.random_range(0..20) as f64).collect();
        ValueFieldEngine::new(RewardGrid::new(seed, grid, values).unwrap())
    }

    /// Eq. 2 exactly as written: no shifts, no pruning.
    fn literal(field: &ValueField, lambda: f64, x: [f64; 2]) -> f64 {
        let d = GaussianDensity::new(&field.params);
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &v) in field.values.iter().enumerate() {
            let t = field.grid.cell_center(i);
            let e = (lambda * v).exp();
            num += e * d.pdf([x[0] - t[0], x[1] - t[1]]);
            den += e;
        }
        num / den
    }

    #[test]
    fn likelihood_matches_literal_formula() {
        let mut rng = SeedStreams::new(1).stream("t");
        for seed in 0..30 {
            let e = small_engine(seed, 4);
            let p = particle(
                rng.random_range(3.0..30.0),
                rng.random_range(3.0..30.0),
                rng.random_range(-0.75..0.75),
                rng.random_range(0.001..2.0),
            );
            let x = [rng.random_range(-25.0..25.0), rng.random_range(-25.0..25.0)];
            let got = likelihood(&p, x, &e).unwrap();
            let want = literal(&e.field(&p.skill()), p.lambda, x);
            assert!(((got - want) / want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn zero_lambda_is_uniform_mixture() {
        let e = small_engine(2, 3);
        let p = particle(7.0, 9.0, 0.2, 0.0);
        let x = [3.0, -4.0];
        let d = p.skill().density();
        let g = e.grid();
        let want = g.cells().map(|t| d.pdf([x[0] - t[0], x[1] - t[1]])).sum::<f64>() / g.len() as f64;
        let got = likelihood(&p, x, &e).unwrap();
        assert!(((got - want) / want).abs() < 1e-12);
    }

    #[test]
    fn single_cell_grid_is_plain_density() {
        let grid = ActionGrid::new(5.0, [10.0, -5.0], 0, 0).unwrap();
        let e = ValueFieldEngine::new(RewardGrid::new(0, grid, vec![3.0]).unwrap());
        let p = particle(12.0, 4.0, -0.3, 5.0);
        let x = [13.0, 2.0];
        let want = p.skill().density().pdf([3.0, 7.0]);
        assert!((likelihood(&p, x, &e).unwrap() - want).abs() < 1e-15 * want.max(1e-300));
    }

    #[test]
    fn non_finite_action_is_rejected() {
        let e = small_engine(3, 2);
        let p = particle(5.0, 5.0, 0.0, 1.0);
        assert!(matches!(
            likelihood(&p, [f64::NAN, 0.0], &e),
            Err(Error::InvalidObservation(_))
        ));
    }

    #[test]
    fn far_observations_stay_finite_in_log_space() {
        let e = small_engine(4, 3);
        let field = e.field(&ExecutionSkillParams::isotropic(3.0).unwrap());
        let ll = log_likelihood(&field, 32.0, [5000.0, -5000.0]);
        assert!(ll.is_finite() && ll < -1e5);
    }

    #[test]
    fn init_is_uniform_and_deterministic() {
        let cfg = FilterConfig {
            m: 100_000,
            ..Default::default()
        };
        let streams = SeedStreams::new(8);
        let a = init_particles(&cfg, &mut streams.stream(FILTER_INIT));
        let b = init_particles(&cfg, &mut streams.stream(FILTER_INIT));
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p.log_weight == 0.0 && !p.fresh));
        let mean = a.iter().map(|p| p.sigma_x).sum::<f64>() / a.len() as f64;
        assert!((mean - 76.75).abs() < 1.0, "{mean}");
        let lmean = a.iter().map(|p| p.lambda).sum::<f64>() / a.len() as f64;
        assert!((lmean - 16.0005).abs() < 0.3);
        let r = SkillRanges::darts();
        assert!(a
            .iter()
            .all(|p| r.sigma.contains(p.sigma_x) && r.rho.contains(p.rho) && r.lambda.contains(p.lambda)));
    }

    #[test]
    fn effective_count_modes() {
        let mut ps = vec![particle(5.0, 5.0, 0.0, 1.0); 100];
        assert_eq!(effective_count(&ps, NeffMode::RawSumFraction), 1.0);
        assert!((effective_count(&ps, NeffMode::NormalizedEss) - 1.0).abs() < 1e-12);
        for p in ps.iter_mut().skip(1) {
            p.log_weight = f64::NEG_INFINITY;
        }
        assert!((effective_count(&ps, NeffMode::RawSumFraction) - 0.01).abs() < 1e-15);
        assert!((effective_count(&ps, NeffMode::NormalizedEss) - 0.01).abs() < 1e-15);
        let half = vec![
            Particle {
                log_weight: 0.5f64.ln(),
                ..particle(5.0, 5.0, 0.0, 1.0)
            };
            1000
        ];
        assert!((effective_count(&half, NeffMode::RawSumFraction) - 0.5).abs() < 1e-12);
        assert!((effective_count(&half, NeffMode::NormalizedEss) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resample_splits_kept_and_fresh() {
        let cfg = FilterConfig::default();
        let mut rng = SeedStreams::new(1).stream("t");
        let mut ps = init_particles(&cfg, &mut rng);
        for (i, p) in ps.iter_mut().enumerate() {
            p.log_weight = if i == 17 { -3.0 } else { f64::NEG_INFINITY };
        }
        let out = resample(&ps, &cfg, &mut rng).unwrap();
        assert_eq!(out.len(), 1000);
        assert_eq!(out.iter().filter(|p| !p.fresh).count(), 900);
        assert!(out.iter().all(|p| p.log_weight == 0.0));
        for p in out.iter().filter(|p| !p.fresh) {
            assert_eq!(p.skill(), ps[17].skill());
            assert_eq!(p.lambda, ps[17].lambda);
        }
    }

    #[test]
    fn resample_rejects_zero_weight() {
        let cfg = FilterConfig {
            m: 4,
            ..Default::default()
        };
        let ps = vec![
            Particle {
                log_weight: f64::NEG_INFINITY,
                ..particle(5.0, 5.0, 0.0, 1.0)
            };
            4
        ];
        let mut rng = SeedStreams::new(1).stream("t");
        assert!(matches!(resample(&ps, &cfg, &mut rng), Err(Error::DegenerateFilter(_))));
    }

    #[test]
    fn equal_weight_resampling_is_uniform() {
        let cfg = FilterConfig {
            m: 20,
            r: 1.0,
            ..Default::default()
        };
        let ps: Vec<Particle> = (0..20).map(|i| particle(3.0 + i as f64, 5.0, 0.0, 1.0)).collect();
        let mut rng = SeedStreams::new(2).stream("t");
        let mut counts = [0usize; 20];
        let trials = 10_000;
        for _ in 0..trials {
            for p in resample(&ps, &cfg, &mut rng).unwrap() {
                counts[(p.sigma_x - 3.0).round() as usize] += 1;
            }
        }
        let e = (trials * 20) as f64 / 20.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 19 degrees of freedom, 0.999 quantile is about 43.8.
        assert!(chi2 < 43.8, "chi2 = {chi2}");
    }

    #[test]
    fn perturbation_scale_and_clamping() {
        let cfg = FilterConfig::default();
        let mut rng = SeedStreams::new(3).stream("t");
        let mut ps = vec![particle(76.0, 76.0, 0.0, 16.0); 50_000];
        perturb(&mut ps, &cfg, &mut rng);
        let n = ps.len() as f64;
        let m = ps.iter().map(|p| p.sigma_x).sum::<f64>() / n;
        let sd = (ps.iter().map(|p| (p.sigma_x - m).powi(2)).sum::<f64>() / n).sqrt();
        assert!((sd - 0.7375).abs() < 0.01, "{sd}");

        let mut edge = vec![particle(3.0, 150.5, 0.75, 0.001); 1000];
        perturb(&mut edge, &cfg, &mut rng);
        let r = SkillRanges::darts();
        assert!(edge.iter().all(|p| r.sigma.contains(p.sigma_x)
            && r.sigma.contains(p.sigma_y)
            && r.rho.contains(p.rho)
            && r.lambda.contains(p.lambda)));

        let still = FilterConfig { w_pct: 0.0, ..cfg };
        let before = vec![particle(50.0, 60.0, 0.1, 2.0); 10];
        let mut after = before.clone();
        perturb(&mut after, &still, &mut rng);
        assert_eq!(before, after);
    }

    #[test]
    fn estimate_examples() {
        let single = [particle(12.0, 34.0, 0.5, 3.0)];
        let e = estimate(&single);
        assert_eq!((e.sigma_x, e.sigma_y, e.rho, e.lambda), (12.0, 34.0, 0.5, 3.0));

        let two = [
            particle(10.0, 10.0, 0.0, 1.0),
            Particle {
                log_weight: 3f64.ln(),
                ..particle(50.0, 10.0, 0.0, 1.0)
            },
        ];
        assert!((estimate(&two).sigma_x - 40.0).abs() < 1e-12);

        let with_fresh = [
            particle(10.0, 10.0, 0.0, 1.0),
            Particle {
                fresh: true,
                ..particle(150.0, 150.0, 0.0, 30.0)
            },
        ];
        assert_eq!(estimate(&with_fresh).sigma_x, 10.0);

        let dead = [
            Particle {
                log_weight: f64::NEG_INFINITY,
                ..particle(10.0, 10.0, 0.0, 1.0)
            },
            Particle {
                fresh: true,
                ..particle(30.0, 10.0, 0.0, 1.0)
            },
        ];
        assert_eq!(estimate(&dead).sigma_x, 30.0);
    }

    #[test]
    fn identical_particles_keep_identical_weights() {
        let e = small_engine(5, 4);
        let cfg = FilterConfig {
            m: 6,
            resample: ResampleStrategy::EffThreshold { tau: 1e-300 },
            ..Default::default()
        };
        let streams = SeedStreams::new(1);
        let mut f = ParticleFilter::from_particles(cfg, vec![particle(8.0, 9.0, 0.1, 2.0); 6], &streams).unwrap();
        f.reweight(&e, [1.0, 2.0]).unwrap();
        // Paired transforms put particles in different FFT lanes, so equality
        // holds to round-off only.
        let w0 = f.particles()[0].log_weight;
        assert!(f
            .particles()
            .iter()
            .all(|p| (p.log_weight - w0).abs() < 1e-12 * w0.abs()));
    }

    #[test]
    fn step_order_is_weight_resample_perturb() {
        let e = small_engine(6, 4);
        let streams = SeedStreams::new(2);
        let cfg = FilterConfig {
            m: 30,
            ..Default::default()
        };
        let mut f = ParticleFilter::new(cfg, &streams).unwrap();
        let info = f.observe(&e, [2.0, -3.0]).unwrap();
        assert!(info.resampled && info.perturbed);
        assert_eq!(f.last_phases(), &[Phase::Weight, Phase::Resample, Phase::Perturb]);
        assert!(f.particles().iter().all(|p| p.log_weight == 0.0));
        assert_eq!(f.particles().iter().filter(|p| p.fresh).count(), 3);

        let lazy = FilterConfig {
            resample: ResampleStrategy::EffThreshold { tau: 1e-300 },
            perturb: PerturbSchedule::AfterResample,
            ..cfg
        };
        let mut g = ParticleFilter::new(lazy, &streams).unwrap();
        let info = g.observe(&e, [2.0, -3.0]).unwrap();
        assert!(!info.resampled && !info.perturbed);
        assert_eq!(g.last_phases(), &[Phase::Weight]);
    }

    #[test]
    fn runs_are_bit_identical() {
        let e = small_engine(7, 6);
        let cfg = FilterConfig {
            m: 50,
            ..Default::default()
        };
        let run = || {
            let mut f = ParticleFilter::new(cfg, &SeedStreams::new(9)).unwrap();
            let mut out = Vec::new();
            for k in 0..5 {
                f.observe(&e, [k as f64, -(k as f64)]).unwrap();
                out.push(f.estimate());
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn config_validation_and_label() {
        assert!(FilterConfig::default().validate().is_ok());
        assert!(FilterConfig {
            m: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(FilterConfig {
            r: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(FilterConfig {
            resample: ResampleStrategy::EffThreshold { tau: 1.0 },
            ..Default::default()
        }
        .validate()
        .is_err());
        assert_eq!(FilterConfig::default().label(), "mcse-m1000-r0.9-w0.005-neff0.5");
        assert_eq!(FilterConfig::default().kept(), 900);
        let json = serde_json::to_string(&FilterConfig::default()).unwrap();
        assert_eq!(
            serde_json::from_str::<FilterConfig>(&json).unwrap(),
            FilterConfig::default()
        );
        let partial: FilterConfig = serde_json::from_str(r#"{"m": 50}"#).unwrap();
        assert_eq!(partial.m, 50);
        assert_eq!(partial.r, 0.9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn parameters_stay_in_range(seed in 0u64..1000, w in 0.0f64..0.2) {
            let e = small_engine(seed, 5);
            let cfg = FilterConfig { m: 40, w_pct: w, resample: ResampleStrategy::Always, ..Default::default() };
            let mut f = ParticleFilter::new(cfg, &SeedStreams::new(seed)).unwrap();
            let mut rng = SeedStreams::new(seed).stream("x");
            let r = cfg.ranges;
            for _ in 0..4 {
                let x = [rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0)];
                f.observe(&e, x).unwrap();
                for p in f.particles() {
                    prop_assert!(r.sigma.contains(p.sigma_x) && r.sigma.contains(p.sigma_y));
                    prop_assert!(r.rho.contains(p.rho) && r.lambda.contains(p.lambda));
                    prop_assert_eq!(p.log_weight, 0.0);
                }
                let est = f.estimate();
                prop_assert!(r.sigma.contains(est.sigma_x) && r.rho.contains(est.rho) && r.lambda.contains(est.lambda));
            }
        }
    }
}
