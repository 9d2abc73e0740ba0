//! Skill estimation for agents acting in continuous action spaces.
//!
//! An observed agent picks a target action with a softmax decision model and
//! then misses it by a zero-mean bivariate Gaussian perturbation. Given only
//! (state, executed action) pairs, [`mcse::ParticleFilter`] tracks a joint
//! posterior over the noise parameters `(sigma_x, sigma_y, rho)` and the
//! rationality `lambda`, while [`jeeds::HypothesisGrid`] is the grid-Bayes
//! baseline restricted to isotropic noise.
//!
//! The 2D-Darts domain ([`darts`]), simulated agents ([`agents`]), the
//! experiment harness ([`experiment`]) and the pitch-location application
//! ([`baseball`]) are built on top of the same value-field machinery
//! ([`value_field`]).

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod baseball;
pub mod cov;
pub mod darts;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod jeeds;
pub mod mcse;
pub mod metrics;
pub mod noise;
pub mod plot;
pub mod rng;
pub mod trace;
pub mod value_field;

pub use error::{Error, Result};
