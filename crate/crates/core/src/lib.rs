//! Minimax separation rates for convex hypotheses in the Gaussian sequence
//! model `X = mu + eps / sqrt(n)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: sampling, the `ln(1/x)` shorthand, concentration thresholds.
//! * [`geometry`]: convex bodies with projection and distance oracles,
//!   Dykstra projection for intersections, and a local rounding certifier.
//! * [`testkit`]: the half-space, plug-in, rounded and ball tests together
//!   with the separation radius each one is guaranteed to detect.
//! * [`lowerbounds`]: divergence identities, moment-matching priors, the
//!   closed-form indistinguishability radii and a Bayes-error estimator.
//! * [`ratelab`]: Monte Carlo error estimation, bisection for the empirical
//!   separation radius, sweeps and log-log fits.
//!
//! Monte Carlo loops run on rayon when the `parallel` feature is enabled.
//! Every replicate draws from its own ChaCha stream, so results are
//! bit-identical for any thread count.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod geometry;
pub mod lowerbounds;
pub mod model;
pub mod quad;
pub mod ratelab;
pub mod testkit;
pub mod validation;

pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::ConvexBody;
pub use model::{ModelParams, Point, Seed};
pub use testkit::{Levels, TestKind, TestOutcome};
