//! Multifractional Brownian motion with a time-varying Hurst exponent, three
//! exact-in-law path simulators, and Monte Carlo checks of the convergence rate
//! of Riemann sums of convex payoffs towards their pathwise integral.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod drivers;
pub mod error;
pub mod experiments;
pub mod format;
pub mod hurst;
pub mod numerics;
pub mod payoff;
pub mod theory;

pub use drivers::{GaussianPathSampler, SamplePath, SimulatorKind};
pub use error::{Error, Result};
pub use experiments::{run_convergence, ExperimentConfig, RateReport};
pub use hurst::HurstFunction;
pub use payoff::ConvexPayoff;
