//! Simulation and rate-function toolkit for planar last passage percolation.
//!
//! The crate is organized around a handful of engines:
//!
//! - [`geometry`]: rotated space-time coordinates, the directed partial order,
//!   cones and piecewise-linear directed paths.
//! - [`weights`]: weight distributions, reproducible lattice sampling, log
//!   moment generating functions and the Cramér rate function.
//! - [`passage`]: dynamic-programming passage times, geodesics, exact
//!   small-lattice tail oracles, Poisson last passage and polymer free energy.
//! - [`metrics`]: planted network metrics, metric-axiom checkers and the
//!   hypograph Hausdorff distance.
//! - [`rates`]: the shape function F, the point-to-point rate J and the
//!   path/network rate functionals built from them.
//! - [`geodesic_rate`]: the convex variational problem for the rate of a
//!   prescribed geodesic path, and the midpoint corner rate.
//! - [`mc`]: Monte Carlo tail estimation (naive and exponentially tilted),
//!   slope fitting and the headline experiments.
//! - [`cli`]: the batch front end used by the `lppsim` binary.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod geometry;
pub mod geodesic_rate;
pub mod mc;
pub mod metrics;
pub mod passage;
pub mod rates;
pub mod weights;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside an operation's stated domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A requested computation exceeds the configured capacity.
    #[error("capacity error: estimated cost {cost} exceeds limit {limit}")]
    Capacity { cost: u128, limit: u128 },
    /// A configuration file or flag set failed validation.
    #[error("config error: {0}")]
    Config(String),
    /// Two grid functions do not share a box/resolution.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    /// Log-MGF evaluated at or above the distribution's abscissa.
    #[error("log-MGF diverges at theta = {0}")]
    MgfDivergence(f64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
