//! Distributional causal inference laboratory.
//!
//! Estimates conditional interventional outcome distributions with a
//! stratified, cell-normalized adversarial objective whose population value
//! is the extended Wasserstein distance to the identifiable causal target.
//! Ships with the benchmark data-generating processes, a residual plug-in
//! baseline, objective ablations, and the full distributional metric suite.

pub mod autodiff;
pub mod error;
pub mod numeric;
pub mod dgp;
pub mod baselines;
pub mod estimator;
pub mod eval;
pub mod exp;
pub mod partition;
pub mod transport;

pub use error::{GaniceError, Result};
