//! Drift estimation for scalar SDEs driven by fractional Brownian motion.
//!
//! The crate simulates i.i.d. paths of `dX = theta0 b(X) dt + sigma(X) dB`
//! with `B` an fBm of Hurst index `H` in `(1/3, 1)`, and estimates `theta0`
//! with a computable fixed-point estimator: the unobservable Skorokhod integral
//! in the least-squares estimator is replaced by pathwise quantities plus a
//! correction that depends on `theta0` itself, and the resulting equation is
//! solved by Picard iteration under a data-dependent contraction gate.
//!
//! Module map:
//! * [`fbm`]: exact fBm sampling and covariance functions.
//! * [`model`], [`sde`]: coefficient bundles and the pathwise solver.
//! * [`quadrature`], [`kernels`]: singular product integration and the
//!   Malliavin-derivative kernels.
//! * [`young2d`]: numerical check that Riemann sums against rectangular
//!   increments of the covariance converge to the weighted double integral.
//! * [`estimator`], [`inference`]: the estimator, its gate and confidence
//!   intervals.
//! * [`experiment`], [`io`]: configuration-driven experiment runners.

pub mod error;
pub mod estimator;
pub mod experiment;
pub mod fbm;
pub mod inference;
pub mod io;
pub mod kernels;
pub mod model;
pub mod quadrature;
pub mod sde;
pub mod young2d;

pub use error::{Error, Result};
