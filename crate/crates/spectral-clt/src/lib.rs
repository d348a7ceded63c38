//! Central-limit machinery for linear spectral statistics (LSS) of
//! high-dimensional sample covariance and Fisher matrices.
//!
//! The crate provides:
//!
//! - [`mp`]: generalized Marčenko–Pastur laws for discrete population
//!   spectra — companion Stieltjes transform solver, support, density and
//!   linear functionals F^{y,H}(g);
//! - [`clt`]: the limiting-Gaussian mean and covariance functionals of LSS
//!   CLTs, as unit-circle forms (identity population), rectangle-contour
//!   forms (general H) and two-sample Fisher forms;
//! - [`estimators`]: the three covariance estimators, symmetric eigenvalues,
//!   Fisher spectra and LSS evaluation;
//! - [`testing`]: the corrected likelihood-ratio tests for Σ = I and
//!   Σ_x = Σ_y, centered by the substitution principle (adjusted sample
//!   sizes N = n−1, M = m−1);
//! - [`montecarlo`]: reproducible simulation experiments and the appendix
//!   counterexamples.

pub mod clt;
pub mod estimators;
pub mod funcs;
pub mod montecarlo;
pub mod mp;
mod quad;
pub mod testing;

pub use funcs::{BuiltinFn, FisherLrtFn, SpectralFn};
pub use quad::{mean_variance, pairwise_sum};
