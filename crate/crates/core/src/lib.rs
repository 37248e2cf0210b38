//! Adaptive nonparametric Poisson regression by projection estimators.
//!
//! Counts `Y_i` are observed together with covariates `X_i` in `[0, 1]`, and
//! conditionally on the covariates `Y_i ~ Poisson(λ(X_i))`. The crate fits
//! orthogonal-series estimators of the intensity `λ` on nested model spaces
//! (trigonometric or dyadic histogram), selects a dimension by penalized
//! contrast, and ships a Monte Carlo harness for simulation studies.
//!
//! Module map:
//!
//! - [`sampler`]: covariate processes, Poisson draws, test intensities.
//! - [`basis`]: basis families, models and nested model collections.
//! - [`estimator`]: projection estimates, contrast, norms and quadrature.
//! - [`selection`]: penalties, plug-in sup-norm estimate, model selection.
//! - [`bench`]: replicate runner, reports, quantile bands and rate calculus.

pub mod basis;
pub mod bench;
pub mod error;
pub mod estimator;
pub mod sampler;
pub mod selection;

pub use basis::{BasisFamily, Model, ModelCollection};
pub use error::{Error, Result};
pub use estimator::{ProjectionEstimate, Quadrature};
pub use sampler::{CovariateKind, CovariateProcess, Intensity, Sample};
pub use selection::{PenaltySpec, SelectionResult};
