//! Linear-linear piecewise latent growth models with an unknown knot.
//!
//! The crate covers the model and its reparameterization, maximum
//! likelihood estimation, data generation for simulation studies, and a
//! Monte Carlo harness. A thin command-line front end lives in [`cli`].

pub mod cli;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod model;
pub mod reparam;
pub mod simgen;

pub use error::{LgmError, Result};
pub use estimation::{FitOptions, FitResult, ModelKind};
pub use model::{LikelihoodMode, LongitudinalDataset, OriginalParams, ReducedParams, ReparamParams};
