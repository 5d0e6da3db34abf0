//! Full-information maximum likelihood estimation.

pub mod fit;
pub mod inference;
pub mod init;
pub mod layout;
pub mod likelihood;
pub mod optimize;

pub use fit::{
    diagnose_improper, fit_baseline, fit_full, fit_model, fit_model_from, fit_reduced, free_covariance,
    standard_errors, FitOptions, FitResult, ParamEstimate,
};
pub use inference::{diagnose_covariance, information_criteria, wald_ci, ImproperFlag};
pub use init::initial_values;
pub use layout::{FittedParams, ModelKind, OriginalSpace};
pub use likelihood::{loglik_individual, loglik_total, mvn_log_density, FimlObjective};
