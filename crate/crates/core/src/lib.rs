//! Kernel relative-risk estimation for censored survival data.
//!
//! The estimator minimizes the negative log-partial likelihood of a
//! proportional-hazards model plus a centred squared RKHS-norm penalty. By a
//! representer argument the minimizer is a finite combination of centred
//! kernel sections at a basis subset of the training points, which turns the
//! problem into a strongly convex optimization over `R^{A_n}` solved by BFGS.
//!
//! On top of the kernel estimator the crate provides:
//!
//! - partial-likelihood cross-validation of the regularization parameter with
//!   warm-started grid search,
//! - convex aggregation of the kernel estimator with centred external risk
//!   models, weights chosen on the validation sample,
//! - Breslow survival curves, Harrell-style concordance and Monte Carlo `L₂`
//!   error against a known truth,
//! - simulation of censored data with a known relative risk function.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the
//! replication study driver and the command-line interface live in the
//! companion `care-std` package.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod kernels;
pub mod linalg;
pub mod model_selection;
pub mod optimizer;
pub mod partial_likelihood;
pub mod rng;
pub mod simulation;
pub mod survival_data;

pub use error::{Error, Result};
pub use estimators::{
    center_external, fit_feature_map_estimator, fit_kernel_estimator, CenteredExternal, ExternalPredictor,
    FeatureMapEstimator, FitDiagnostics, KernelEstimator, KernelFitter, SampleRole,
};
pub use evaluation::{
    breslow_survival, concordance_index, concordance_index_reference, l2_error_mc, CovariateSampler, StepSurvival,
    UniformCube,
};
pub use kernels::{constant_norm_squared, eval_kernel, gram_matrix, kappa_matrix, GramMatrix, Kernel, KernelConfig};
pub use model_selection::{
    cross_validate_gamma, fit_care, predict_care, theta_grid, validation_loss, CareEstimator, CareFit, CvReport,
    GammaGrid, GammaSelection, ThetaGrid,
};
pub use optimizer::{minimize_bfgs, OptimOptions, OptimResult};
pub use partial_likelihood::{
    build_representer_basis, neg_log_partial_likelihood, penalized_gradient, penalized_objective, RepresenterContext,
};
pub use simulation::{external_predictor, simulate_dataset, true_f0, DgpConfig, DgpVariant, SimulationTruth};
pub use survival_data::{split_train_validation, SurvivalDataset, SurvivalRecord};
