use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("coordinate {value} lies outside [0, 1]")]
    OutsideUnitInterval { value: f64 },

    #[error("invalid kernel configuration: {0}")]
    InvalidKernel(String),

    /// The constant function is not an element of the kernel's Hilbert space.
    #[error("constant function is not in the RKHS (zero shift)")]
    NotInSpace,

    #[error("feature map would have {count} coordinates, limit is {limit}")]
    FeatureCountOverflow { count: usize, limit: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semi-definite (eigenvalue {eigenvalue:e})")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("regularization parameter must be positive, got {0}")]
    NonPositiveGamma(f64),

    #[error("record {index} has non-positive time {time}")]
    NonPositiveTime { index: usize, time: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("need at least {needed} records, found {found}")]
    TooFewRecords { needed: usize, found: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid would contain {count} points, limit is {limit}")]
    GridTooLarge { count: usize, limit: usize },

    #[error("invalid optimizer options: {0}")]
    InvalidOptions(String),

    #[error("objective is not finite at the initial point")]
    NonFiniteObjective,

    #[error("every fit on the grid failed to converge")]
    AllFitsFailed,

    #[error("no comparable pairs for the concordance index")]
    NoComparablePairs,

    #[error("external predictor {0} cannot be evaluated at new covariates")]
    NotPointwise(usize),

    #[error("covariate outside the simulation domain")]
    OutsideDomain,
}
