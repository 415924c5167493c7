//! Error type shared by every module.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CrownError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrownError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension n = {0} is not supported (need n >= 2)")]
    InvalidDimension(usize),
    #[error("spectral parameter {0} is not admissible")]
    InadmissibleLambda(String),
    #[error("gamma pole at {0}")]
    GammaPole(f64),
    #[error("argument {re}{im:+}i lies on the branch cut [1, inf)")]
    OnCut { re: f64, im: f64 },
    #[error("{what} did not converge within {terms} terms")]
    NonConvergent { what: &'static str, terms: usize },
    #[error("point is outside the exponential chart ([v,v] = {q}, bound {bound})")]
    NotInChart { q: f64, bound: f64 },
    #[error("point is off the quadric by {0:e}")]
    OffQuadric(f64),
    #[error("vector is not tangent at the base point (defect {0:e})")]
    NotTangent(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("x = {0} is too close to 1; use the near-one expansion")]
    TooCloseToOne(f64),
    #[error("argument outside the near-one disk")]
    OutOfDisk,
    #[error("power base {re}{im:+}i lies on the branch cut of the principal power")]
    BranchViolation { re: f64, im: f64 },
    #[error("crown points lie on different branches")]
    MixedBranches,
    #[error("evaluation point lies on the light cone of the base point")]
    OnConeSingularity,
    #[error("finite-difference stencil crosses the light cone")]
    StencilCrossesCone,
    #[error("extrapolated estimates are not Cauchy (spread {spread:e})")]
    ExtrapolationNonConvergent { spread: f64 },
    #[error("lambda = {0} is an excluded residue point")]
    ResiduePoint(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("initial covector is not characteristic")]
    NonCharacteristic,
    #[error("zero covector")]
    ZeroCovector,
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("i/o error: {0}")]
    Io(String),
}
