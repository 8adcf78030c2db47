//! Error type shared by all analysis routines.

use thiserror::Error;

/// Failures raised by model construction, certification and numerics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhsError {
    /// The model data violates a structural hypothesis.
    #[error("invalid model: {0}")]
    InvalidModel(String),
    /// The boundary port map could not be inverted.
    #[error("singular port map (inversion residual {residual:.3e})")]
    SingularPortMap { residual: f64 },
    /// A state function cannot be differentiated often enough.
    #[error("insufficient smoothness: {0}")]
    InsufficientSmoothness(String),
    /// Array sizes do not agree.
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: String, expected: usize, got: usize },
    /// No nontrivial function satisfies the boundary constraints.
    #[error("boundary constraints admit no nontrivial polynomial up to degree {max_degree}")]
    DegenerateConstraints { max_degree: usize },
    /// The boundary matrix does not have full row rank.
    #[error("boundary matrix rank {rank} is below its row count {rows}")]
    RankDeficientW { rank: usize, rows: usize },
    /// The boundary form is indefinite on the admissible set.
    #[error("operator is not dissipative (smallest form eigenvalue {min_eig:.3e})")]
    NotDissipative { min_eig: f64 },
    /// A trace selector without entries was supplied.
    #[error("empty trace selector")]
    EmptySelector,
    /// The discrete constraint matrix lost rank.
    #[error("constraint matrix rank {rank} is below its row count {rows}")]
    ConstraintRankLoss { rank: usize, rows: usize },
    /// A dense eigenvalue or singular value solver failed.
    #[error("eigen solver failure: {0}")]
    EigenSolverFailure(String),
    /// The requested point of the imaginary axis is numerically an eigenvalue.
    #[error("i*{omega} is numerically in the spectrum")]
    OnSpectrum { omega: f64 },
    /// The implicit midpoint step matrix is singular.
    #[error("implicit step matrix is singular")]
    SingularStep,
    /// A decay fit met a nonpositive energy sample.
    #[error("nonpositive energy sample at t = {t}")]
    NonpositiveEnergy { t: f64 },
    /// The interconnection has no controller input.
    #[error("input/output split has no input channel")]
    EmptyInput,
    /// The infinite-dimensional part violates the passivity inequality.
    #[error("passivity inequality violated (excess {excess:.3e})")]
    NotPassive { excess: f64 },
    /// A preset name is not known.
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    /// A preset parameter is outside its admissible range.
    #[error("bad parameter: {0}")]
    BadParameter(String),
    /// The closed-form resolvent denominator vanishes.
    #[error("resolvent denominator is numerically zero (|den| = {modulus:.3e})")]
    NearSingularDenominator { modulus: f64 },
    /// Malformed JSON.
    #[error("parse error: {0}")]
    Parse(String),
    /// A configuration key is missing or ill-typed.
    #[error("schema error at '{key}': {message}")]
    Schema { key: String, message: String },
    /// A configuration entry has inconsistent dimensions.
    #[error("dimension error at '{key}': {message}")]
    Dimension { key: String, message: String },
    /// File system failure.
    #[error("io error: {0}")]
    Io(String),
}

/// Result alias for the crate.
pub type Result<T> = std::result::Result<T, PhsError>;
