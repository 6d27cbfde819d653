use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spectrum must contain at least one level")]
    EmptySpectrum,
    #[error("duplicate energy {0} in spectrum")]
    DuplicateEnergy(f64),
    #[error("degeneracy must be positive (level at energy {0})")]
    NonPositiveDegeneracy(f64),
    #[error("energy must be finite, got {0}")]
    NonFiniteEnergy(f64),
    #[error("shell tolerance must be finite and non-negative, got {0}")]
    InvalidTolerance(f64),
    #[error("state is not normalized (norm² = {0})")]
    Unnormalized(f64),
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("density matrix has negative eigenvalue {0}")]
    NegativeEigenvalue(f64),
    #[error("weights must sum to 1, got {0}")]
    WeightsNotNormalized(f64),
    #[error("weights must be non-negative and finite, got {0}")]
    InvalidWeight(f64),
    #[error("expected {expected} weights, got {found}")]
    WeightCount { expected: usize, found: usize },
    #[error("subspace ({0}, {1}) does not exist in the composite")]
    UnknownSubspace(usize, usize),
    #[error("no shell at energy {0}")]
    UnknownShell(f64),
    #[error("constraint profile kind mismatch: expected {expected}")]
    ProfileKind { expected: &'static str },
    #[error("unsupported moment exponents ({0}, {1})")]
    UnsupportedMoment(u32, u32),
    #[error("invalid moment query: {0}")]
    InvalidMomentQuery(String),
    #[error("perturbation does not sum to zero in shell {shell} (sum = {sum})")]
    ShellSumViolation { shell: usize, sum: f64 },
    #[error("perturbed weight for subspace {0} is negative")]
    InfeasiblePerturbation(usize),
    #[error("temperature fit needs at least 2 populated levels, got {0}")]
    InsufficientFitPoints(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown measure `{0}`")]
    UnknownMeasure(String),
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
}
