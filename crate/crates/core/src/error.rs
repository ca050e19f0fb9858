use thiserror::Error;

/// Errors raised by the numerical library and the experiment runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate spectrum: eigenvalues {0} and {1} closer than the EP guard {2:e}")]
    DegenerateSpectrum(usize, usize, f64),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("self-orthogonal eigenvector {index}: |<l|r>| = {overlap:e} (exceptional point?)")]
    SelfOrthogonal { index: usize, overlap: f64 },

    #[error("ambiguous eigenpath matching at row {row}: best overlap {best:e}, runner-up {second:e}")]
    AmbiguousMatching { row: usize, best: f64, second: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix dimension {0} exceeds the eigensolver cap {1}")]
    TooLarge(usize, usize),

    #[error("symmetry matrix is not {0} (residual {1:e})")]
    BadSymmetryMatrix(&'static str, f64),

    #[error("eigenvalue {0} has no symmetry partner within tolerance")]
    UnpairableSpectrum(usize),

    #[error("state is not an eigenvector (relative residual {0:e})")]
    NotAnEigenvector(f64),

    #[error("time {t} outside the schedule window [{start}, {end}]")]
    WindowExceeded { t: f64, start: f64, end: f64 },

    #[error("eigenbasis is not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("eigenbasis is not binormalized (deviation {0:e})")]
    NotBinormalized(f64),

    #[error("Hamiltonian violates the declared {0} symmetry (residual {1:e})")]
    SymmetryViolation(&'static str, f64),

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("step too large at t = {t}: |H|h = {product:.3} > 0.1")]
    StepTooLarge { t: f64, product: f64 },

    #[error("state norm vanished at t = {0}")]
    ZeroNorm(f64),

    #[error("schedule crosses the exceptional point near t = {0}")]
    EpCrossing(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("CSV schema error: {0}")]
    Schema(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
