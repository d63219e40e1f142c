use thiserror::Error;

use crate::model::GapTag;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |A - A^H| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("eigendecomposition did not converge")]
    ConvergenceFailure,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("energies are not strictly increasing (level {index})")]
    Degenerate { index: usize },
    #[error("amplitude vector is zero")]
    ZeroVector,
    #[error("invalid level index {0}")]
    InvalidIndex(usize),
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("operation requires gap class {expected:?}, system is {found:?}")]
    WrongGapClass { expected: GapTag, found: GapTag },
    #[error("gap class {0:?} has no synthesis route")]
    UnsupportedGapClass(GapTag),
    #[error("amplitudes unreachable: arcsin argument {argument} exceeds 1")]
    UnreachableAmplitudes { argument: f64 },
    #[error("amplitude chain degenerate at level {level}: a preceding angle is pi/2")]
    DegenerateChain { level: usize },
    #[error("amplitudes inconsistent: {0}")]
    InconsistentAmplitudes(String),
    #[error("target unreachable: {0}")]
    UnreachableTarget(String),
    #[error("no non-negative wait solution within branch bound {bound}")]
    BranchSearchExhausted { bound: u32 },
    #[error("pulse count {needed} exceeds budget {max}")]
    BudgetExceeded { needed: u64, max: u64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotHermitian { .. } => "NotHermitian",
            Error::ConvergenceFailure => "ConvergenceFailure",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::Degenerate { .. } => "Degenerate",
            Error::ZeroVector => "ZeroVector",
            Error::InvalidIndex(_) => "InvalidIndex",
            Error::InvalidProtocol(_) => "InvalidProtocol",
            Error::WrongGapClass { .. } => "WrongGapClass",
            Error::UnsupportedGapClass(_) => "UnsupportedGapClass",
            Error::UnreachableAmplitudes { .. } => "UnreachableAmplitudes",
            Error::DegenerateChain { .. } => "DegenerateChain",
            Error::InconsistentAmplitudes(_) => "InconsistentAmplitudes",
            Error::UnreachableTarget(_) => "UnreachableTarget",
            Error::BranchSearchExhausted { .. } => "BranchSearchExhausted",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}
