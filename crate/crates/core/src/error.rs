use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// An identity, lemma or proposition failed numerically.
    Invariant,
    /// The request itself is malformed or inconsistent.
    Configuration,
    /// A factorization or eigensolver could not deliver a trustworthy answer.
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("basis: invalid specification: {0}")]
    InvalidSpec(String),
    #[error("basis: problem too large (dimension {dim} exceeds max_dim {max_dim})")]
    ProblemTooLarge { dim: usize, max_dim: usize },
    #[error("basis: quadrature failure (Gram residual {residual:e})")]
    QuadratureFailure { residual: f64 },
    #[error("basis: basis mismatch")]
    BasisMismatch,
    #[error("operators: potential not truncated: {0}")]
    PotentialNotTruncated(String),
    #[error("operators: model/basis mismatch: {0}")]
    ModelBasisMismatch(String),
    #[error("operators: unsupported kinetic energy: {0}")]
    UnsupportedKinetic(String),
    #[error("operators: assumption violated: {identity} (residual {residual:e})")]
    AssumptionViolated {
        identity: &'static str,
        residual: f64,
    },
    #[error("schur: macroscopic coercivity failure (sigma_min(A10) = {sigma_min:e})")]
    MacroscopicCoercivityFailure { sigma_min: f64 },
    #[error("schur: dissipation failure on H2")]
    DissipationFailure,
    #[error("schur: Schur singular")]
    SchurSingular,
    #[error("schur: numerically singular (sigma_min = {sigma_min:e})")]
    NumericallySingular { sigma_min: f64 },
    #[error("schur: assumption constants invalid (s = {s}, a = {a})")]
    AssumptionConstantsInvalid { s: f64, a: f64 },
    #[error("constants: solver failure: {0}")]
    SolverFailure(String),
    #[error("constants: lemma violation (ratio {ratio})")]
    LemmaViolation { ratio: f64 },
    #[error("constants: Bochner identity failure (residual {residual:e})")]
    BochnerFailure { residual: f64 },
    #[error("constants: constant-case misdeclared (ratio {ratio})")]
    ConstantCaseMisdeclared { ratio: f64 },
    #[error("models: case parameters incomplete: {0}")]
    CaseParametersIncomplete(&'static str),
    #[error("models: proposition violation (X^2 = {x2}, bound = {bound})")]
    PropositionViolation { x2: f64, bound: f64 },
    #[error("models: NH assembly error (A*A residual {residual:e})")]
    NhAssemblyError { residual: f64 },
    #[error("models: invalid rate inputs")]
    InvalidRateInputs,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidSpec(_)
            | Error::ProblemTooLarge { .. }
            | Error::BasisMismatch
            | Error::PotentialNotTruncated(_)
            | Error::ModelBasisMismatch(_)
            | Error::UnsupportedKinetic(_)
            | Error::AssumptionConstantsInvalid { .. }
            | Error::CaseParametersIncomplete(_)
            | Error::InvalidRateInputs => ErrorKind::Configuration,
            Error::AssumptionViolated { .. }
            | Error::MacroscopicCoercivityFailure { .. }
            | Error::LemmaViolation { .. }
            | Error::BochnerFailure { .. }
            | Error::ConstantCaseMisdeclared { .. }
            | Error::PropositionViolation { .. }
            | Error::NhAssemblyError { .. } => ErrorKind::Invariant,
            Error::QuadratureFailure { .. }
            | Error::DissipationFailure
            | Error::SchurSingular
            | Error::NumericallySingular { .. }
            | Error::SolverFailure(_) => ErrorKind::Numerical,
        }
    }
}
