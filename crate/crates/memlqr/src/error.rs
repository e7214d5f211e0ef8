//! Error type shared by all modules.

/// Failures surfaced by the synthesis and validation pipeline.
///
/// Variants carry `f64` diagnostics regardless of the working scalar type so
/// the error type stays object-simple and printable.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A physical constant or weight violates its positivity/shape contract.
    #[error("invalid constant: {0}")]
    InvalidConstant(String),

    /// The requested decay rate is at or beyond the spectral ceiling
    /// `omega_zero = kappa + 1/eta`, where one eigenvalue branch of the
    /// evolution operator accumulates. No feedback can achieve such a rate.
    #[error("target rate omega = {omega} is not attainable: the spectrum accumulates at -{omega_zero}")]
    OmegaInfeasible { omega: f64, omega_zero: f64 },

    /// Mode enumeration stopped before the eigenvalue tail is certified to
    /// stay left of `-omega`; the unstable set may be incomplete.
    #[error("max_index = {max_index} cannot certify the unstable set: the tail test fails at lambda = {lambda}")]
    MaxIndexTooSmall { max_index: usize, lambda: f64 },

    /// Operands with incompatible dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Operands built over different domains or basis kinds.
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    /// A matrix required to be invertible (or positive definite) is not.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// The Hamiltonian built for a Riccati solve has an eigenvalue on (or
    /// numerically indistinguishable from) the imaginary axis, which signals
    /// non-stabilizable or non-detectable data at the requested shift.
    #[error("Hamiltonian eigenvalue on the imaginary axis (pivot magnitude {pivot:.3e})")]
    HamiltonianAxisEigenvalue { pivot: f64 },

    /// An iteration hit its cap without meeting its tolerance.
    #[error("{context}: no convergence within {iterations} iterations")]
    NoConvergence { context: String, iterations: usize },

    /// A fit window selects fewer than two usable samples.
    #[error("degenerate fit window [{0}, {1}]")]
    DegenerateWindow(f64, f64),

    /// Filesystem or serialization failure while importing or exporting.
    #[error("io: {0}")]
    Io(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
