//! Error type shared by all modules.

use thiserror::Error;

/// Errors raised by kernel construction, smearing, quadrature and the
/// truncated-Fock oracle.
#[derive(Debug, Error)]
pub enum QftkError {
    /// Index outside its valid range (component, spin slot, Lorentz index).
    #[error("index out of range: {what} = {got}, valid range {valid}")]
    IndexOutOfRange {
        what: &'static str,
        got: usize,
        valid: &'static str,
    },

    /// A momentum failed an on-shell precondition.
    #[error("momentum off shell: |p·p − m²| = {residual:.3e} exceeds tolerance {tol:.3e}")]
    OffShell { residual: f64, tol: f64 },

    /// A test function failed the class certificate it claims.
    #[error("test-function class certificate failed: {reason}")]
    ClassCertificate { reason: String },

    /// A smearing used a test function of the wrong class for the species
    /// (e.g. an ordinary Schwartz function on a massless leg).
    #[error("test-function class mismatch: {reason}")]
    ClassMismatch { reason: String },

    /// Quadrature failed to converge below the requested tolerance.
    #[error("quadrature did not converge: estimated error {estimate:.3e} > tolerance {tol:.3e}")]
    QuadratureFailure { estimate: f64, tol: f64 },

    /// A propagator symbol was evaluated on its singular set.
    #[error("propagator symbol singular at k = ({k0:.6e}, {k1:.6e}, {k2:.6e}, {k3:.6e}): {reason}")]
    SingularSymbol {
        k0: f64,
        k1: f64,
        k2: f64,
        k3: f64,
        reason: String,
    },

    /// A √B photon-kernel variant was requested without a matrix provider.
    #[error("photon √B variant requires a configured B-matrix provider")]
    MissingSqrtBProvider,

    /// The requested truncated Fock space exceeds the size limits.
    #[error("truncated Fock space too large: {what} = {got} exceeds limit {limit}")]
    FockTooLarge {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    /// A smearing function lies outside the span of the Fock modes.
    #[error("smearing outside the Fock mode span: residual norm {residual:.3e} > {tol:.3e}")]
    SpanFailure { residual: f64, tol: f64 },

    /// A kernel operation received input outside its closed-form class.
    #[error("operation outside the closed-form kernel class: {reason}")]
    OutsideKernelClass { reason: String },

    /// An ε-schedule failed to produce a convergent sequence.
    #[error("regularization schedule diverged: {diagnostic}")]
    ScheduleDiverged { diagnostic: String },

    /// Configuration file / CLI input problems.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// JSON (de)serialization problems.
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// Filesystem problems (CLI layer).
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, QftkError>;
