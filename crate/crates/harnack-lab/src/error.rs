use thiserror::Error;

/// Error type shared by all modules.
#[derive(Debug, Error)]
pub enum LabError {
    /// Caller violated a precondition (dimension mismatch, bad parameter, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A simulated path left the guard ball `‖state‖ ≤ 1e8`; the model is
    /// misconfigured or not non-explosive.
    #[error("explosion: |state| exceeded {guard:.1e} at step {step} (t = {t:.6})")]
    Explosion { guard: f64, step: usize, t: f64 },

    /// A test function that must stay strictly positive produced a
    /// nonpositive sample.
    #[error("positivity violation: f = {value:.6e} at a sampled endpoint")]
    PositivityViolation { value: f64 },

    /// Linear solve / iterative scheme failed to reach its tolerance.
    #[error("solver error: {0}")]
    Solver(String),

    /// Deterministic oracle failed (power iteration, kernel validity, ...).
    #[error("oracle error: {0}")]
    Oracle(String),

    /// Config file could not be read, parsed, or validated.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) | LabError::Config(_) => 2,
            _ => 3,
        }
    }
}
