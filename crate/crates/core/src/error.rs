use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate basis: overlap matrix keeps only {retained} of {size} directions")]
    DegenerateBasis { retained: usize, size: usize },

    #[error("Coulomb quadrature not converged: relative change {relative_change:.3e}")]
    QuadratureAccuracy { relative_change: f64 },

    #[error("no resonance for {target_mev:.4} meV in [{lo}, {hi}] T (no sign change)")]
    NoResonance { target_mev: f64, lo: f64, hi: f64 },

    #[error("unsupported transition: {0}")]
    UnsupportedTransition(String),

    #[error("zero Jones vector has no polarization state")]
    ZeroJonesVector,

    #[error("integrator step underflow: {steps} steps over {duration_ps} ps")]
    StepUnderflow { steps: usize, duration_ps: f64 },

    #[error("degenerate sinusoid fit: design matrix is rank deficient")]
    DegenerateFit,

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("unidentifiable fit: {0}")]
    Unidentifiable(String),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures of the numerics itself, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateBasis { .. }
                | Error::QuadratureAccuracy { .. }
                | Error::StepUnderflow { .. }
        )
    }
}
