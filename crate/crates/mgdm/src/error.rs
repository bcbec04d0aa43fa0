use thiserror::Error;

/// Errors produced by samplers, descent kernels and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("model error: {0}")]
    Model(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The loss grew for several consecutive steps or a state became
    /// non-finite; usually a sign that the step size is too large.
    /// Carries everything recorded before the abort.
    #[error("numerical divergence at step {step}: {detail} (try a smaller step size)")]
    Divergence {
        step: usize,
        detail: String,
        partial: Option<Box<crate::descent::DescentRun>>,
    },

    /// A step map's Jacobian determinant underflowed (|det| < 1e-300).
    #[error("singular flow map{}", fmt_particle(*.particle))]
    SingularFlow { particle: Option<usize> },

    #[error("dense determinant oracle limited to {cap} total dimensions, got {got}")]
    OracleScale { cap: usize, got: usize },

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_particle(p: Option<usize>) -> String {
    match p {
        Some(n) => format!(" at particle {n}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
