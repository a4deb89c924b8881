use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid mesh: {0}")]
    Validation(String),

    #[error("degenerate geometry in cell {cell}: {reason}")]
    Geometry { cell: usize, reason: String },

    #[error("unsupported mesh: {0}")]
    UnsupportedMesh(String),

    #[error("matrix is not positive definite: {0}")]
    Definiteness(String),

    #[error("invalid argument: {0}")]
    Domain(String),

    /// The requested step is larger than `2 / (L² C_D² (λ₁ + λ₂))`, the
    /// step below which the fixed-point map is a contraction.
    #[error("time step {dt:e} exceeds the contraction bound {bound:e}")]
    StepSize { dt: f64, bound: f64 },

    #[error(
        "Picard iteration did not converge in {iterations} iterations \
         (last increment {increment:e}, last ratio {ratio:.4})"
    )]
    Nonconvergence {
        iterations: usize,
        increment: f64,
        ratio: f64,
    },

    #[error("linear solver did not converge (relative residual {residual:e})")]
    LinearSolve { residual: f64 },

    #[error("cannot normalise: {0} has zero norm")]
    Normalization(String),

    #[error("at time level {level}: {source}")]
    AtTimeLevel { level: usize, source: Box<Error> },

    #[error("at refinement level {level}: {source}")]
    AtRefinement { level: usize, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Strips the time/refinement context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTimeLevel { source, .. } | Error::AtRefinement { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_nonconvergence(&self) -> bool {
        matches!(
            self.root(),
            Error::Nonconvergence { .. } | Error::LinearSolve { .. }
        )
    }

    pub fn is_validation(&self) -> bool {
        matches!(
            self.root(),
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Geometry { .. }
                | Error::UnsupportedMesh(_)
                | Error::Domain(_)
                | Error::StepSize { .. }
                | Error::Definiteness(_)
                | Error::Normalization(_)
        )
    }
}
