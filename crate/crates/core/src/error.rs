use thiserror::Error;

/// Errors raised by the discretization, residual, solver and diagnostic layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("trajectories live on different grids")]
    GridMismatch,

    #[error(
        "callback `{callback}` failed{}: {message}",
        node.map(|i| format!(" at node {i}")).unwrap_or_default()
    )]
    Callback {
        callback: &'static str,
        node: Option<usize>,
        message: String,
    },

    #[error("nonnegative least squares did not converge at node {node}")]
    NnlsNonConvergence { node: usize },

    #[error("empty iterate sequence")]
    EmptySequence,

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl CtpError {
    /// Attaches a grid node index to callback failures.
    pub fn at_node(self, i: usize) -> Self {
        match self {
            CtpError::Callback {
                callback, message, ..
            } => CtpError::Callback {
                callback,
                node: Some(i),
                message,
            },
            other => other,
        }
    }
}

pub type Result<T, E = CtpError> = std::result::Result<T, E>;
