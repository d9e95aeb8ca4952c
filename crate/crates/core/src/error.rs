use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: self-loop on node {label:?}")]
    SelfLoop { line: usize, label: String },
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("node {0} has degree 0")]
    IsolatedNode(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("graph is bipartite; neighbor averaging oscillates with period 2")]
    Bipartite,
    #[error("graph is not connected")]
    Disconnected,
    #[error("every node has peer susceptibility 1, so no node is anchored to its initial opinion")]
    NoAnchor,
    #[error("graph is not regular")]
    NotRegular,
    #[error("n = {0} exceeds the dense-matrix limit")]
    TooLargeForDense(usize),
    #[error("linear system is singular to working precision")]
    Singular,
    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("equilibrium family degenerate; use iterative run ({0})")]
    Degenerate(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular
                | Error::NoConvergence { .. }
                | Error::Degenerate(_)
                | Error::Diverged(_)
                | Error::NonFinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
