use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FpcaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FpcaError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e}, required {required:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        required: f64,
    },

    #[error("matrix is rank deficient: {deficient} of {columns} columns below rank tolerance")]
    RankDeficient { deficient: usize, columns: usize },

    #[error("degenerate repair failed: {0}")]
    Repair(String),

    #[error("degenerate repair unsupported: {0}")]
    RepairUnsupported(String),

    #[error("inconsistent result: {0}")]
    Inconsistent(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl FpcaError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        FpcaError::Argument(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        FpcaError::Data(msg.into())
    }

    /// True for failures of an iterative or root-finding solver, as opposed to
    /// bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            FpcaError::NonConvergence { .. }
                | FpcaError::Repair(_)
                | FpcaError::RepairUnsupported(_)
                | FpcaError::Inconsistent(_)
                | FpcaError::RankDeficient { .. }
        )
    }

    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            FpcaError::Data(_) | FpcaError::Io { .. } | FpcaError::Csv { .. } | FpcaError::Json { .. }
        )
    }
}
