use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] qetlab_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("write failed: {0}")]
    Output(#[from] std::io::Error),

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("refusing to validate: {0}")]
    Tolerance(String),

    #[error("{0}")]
    Failed(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type LabResult<T> = Result<T, LabError>;

pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use qetlab_core::Error as E;
        match self {
            LabError::Core(
                E::NoConvergence { .. }
                | E::DegenerateGroundState { .. }
                | E::ImaginaryResidue { .. }
                | E::Quadrature(_)
                | E::Degenerate(_),
            )
            | LabError::Numerical(_) => exit::NUMERICAL,
            LabError::Failed(_) => exit::VALIDATION,
            _ => exit::USAGE,
        }
    }
}
