use std::path::PathBuf;

use exciton_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

impl RunError {
    /// 2 for bad input, 3 for numerical failure, 1 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Core(e) => core_exit_code(e),
            RunError::Io { .. } | RunError::Csv { .. } => 1,
        }
    }
}

fn core_exit_code(e: &CoreError) -> u8 {
    match e {
        CoreError::InvalidParameter { .. } | CoreError::NotApplicable { .. } | CoreError::DimensionMismatch { .. } => 2,
        CoreError::AtGridPoint { source, .. } => core_exit_code(source),
        _ => 3,
    }
}
