use std::path::Path;

use rydberg_core::Error as CoreError;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("missing input: {0}")]
    Dependency(String),
    #[error("{bad} of {total} sweep points did not converge; a fit needs 3 converged points")]
    Unconverged { bad: usize, total: usize },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 2 for configuration problems, 3 for basis capacity, 4 when too few
    /// sweep points converged for a fit, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(CoreError::Parameter(_) | CoreError::Stability { .. } | CoreError::DimensionMismatch { .. }) => 2,
            CliError::Core(CoreError::Capacity { .. }) => 3,
            CliError::Unconverged { .. } => 4,
            _ => 1,
        }
    }

    /// Follow-up advice printed after the error message.
    pub fn hint(&self) -> Option<&'static str> {
        match self {
            CliError::Core(CoreError::Capacity { .. }) => {
                Some("lower E_C (or E_C_factor), reduce N, or raise max_states if memory allows")
            }
            CliError::Core(CoreError::Stability { .. }) => {
                Some("use a smaller dt (or dt_factor), or a smaller E_C so the largest diagonal shrinks")
            }
            CliError::Unconverged { .. } => Some("raise E_C_factor or set include_unconverged = true"),
            _ => None,
        }
    }
}
