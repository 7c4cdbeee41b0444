use std::path::PathBuf;

/// Anything that stops a run, mapped onto the documented exit codes.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] glueflow_core::Error),

    #[error("cannot write {}: {source}", path.display())]
    Output { path: PathBuf, source: std::io::Error },
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_OUTPUT: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_HYPOTHESIS: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

impl RunError {
    /// Core errors other than hypothesis violations and numeric failures
    /// stem from the inputs, so they count as config errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Core(e) if e.is_hypothesis_violation() => EXIT_HYPOTHESIS,
            RunError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            RunError::Core(_) => EXIT_CONFIG,
            RunError::Output { .. } => EXIT_OUTPUT,
        }
    }
}
