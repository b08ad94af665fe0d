use std::fmt;

use catoni_core::Error as CoreError;
use catoni_harness::HarnessError;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// 2: unreadable or malformed input, config schema violations.
    Input(String),
    /// 3: a numerical procedure failed (non-convergence, singular design, degenerate sample).
    Numeric(String),
    /// 4: invalid flag values or combinations.
    Flags(String),
    /// 5: a simulation aborted.
    Harness(String),
    /// 6: an influence function failed validation.
    Validation(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Flags(_) => 4,
            CliError::Harness(_) => 5,
            CliError::Validation(_) => 6,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (tag, m) = match self {
            CliError::Input(m) => ("input error", m),
            CliError::Numeric(m) => ("numerical failure", m),
            CliError::Flags(m) => ("invalid flags", m),
            CliError::Harness(m) => ("simulation aborted", m),
            CliError::Validation(m) => ("validation failed", m),
        };
        write!(f, "{tag}: {m}")
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(_) | CoreError::Unsupported(_) => CliError::Flags(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config { .. } | HarnessError::Io(_) => CliError::Input(e.to_string()),
            _ => CliError::Harness(e.to_string()),
        }
    }
}
