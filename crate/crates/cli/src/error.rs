use std::fmt;

/// Failures with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Malformed config, bad input or a precondition the run cannot meet (2).
    Parse(String),
    /// Newton did not converge (3).
    NonConvergence(String),
    /// An assertion-grade check failed (1).
    Verification(String),
    /// Anything else, e.g. an unwritable output directory (2).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Parse(_) | CliError::Io(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "error: {m}"),
            CliError::NonConvergence(m) => write!(f, "solver did not converge: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<lingrowth::Error> for CliError {
    fn from(e: lingrowth::Error) -> Self {
        if e.is_non_convergence() {
            return CliError::NonConvergence(e.to_string());
        }
        match e {
            lingrowth::Error::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Parse(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
