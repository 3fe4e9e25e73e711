use std::fmt;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unreadable/malformed files.
    Usage(String),
    Library(swdgp::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Library(e) if e.is_numerical() => ExitCode::from(3),
            _ => ExitCode::from(2),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Library(e) => write!(f, "{e}"),
        }
    }
}

impl From<swdgp::Error> for CliError {
    fn from(e: swdgp::Error) -> Self {
        CliError::Library(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("write failed: {e}"))
    }
}
