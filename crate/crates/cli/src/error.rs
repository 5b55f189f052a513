use std::fmt;

/// Exit codes of the `sabap` binary.
pub mod exit {
    pub const OK: u8 = 0;
    pub const COMPARE_FAILED: u8 = 1;
    pub const INVALID: u8 = 2;
    pub const RUNTIME: u8 = 3;
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Unreadable or schema-invalid input; the message names the field.
    Config(String),
    /// Well-formed input that fails a validation check.
    Invalid(String),
    /// Solver failure or I/O failure while writing results.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Invalid(_) => exit::INVALID,
            Self::Runtime(_) => exit::RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "config error: {m}"),
            Self::Invalid(m) => write!(f, "validation failed: {m}"),
            Self::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
