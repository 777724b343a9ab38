//! Command implementations behind the `nomamec` binary.

pub mod config;
pub mod output;
pub mod solve;
pub mod sweep;
pub mod verify;

use std::path::PathBuf;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "NOMAMEC_OUT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Solver(nomamec::Error),
    #[error("io: {0}")]
    Io(String),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    /// 1 for failed checks, 2 for bad input, 3 for an infeasible scenario,
    /// 4 for I/O and other solver errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Solver(_) | CliError::Io(_) => 4,
        }
    }
}

impl From<nomamec::Error> for CliError {
    fn from(e: nomamec::Error) -> Self {
        use nomamec::Error as E;
        match e {
            E::Infeasible(msg) => CliError::Infeasible(msg),
            E::InvalidParameter { .. }
            | E::LengthMismatch { .. }
            | E::UnsortedGains { .. }
            | E::IndexOutOfRange { .. }
            | E::MissingServer => CliError::Config(e.to_string()),
            E::Unsupported(msg) | E::ClosedFormUnavailable(msg) => CliError::Usage(msg),
        }
    }
}

/// `--out` if given, else the environment default, else `fallback`.
pub fn out_dir(flag: Option<PathBuf>, fallback: Option<&str>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| fallback.map(PathBuf::from))
}
