use std::path::PathBuf;

use thiserror::Error;

/// Process exit status for a successful run.
pub const EXIT_OK: u8 = 0;
/// At least one verified property failed.
pub const EXIT_VERIFY_FAILED: u8 = 1;
/// Malformed command line.
pub const EXIT_USAGE: u8 = 2;
/// Unreadable, malformed or numerically unusable input.
pub const EXIT_INPUT: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("BadMagic: {} is not an OQDL latent file", path.display())]
    BadMagic { path: PathBuf },

    #[error("UnsupportedVersion: {} has format version {version}, expected 1", path.display())]
    UnsupportedVersion { path: PathBuf, version: u32 },

    #[error("TruncatedFile: {} ends after {found} bytes, {expected} expected", path.display())]
    TruncatedFile { path: PathBuf, expected: u64, found: u64 },

    #[error("LengthMismatch: {} {detail}", path.display())]
    LengthMismatch { path: PathBuf, detail: String },

    #[error("NonFiniteValue: {} has a non-finite value at row {row}, column {col}", path.display())]
    NonFiniteValue { path: PathBuf, row: usize, col: usize },

    #[error("EmptyFile: {} holds no data", path.display())]
    EmptyFile { path: PathBuf },

    #[error("BadCsv: {} line {line}: {detail}", path.display())]
    BadCsv { path: PathBuf, line: usize, detail: String },

    #[error("BadLabels: {} {detail}", path.display())]
    BadLabels { path: PathBuf, detail: String },

    #[error("BadDocument: {}: {detail}", path.display())]
    BadDocument { path: PathBuf, detail: String },

    #[error("InsufficientPoints: class {label} has {found} distinct latents, {needed} requested")]
    InsufficientPoints { label: usize, needed: usize, found: usize },

    #[error("{0}")]
    Usage(String),

    #[error("cannot serialize output: {0}")]
    Output(String),

    #[error(transparent)]
    Core(#[from] optquant::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            _ => EXIT_INPUT,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
