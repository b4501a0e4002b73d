use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] lomt_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
    #[error("{}: hash {found} does not match the recorded {expected}", path.display())]
    HashMismatch { path: PathBuf, expected: String, found: String },
    #[error("{}: {source}", path.display())]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Usage(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Process exit status: 1 usage, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Internal(_) => 3,
            Error::Core(e) if is_parameter_error(e) => 1,
            _ => 2,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn invalid(path: &Path, message: impl Into<String>) -> Self {
        Error::Invalid { path: path.to_path_buf(), message: message.into() }
    }

    pub fn format(path: &Path, line: usize, message: impl Into<String>) -> Self {
        Error::Format { path: path.to_path_buf(), line, message: message.into() }
    }
}

fn is_parameter_error(e: &lomt_core::Error) -> bool {
    use lomt_core::Error as E;
    match e {
        E::Trial { source, .. } => is_parameter_error(source),
        E::InvalidUpsample
        | E::VocabTooSmall { .. }
        | E::InvalidOrder { .. }
        | E::InvalidSmoothing(_)
        | E::InvalidAlpha(_)
        | E::InvalidIterations
        | E::InvalidNBest
        | E::InvalidBeam
        | E::InvalidWindow(_)
        | E::WeightOutOfRange(_)
        | E::DirectionMismatch { .. }
        | E::EmptyDimension(_)
        | E::TopKTooLarge { .. }
        | E::EmptyEnsemble
        | E::MixedDirections
        | E::InvalidParameter(_) => true,
        _ => false,
    }
}
