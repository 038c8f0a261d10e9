use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the pipeline stages. Config-shaped errors map to exit
/// code 2, everything else to exit code 1.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error in {path}: {why}")]
    MalformedConfig { path: PathBuf, why: String },
    #[error("unknown config field: {0}")]
    UnknownField(String),
    #[error("config violates invariant: {0}")]
    ValidationFailure(String),
    #[error("missing input: {0}")]
    MissingInput(PathBuf),
    #[error("manifest missing in {0}")]
    ManifestMissing(PathBuf),
    #[error("checksum mismatch for {path}: manifest {expected}, file {got}")]
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        got: String,
    },
    #[error("malformed raster {path}: {why}")]
    MalformedRaster { path: PathBuf, why: String },
    #[error("io failure at {path}: {source}")]
    IoFailure {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Scene(#[from] centerdepth_core::scene::SceneError),
    #[error(transparent)]
    Crf(#[from] centerdepth_core::crf::CrfError),
    #[error(transparent)]
    Metrics(#[from] centerdepth_core::metrics::MetricsError),
    #[error(transparent)]
    Bev(#[from] centerdepth_core::bev::BevError),
    #[error("{0}")]
    Other(String),
}

impl PipelineError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::IoFailure {
            path: path.into(),
            source,
        }
    }

    /// Usage and config problems exit 2; pipeline failures exit 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::MalformedConfig { .. }
            | Self::UnknownField(_)
            | Self::ValidationFailure(_)
            | Self::MissingInput(_) => 2,
            _ => 1,
        }
    }
}
