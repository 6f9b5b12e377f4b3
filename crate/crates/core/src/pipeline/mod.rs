//! Batch jobs over a frame manifest: difference masks, augmentation runs,
//! previews and the model-input resize.

mod augment;
mod corpus;
mod io;
mod masks;
mod preview;
mod resize;

use std::path::PathBuf;

use thiserror::Error;

use crate::cutout::CutoutError;
use crate::geometry::GeometryError;
use crate::manifest::ManifestError;
use crate::simmask::SimMaskError;

pub use augment::{run_augment, ItemOutcome, ItemStatus, JobConfig, RunReport, REPORT_FILE};
pub use corpus::{write_synthetic_corpus, CorpusSpec, CorpusSummary};
pub use io::{
    load_image, load_landmarks, output_path, read_landmarks, resolve_path, sidecar_path, write_landmarks,
    LandmarkSidecar,
};
pub use masks::{build_masks, mask_jobs_from_manifest, mask_path, MaskIndex, MaskJob, INDEX_FILE};
pub use preview::{preview, preview_png, Preview};
pub use resize::{resize_pad, MODEL_INPUT_SIZE};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: bad landmark sidecar: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error("landmark sidecar not found: {0}")]
    MissingLandmarks(PathBuf),
    #[error("image dimensions {0}x{1} differ from {2}x{3}")]
    DimMismatch(u32, u32, u32, u32),
    #[error("image is empty")]
    EmptyImage,
    #[error("invalid job: {0}")]
    InvalidConfig(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Cutout(#[from] CutoutError),
    #[error(transparent)]
    SimMask(#[from] SimMaskError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl PipelineError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        PipelineError::Image {
            path: path.into(),
            source,
        }
    }
}

/// Dedicated pool with exactly `workers` threads.
pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, PipelineError> {
    if workers == 0 {
        return Err(PipelineError::InvalidConfig("workers must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::InvalidConfig(e.to_string()))
}
