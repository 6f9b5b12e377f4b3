//! Landmark-guided face cutout augmentation for deepfake detection data.
//!
//! - [`geometry`]: polygons, hulls, rasterization and binary masks.
//! - [`simmask`]: SSIM difference masks between a real frame and its fake.
//! - [`cutout`]: the augmentation itself.
//! - [`clustering`], [`manifest`], [`split`]: identity clustering and
//!   leak-free dataset splits.
//! - [`metrics`]: video-level log loss, ROC AUC and average precision.
//! - [`pipeline`]: batch jobs over a frame manifest.

pub mod clustering;
pub mod cutout;
pub mod geometry;
pub mod manifest;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod simmask;
pub mod split;
pub mod synthetic;

pub use cutout::{face_cutout, AugmentOutcome, CutoutConfig, CutoutError, CutoutMode, FillMode, Strategy};
pub use geometry::{BinaryMask, Landmarks68, Point2, Polygon};
