use std::fs;
use std::path::{Component, Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::geometry::{Landmarks68, Point2};
use crate::manifest::FrameRow;

/// On-disk landmark format: `{"points": [[x, y], ...]}` with 68 pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSidecar {
    pub points: Vec<[f64; 2]>,
}

impl From<&Landmarks68> for LandmarkSidecar {
    fn from(lm: &Landmarks68) -> Self {
        Self {
            points: lm.points().iter().map(|p| [p.x, p.y]).collect(),
        }
    }
}

/// Manifest paths are relative to the manifest's directory unless absolute.
pub fn resolve_path(base_dir: &Path, path: &str) -> PathBuf {
    base_dir.join(path)
}

/// `<dir>/<image path>.landmarks.json`, where `dir` is `landmarks_dir` if
/// given and the manifest directory otherwise.
pub fn sidecar_path(base_dir: &Path, landmarks_dir: Option<&Path>, image_path: &str) -> PathBuf {
    let rel = Path::new(image_path);
    let dir = landmarks_dir.unwrap_or(base_dir);
    let name = format!(
        "{}.landmarks.json",
        rel.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
    );
    if rel.is_absolute() && landmarks_dir.is_none() {
        return rel.with_file_name(name);
    }
    dir.join(relative_part(rel)).with_file_name(name)
}

/// Where the output for `row` goes under `out_dir`: the same relative path
/// as the input, or `<video_id>/<file name>` for absolute or escaping paths.
pub fn output_path(out_dir: &Path, row: &FrameRow) -> PathBuf {
    let rel = Path::new(&row.path);
    let clean = rel
        .components()
        .all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if clean {
        out_dir.join(rel)
    } else {
        let name = rel
            .file_name()
            .map(|n| n.to_os_string())
            .unwrap_or_else(|| format!("{}.png", row.frame_id).into());
        out_dir.join(&row.video_id).join(name)
    }
}

fn relative_part(path: &Path) -> PathBuf {
    path.components()
        .filter(|c| matches!(c, Component::Normal(_)))
        .collect()
}

pub fn load_image(path: &Path) -> Result<RgbImage, PipelineError> {
    let img = image::open(path)
        .map_err(|e| PipelineError::image(path, e))?
        .to_rgb8();
    if img.width() == 0 || img.height() == 0 {
        return Err(PipelineError::EmptyImage);
    }
    Ok(img)
}

pub fn read_landmarks(path: &Path) -> Result<Landmarks68, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    let sidecar: LandmarkSidecar = serde_json::from_str(&text).map_err(|e| PipelineError::Sidecar {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let points = sidecar.points.iter().map(|&[x, y]| Point2::new(x, y)).collect();
    Landmarks68::new(points).map_err(|e| PipelineError::Sidecar {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Like [`read_landmarks`] but reports a missing file as `MissingLandmarks`.
pub fn load_landmarks(path: &Path) -> Result<Landmarks68, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingLandmarks(path.to_path_buf()));
    }
    read_landmarks(path)
}

pub fn write_landmarks(path: &Path, landmarks: &Landmarks68) -> Result<(), PipelineError> {
    create_parent(path)?;
    let json = serde_json::to_string(&LandmarkSidecar::from(landmarks))?;
    fs::write(path, json).map_err(|e| PipelineError::io(path, e))
}

pub(crate) fn create_parent(path: &Path) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    create_parent(path)?;
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    fs::write(path, json).map_err(|e| PipelineError::io(path, e))
}
