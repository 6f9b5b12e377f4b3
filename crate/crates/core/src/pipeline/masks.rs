use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::{create_parent, load_image, resolve_path, write_json};
use super::{thread_pool, PipelineError};
use crate::manifest::{FrameRow, VideoLabel};
use crate::simmask::difference_mask;

pub const INDEX_FILE: &str = "index.json";

/// One fake frame and the real frame it was derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskJob {
    pub video_id: String,
    pub frame_id: u64,
    pub real: PathBuf,
    pub fake: PathBuf,
}

impl MaskJob {
    pub fn image_id(&self) -> String {
        format!("{}/{}", self.video_id, self.frame_id)
    }
}

/// Result of a mask run, also written as `index.json` in the mask directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MaskIndex {
    pub ssim_threshold: f64,
    /// `video_id/frame_id` to mask path relative to the mask directory.
    pub masks: BTreeMap<String, String>,
    /// `video_id/frame_id` to error message.
    pub failures: BTreeMap<String, String>,
}

/// `<masks_dir>/<video_id>/<frame_id>.png`
pub fn mask_path(masks_dir: &Path, video_id: &str, frame_id: u64) -> PathBuf {
    masks_dir.join(video_id).join(format!("{frame_id}.png"))
}

/// Pairs every fake frame with the frame of the same id in its source video.
/// Fakes without such a frame are returned separately as image ids.
pub fn mask_jobs_from_manifest(rows: &[FrameRow], base_dir: &Path) -> Result<(Vec<MaskJob>, Vec<String>), PipelineError> {
    let mut reals: HashMap<(&str, u64), &FrameRow> = HashMap::new();
    for row in rows {
        if row.video_label()? == VideoLabel::Real {
            reals.insert((row.video_id.as_str(), row.frame_id), row);
        }
    }
    let mut jobs = Vec::new();
    let mut unmatched = Vec::new();
    for row in rows {
        if row.video_label()? != VideoLabel::Fake {
            continue;
        }
        let source = row.source_video_id.as_deref().unwrap_or_default();
        match reals.get(&(source, row.frame_id)) {
            Some(real) => jobs.push(MaskJob {
                video_id: row.video_id.clone(),
                frame_id: row.frame_id,
                real: resolve_path(base_dir, &real.path),
                fake: resolve_path(base_dir, &row.path),
            }),
            None => unmatched.push(row.image_id()),
        }
    }
    jobs.sort_by(|a, b| (&a.video_id, a.frame_id).cmp(&(&b.video_id, b.frame_id)));
    unmatched.sort();
    Ok((jobs, unmatched))
}

fn build_one(job: &MaskJob, out_dir: &Path, threshold: f64) -> Result<String, PipelineError> {
    let real = load_image(&job.real)?;
    let fake = load_image(&job.fake)?;
    if real.dimensions() != fake.dimensions() {
        return Err(PipelineError::DimMismatch(
            real.width(),
            real.height(),
            fake.width(),
            fake.height(),
        ));
    }
    let mask = difference_mask(&real, &fake, threshold)?;
    let path = mask_path(out_dir, &job.video_id, job.frame_id);
    create_parent(&path)?;
    mask.to_luma8()
        .save_with_format(&path, image::ImageFormat::Png)
        .map_err(|e| PipelineError::image(&path, e))?;
    Ok(format!("{}/{}.png", job.video_id, job.frame_id))
}

/// Writes one difference-mask PNG per job (255 where the frames differ) and
/// an `index.json`. Failed pairs are logged, skipped and listed in the index.
pub fn build_masks(jobs: &[MaskJob], out_dir: &Path, ssim_threshold: f64, workers: usize) -> Result<MaskIndex, PipelineError> {
    if !(0.0..=1.0).contains(&ssim_threshold) {
        return Err(PipelineError::InvalidConfig(format!(
            "ssim threshold {ssim_threshold} not in [0, 1]"
        )));
    }
    let pool = thread_pool(workers)?;
    let results: Vec<(String, Result<String, PipelineError>)> = pool.install(|| {
        jobs.par_iter()
            .map(|job| (job.image_id(), build_one(job, out_dir, ssim_threshold)))
            .collect()
    });
    let mut index = MaskIndex {
        ssim_threshold,
        ..Default::default()
    };
    for (id, result) in results {
        match result {
            Ok(rel) => {
                index.masks.insert(id, rel);
            }
            Err(e) => {
                log::warn!("mask {id} skipped: {e}");
                index.failures.insert(id, e.to_string());
            }
        }
    }
    write_json(&out_dir.join(INDEX_FILE), &index)?;
    Ok(index)
}
