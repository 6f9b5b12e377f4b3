use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageFormat, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::{create_parent, load_image, load_landmarks, output_path, resolve_path, sidecar_path, write_json};
use super::masks::mask_path;
use super::{thread_pool, PipelineError};
use crate::cutout::{face_cutout, CutoutConfig};
use crate::geometry::BinaryMask;
use crate::manifest::{read_frame_rows, FrameRow, VideoLabel};
use crate::simmask::{difference_mask, DEFAULT_SSIM_THRESHOLD};

pub const REPORT_FILE: &str = "augment_report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobConfig {
    pub manifest: PathBuf,
    /// Root for landmark sidecars; defaults to the manifest directory.
    pub landmarks_dir: Option<PathBuf>,
    /// Precomputed difference masks. Without it, masks for fakes are computed
    /// from the source frame with `ssim_threshold`.
    pub masks_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub cutout: CutoutConfig,
    pub workers: usize,
    pub ssim_threshold: f64,
}

impl JobConfig {
    pub fn new(manifest: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            landmarks_dir: None,
            masks_dir: None,
            output_dir: output_dir.into(),
            cutout: CutoutConfig::default(),
            workers: 1,
            ssim_threshold: DEFAULT_SSIM_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.cutout.validate()?;
        if self.workers == 0 {
            return Err(PipelineError::InvalidConfig("workers must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.ssim_threshold) {
            return Err(PipelineError::InvalidConfig(format!(
                "ssim threshold {} not in [0, 1]",
                self.ssim_threshold
            )));
        }
        if !self.manifest.is_file() {
            return Err(PipelineError::InvalidConfig(format!(
                "manifest {} does not exist",
                self.manifest.display()
            )));
        }
        for dir in [&self.landmarks_dir, &self.masks_dir].into_iter().flatten() {
            if !dir.is_dir() {
                return Err(PipelineError::InvalidConfig(format!("{} is not a directory", dir.display())));
            }
        }
        Ok(())
    }

    fn base_dir(&self) -> &Path {
        self.manifest.parent().unwrap_or(Path::new("."))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemStatus {
    Applied,
    Passthrough,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub image_id: String,
    pub status: ItemStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub total: usize,
    pub applied: usize,
    pub passthrough: usize,
    pub failed: usize,
    pub applied_fraction: f64,
    /// Mean overlap ratio over applied items that had a difference mask.
    pub mean_rho: Option<f64>,
    pub strategies: BTreeMap<String, usize>,
    pub config: CutoutConfig,
    pub items: Vec<ItemOutcome>,
}

impl RunReport {
    fn from_items(items: Vec<ItemOutcome>, config: CutoutConfig) -> Self {
        let count = |s: ItemStatus| items.iter().filter(|i| i.status == s).count();
        let (applied, passthrough, failed) = (
            count(ItemStatus::Applied),
            count(ItemStatus::Passthrough),
            count(ItemStatus::Failed),
        );
        let mut strategies = BTreeMap::new();
        for s in items.iter().filter_map(|i| i.strategy.as_ref()) {
            *strategies.entry(s.clone()).or_default() += 1;
        }
        let rhos: Vec<f64> = items.iter().filter_map(|i| i.rho).collect();
        let mean_rho = (!rhos.is_empty()).then(|| rhos.iter().sum::<f64>() / rhos.len() as f64);
        Self {
            total: items.len(),
            applied,
            passthrough,
            failed,
            applied_fraction: if items.is_empty() {
                0.0
            } else {
                applied as f64 / items.len() as f64
            },
            mean_rho,
            strategies,
            config,
            items,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &ItemOutcome> {
        self.items.iter().filter(|i| i.status == ItemStatus::Failed)
    }
}

struct Job<'a> {
    cfg: &'a JobConfig,
    base_dir: &'a Path,
    reals: HashMap<(&'a str, u64), &'a FrameRow>,
}

impl Job<'_> {
    fn diff_for(&self, row: &FrameRow, image: &RgbImage) -> Result<Option<BinaryMask>, PipelineError> {
        if row.video_label()? == VideoLabel::Real {
            return Ok(None);
        }
        let id = row.image_id();
        if let Some(dir) = &self.cfg.masks_dir {
            let path = mask_path(dir, &row.video_id, row.frame_id);
            if !path.exists() {
                log::warn!("{id}: no mask at {}, augmenting without overlap test", path.display());
                return Ok(None);
            }
            let luma = image::open(&path)
                .map_err(|e| PipelineError::image(&path, e))?
                .to_luma8();
            let mask = BinaryMask::from_luma8(&luma);
            if mask.dims() != image.dimensions() {
                return Err(PipelineError::DimMismatch(
                    mask.width(),
                    mask.height(),
                    image.width(),
                    image.height(),
                ));
            }
            return Ok(Some(mask));
        }
        let source = row.source_video_id.as_deref().unwrap_or_default();
        let Some(real_row) = self.reals.get(&(source, row.frame_id)) else {
            log::warn!("{id}: source frame {source}/{} missing, augmenting without overlap test", row.frame_id);
            return Ok(None);
        };
        let real = load_image(&resolve_path(self.base_dir, &real_row.path))?;
        if real.dimensions() != image.dimensions() {
            return Err(PipelineError::DimMismatch(
                real.width(),
                real.height(),
                image.width(),
                image.height(),
            ));
        }
        Ok(Some(difference_mask(&real, image, self.cfg.ssim_threshold)?))
    }

    fn process(&self, row: &FrameRow) -> Result<ItemOutcome, PipelineError> {
        let input = resolve_path(self.base_dir, &row.path);
        let landmarks = load_landmarks(&sidecar_path(
            self.base_dir,
            self.cfg.landmarks_dir.as_deref(),
            &row.path,
        ))?;
        let image = load_image(&input)?;
        let diff = self.diff_for(row, &image)?;
        let id = row.image_id();
        let outcome = face_cutout(&image, &landmarks, diff.as_ref(), &self.cfg.cutout, &id)?;

        let out = output_path(&self.cfg.output_dir, row);
        create_parent(&out)?;
        if outcome.applied {
            let format = ImageFormat::from_path(&out).unwrap_or(ImageFormat::Png);
            outcome
                .image
                .save_with_format(&out, format)
                .map_err(|e| PipelineError::image(&out, e))?;
        } else {
            fs::copy(&input, &out).map_err(|e| PipelineError::io(&out, e))?;
        }
        let region = outcome.region.as_ref();
        Ok(ItemOutcome {
            image_id: id,
            status: if outcome.applied {
                ItemStatus::Applied
            } else {
                ItemStatus::Passthrough
            },
            strategy: region.map(|r| r.strategy.to_string()),
            rho: region.and_then(|r| r.rho),
            error: None,
        })
    }
}

/// Augments every manifest frame into `output_dir`, mirroring input paths.
///
/// Frames that are not augmented are copied byte for byte. A frame that
/// cannot be processed is recorded as failed without affecting the others.
/// The output tree and report depend only on the seed and the inputs, not on
/// the worker count. The report is also written to `augment_report.json`.
pub fn run_augment(cfg: &JobConfig) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    let mut rows = read_frame_rows(&cfg.manifest)?;
    rows.sort_by(|a, b| (&a.video_id, a.frame_id).cmp(&(&b.video_id, b.frame_id)));
    if let Some(dup) = rows
        .windows(2)
        .find(|w| w[0].video_id == w[1].video_id && w[0].frame_id == w[1].frame_id)
    {
        return Err(PipelineError::InvalidConfig(format!(
            "frame {} listed twice in manifest",
            dup[0].image_id()
        )));
    }
    fs::create_dir_all(&cfg.output_dir).map_err(|e| PipelineError::io(&cfg.output_dir, e))?;

    let mut reals = HashMap::new();
    for row in &rows {
        if row.video_label()? == VideoLabel::Real {
            reals.insert((row.video_id.as_str(), row.frame_id), row);
        }
    }
    let job = Job {
        cfg,
        base_dir: cfg.base_dir(),
        reals,
    };
    let pool = thread_pool(cfg.workers)?;
    let items: Vec<ItemOutcome> = pool.install(|| {
        rows.par_iter()
            .map(|row| {
                job.process(row).unwrap_or_else(|e| {
                    log::warn!("{} failed: {e}", row.image_id());
                    ItemOutcome {
                        image_id: row.image_id(),
                        status: ItemStatus::Failed,
                        strategy: None,
                        rho: None,
                        error: Some(e.to_string()),
                    }
                })
            })
            .collect()
    });
    let report = RunReport::from_items(items, cfg.cutout.clone());
    write_json(&cfg.output_dir.join(REPORT_FILE), &report)?;
    Ok(report)
}
