use std::io::Cursor;

use image::{GenericImage, ImageFormat, Rgb, RgbImage};

use super::PipelineError;
use crate::cutout::{face_cutout, AugmentOutcome, CutoutConfig, CutoutError};
use crate::geometry::{BinaryMask, Landmarks68};

pub const DIFF_COLOUR: Rgb<u8> = Rgb([255, 0, 0]);
pub const REGION_COLOUR: Rgb<u8> = Rgb([0, 255, 0]);

#[derive(Debug, Clone, PartialEq)]
pub struct Preview {
    /// Original, overlay and augmented panels side by side.
    pub image: RgbImage,
    pub outcome: AugmentOutcome,
}

/// Renders `original | overlay | augmented`.
///
/// The overlay panel is black except for difference-mask pixels (red) and
/// the outline of the chosen region (green). Without a difference mask the
/// overlay stays black.
pub fn preview(
    image: &RgbImage,
    landmarks: &Landmarks68,
    diff: Option<&BinaryMask>,
    cfg: &CutoutConfig,
    image_id: &str,
) -> Result<Preview, CutoutError> {
    let outcome = face_cutout(image, landmarks, diff, cfg, image_id)?;
    let (w, h) = image.dimensions();
    let mut overlay = RgbImage::new(w, h);
    if let Some(diff) = diff.filter(|d| !d.is_empty()) {
        for (x, y) in diff.iter_ones() {
            overlay.put_pixel(x, y, DIFF_COLOUR);
        }
        if let Some(region) = &outcome.region {
            for (x, y) in region.raster.outline().iter_ones() {
                overlay.put_pixel(x, y, REGION_COLOUR);
            }
        }
    }
    let mut canvas = RgbImage::new(3 * w, h);
    for (k, panel) in [image, &overlay, &outcome.image].into_iter().enumerate() {
        canvas
            .copy_from(panel, k as u32 * w, 0)
            .expect("panel fits canvas");
    }
    Ok(Preview { image: canvas, outcome })
}

pub fn preview_png(preview: &Preview) -> Result<Vec<u8>, PipelineError> {
    let mut buf = Cursor::new(Vec::new());
    preview
        .image
        .write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| PipelineError::image("<preview>", e))?;
    Ok(buf.into_inner())
}
