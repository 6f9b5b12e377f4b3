//! Landmark-guided cutout augmentation.
//!
//! A call first flips a biased coin (`p`). If the image is selected, one
//! landmark family is drawn: eyes, mouth, nose or the face boundary. The
//! family proposes candidate regions, the candidate overlap ratio
//!
//! ```text
//! rho = |region AND diff| / |diff|
//! ```
//!
//! rejects candidates that would erase too much of the manipulated area
//! (`rho > gamma_h`), and the surviving region is overwritten with the fill
//! value. When no difference mask is available (real frames, or a fake whose
//! mask is empty) the overlap test is skipped.

use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    binary_dilate, centroid_quadrants, draw_line, polygon_area, rasterize_polygon, BinaryMask, GeometryError,
    Landmarks68, Polygon,
};
use crate::rng::item_rng;

/// Fraction-of-line-length schedule for the five sensory band candidates, in
/// twentieths (0.05, 0.10, 0.15, 0.20, 0.25).
const SENSORY_TWENTIETHS: [u32; 5] = [1, 2, 3, 4, 5];
/// Candidate used for a sensory group when no overlap test applies.
const SENSORY_DEFAULT_CANDIDATE: usize = 2;
const HULL_MIN_POINTS: usize = 8;
const HULL_MAX_POINTS: usize = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CutoutError {
    #[error("invalid cutout config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimMismatch(u32, u32, u32, u32),
    #[error("difference mask has no set pixels")]
    EmptyDiffMask,
    #[error("landmarks lie far outside the {width}x{height} image")]
    LandmarkImageMismatch { width: u32, height: u32 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FillMode {
    /// Independent uniform byte per pixel and channel.
    Random,
    #[default]
    Zero,
    /// 255 in every channel.
    Max,
}

impl FromStr for FillMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" | "f-r" => Ok(Self::Random),
            "zero" | "f-0" => Ok(Self::Zero),
            "max" | "f-255" => Ok(Self::Max),
            other => Err(format!("unknown fill mode `{other}` (expected random, zero or max)")),
        }
    }
}

/// Which landmark families take part in the random draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CutoutMode {
    /// Eyes, mouth, nose and the boundary hull, one quarter each.
    #[default]
    Combined,
    SensoryOnly,
    HullOnly,
}

impl FromStr for CutoutMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "combined" => Ok(Self::Combined),
            "sensory_only" | "sensory" => Ok(Self::SensoryOnly),
            "hull_only" | "hull" => Ok(Self::HullOnly),
            other => Err(format!("unknown cutout mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoutConfig {
    /// Probability that an image is augmented at all.
    pub p: f64,
    /// Largest admissible overlap ratio.
    pub gamma_h: f64,
    pub fill: FillMode,
    /// Number of random polygons tried by the random-subset hull strategy.
    pub max_attempts: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: CutoutMode,
}

impl Default for CutoutConfig {
    fn default() -> Self {
        Self {
            p: 0.5,
            gamma_h: 0.3,
            fill: FillMode::Zero,
            max_attempts: 5,
            seed: 777,
            mode: CutoutMode::Combined,
        }
    }
}

impl CutoutConfig {
    pub fn validate(&self) -> Result<(), CutoutError> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(CutoutError::InvalidConfig(format!("p = {} not in [0, 1]", self.p)));
        }
        if !(0.0..=1.0).contains(&self.gamma_h) {
            return Err(CutoutError::InvalidConfig(format!("gamma_h = {} not in [0, 1]", self.gamma_h)));
        }
        if self.max_attempts == 0 {
            return Err(CutoutError::InvalidConfig("max_attempts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Eyes,
    Nose,
    Mouth,
    HullRandomSubset,
    HullConsecutive,
    HullQuadrant,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Eyes,
        Strategy::Nose,
        Strategy::Mouth,
        Strategy::HullRandomSubset,
        Strategy::HullConsecutive,
        Strategy::HullQuadrant,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Eyes => "eyes",
            Strategy::Nose => "nose",
            Strategy::Mouth => "mouth",
            Strategy::HullRandomSubset => "hull_random_subset",
            Strategy::HullConsecutive => "hull_consecutive",
            Strategy::HullQuadrant => "hull_quadrant",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensoryGroup {
    Eyes,
    Nose,
    Mouth,
}

impl SensoryGroup {
    /// Landmark indices of the segment that seeds the band.
    pub fn terminals(&self) -> (usize, usize) {
        match self {
            SensoryGroup::Eyes => (36, 45),
            SensoryGroup::Nose => (27, 33),
            SensoryGroup::Mouth => (48, 54),
        }
    }

    pub fn strategy(&self) -> Strategy {
        match self {
            SensoryGroup::Eyes => Strategy::Eyes,
            SensoryGroup::Nose => Strategy::Nose,
            SensoryGroup::Mouth => Strategy::Mouth,
        }
    }
}

/// A selected cutout region and how it was chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoutRegion {
    pub raster: BinaryMask,
    pub strategy: Strategy,
    /// Index of the winning candidate within its strategy.
    pub candidate: usize,
    /// `None` when the overlap test did not apply.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentOutcome {
    pub image: RgbImage,
    pub applied: bool,
    pub region: Option<CutoutRegion>,
}

/// Overlap ratio `|region AND diff| / |diff|`.
pub fn overlap_ratio(region: &BinaryMask, diff: &BinaryMask) -> Result<f64, CutoutError> {
    if region.dims() != diff.dims() {
        return Err(CutoutError::DimMismatch(
            region.width(),
            region.height(),
            diff.width(),
            diff.height(),
        ));
    }
    let total = diff.count_ones();
    if total == 0 {
        return Err(CutoutError::EmptyDiffMask);
    }
    Ok(region.intersection_count(diff)? as f64 / total as f64)
}

/// The difference mask as far as the overlap test is concerned: absent when
/// missing or empty.
struct DiffGate<'a> {
    mask: &'a BinaryMask,
    total: usize,
}

impl<'a> DiffGate<'a> {
    fn new(diff: Option<&'a BinaryMask>) -> Option<Self> {
        let mask = diff?;
        let total = mask.count_ones();
        (total > 0).then_some(Self { mask, total })
    }

    fn rho(&self, region: &BinaryMask) -> f64 {
        // dims are checked once by the caller
        let inside = region
            .data()
            .iter()
            .zip(self.mask.data())
            .filter(|(&a, &b)| a && b)
            .count();
        inside as f64 / self.total as f64
    }
}

fn check_diff_dims(diff: Option<&BinaryMask>, dims: (u32, u32)) -> Result<(), CutoutError> {
    match diff {
        Some(d) if d.dims() != dims => Err(CutoutError::DimMismatch(d.width(), d.height(), dims.0, dims.1)),
        _ => Ok(()),
    }
}

/// Dilation counts for a terminal line of length `d`: `max(1, ceil(d * f))`
/// for `f` in 0.05..=0.25.
pub fn sensory_iterations(line_length: f64) -> [u32; 5] {
    SENSORY_TWENTIETHS.map(|j| ((line_length * j as f64 / 20.0).ceil() as u32).max(1))
}

/// Five nested band candidates around the group's terminal line.
pub fn sensory_candidates(
    landmarks: &Landmarks68,
    group: SensoryGroup,
    width: u32,
    height: u32,
) -> Result<Vec<BinaryMask>, CutoutError> {
    let (i, j) = group.terminals();
    let (a, b) = (landmarks.get(i), landmarks.get(j));
    let line = draw_line(a, b, width, height)?;
    Ok(sensory_iterations(a.distance(&b))
        .iter()
        .map(|&k| binary_dilate(&line, k))
        .collect())
}

/// Picks a sensory band: the minimum-rho qualifying candidate (ties go to the
/// wider band), or the middle band when no overlap test applies.
pub fn sensory_region(
    landmarks: &Landmarks68,
    group: SensoryGroup,
    diff: Option<&BinaryMask>,
    cfg: &CutoutConfig,
    dims: (u32, u32),
) -> Result<Option<CutoutRegion>, CutoutError> {
    check_diff_dims(diff, dims)?;
    let candidates = sensory_candidates(landmarks, group, dims.0, dims.1)?;
    let strategy = group.strategy();
    let Some(gate) = DiffGate::new(diff) else {
        let raster = &candidates[SENSORY_DEFAULT_CANDIDATE];
        return Ok((!raster.is_empty()).then(|| CutoutRegion {
            raster: raster.clone(),
            strategy,
            candidate: SENSORY_DEFAULT_CANDIDATE,
            rho: None,
        }));
    };
    let mut best: Option<(usize, f64)> = None;
    for (idx, cand) in candidates.iter().enumerate() {
        if cand.is_empty() {
            continue;
        }
        let rho = gate.rho(cand);
        if rho > cfg.gamma_h {
            continue;
        }
        if best.is_none_or(|(_, r)| rho <= r) {
            best = Some((idx, rho));
        }
    }
    Ok(best.map(|(idx, rho)| CutoutRegion {
        raster: candidates[idx].clone(),
        strategy,
        candidate: idx,
        rho: Some(rho),
    }))
}

struct Scored {
    index: usize,
    area: f64,
    raster: BinaryMask,
    rho: Option<f64>,
}

/// Rasterizes a candidate and applies the overlap test; `None` when the
/// polygon is degenerate, off-image, or overlaps too much.
fn score_polygon(
    index: usize,
    vertices: Vec<crate::geometry::Point2>,
    gate: Option<&DiffGate<'_>>,
    cfg: &CutoutConfig,
    dims: (u32, u32),
) -> Option<Scored> {
    let poly = Polygon::new(vertices).ok()?;
    let raster = rasterize_polygon(&poly, dims.0, dims.1).ok()?;
    let rho = gate.map(|g| g.rho(&raster));
    if rho.is_some_and(|r| r > cfg.gamma_h) {
        return None;
    }
    Some(Scored {
        index,
        area: polygon_area(&poly),
        raster,
        rho,
    })
}

fn keep_max_area(best: &mut Option<Scored>, cand: Option<Scored>) {
    if let Some(c) = cand {
        if best.as_ref().is_none_or(|b| c.area > b.area) {
            *best = Some(c);
        }
    }
}

/// Random subsets of the 27 boundary landmarks, joined in sampled order.
/// Among `max_attempts` draws the largest qualifying polygon wins.
pub fn hull_random_subset<R: Rng + ?Sized>(
    landmarks: &Landmarks68,
    diff: Option<&BinaryMask>,
    cfg: &CutoutConfig,
    dims: (u32, u32),
    rng: &mut R,
) -> Result<Option<CutoutRegion>, CutoutError> {
    check_diff_dims(diff, dims)?;
    let gate = DiffGate::new(diff);
    let boundary = landmarks.boundary();
    let size = rng.random_range(HULL_MIN_POINTS..=HULL_MAX_POINTS);
    let mut order: Vec<usize> = (0..boundary.len()).collect();
    let mut best = None;
    for attempt in 0..cfg.max_attempts {
        let (picked, _) = order.partial_shuffle(rng, size);
        let vertices = picked.iter().map(|&i| boundary[i]).collect();
        keep_max_area(&mut best, score_polygon(attempt, vertices, gate.as_ref(), cfg, dims));
    }
    Ok(best.map(|s| CutoutRegion {
        raster: s.raster,
        strategy: Strategy::HullRandomSubset,
        candidate: s.index,
        rho: s.rho,
    }))
}

/// Sliding windows of `window` consecutive boundary landmarks (no wrap-around);
/// the largest qualifying polygon wins, ties to the earliest start.
pub fn hull_consecutive_windows(
    landmarks: &Landmarks68,
    diff: Option<&BinaryMask>,
    cfg: &CutoutConfig,
    dims: (u32, u32),
    window: usize,
) -> Result<Option<CutoutRegion>, CutoutError> {
    check_diff_dims(diff, dims)?;
    let boundary = landmarks.boundary();
    if window < 3 || window > boundary.len() {
        return Err(CutoutError::InvalidConfig(format!("window {window} out of range")));
    }
    let gate = DiffGate::new(diff);
    let mut best = None;
    for start in 0..=boundary.len() - window {
        let vertices = boundary[start..start + window].to_vec();
        keep_max_area(&mut best, score_polygon(start, vertices, gate.as_ref(), cfg, dims));
    }
    Ok(best.map(|s| CutoutRegion {
        raster: s.raster,
        strategy: Strategy::HullConsecutive,
        candidate: s.index,
        rho: s.rho,
    }))
}

pub fn hull_consecutive<R: Rng + ?Sized>(
    landmarks: &Landmarks68,
    diff: Option<&BinaryMask>,
    cfg: &CutoutConfig,
    dims: (u32, u32),
    rng: &mut R,
) -> Result<Option<CutoutRegion>, CutoutError> {
    let window = rng.random_range(HULL_MIN_POINTS..=HULL_MAX_POINTS);
    hull_consecutive_windows(landmarks, diff, cfg, dims, window)
}

/// Splits the face outline into four quadrants around its centroid. With a
/// difference mask the minimum-rho qualifying quadrant wins (ties to the
/// lower index); otherwise a non-empty quadrant is drawn uniformly.
pub fn hull_quadrant<R: Rng + ?Sized>(
    landmarks: &Landmarks68,
    diff: Option<&BinaryMask>,
    cfg: &CutoutConfig,
    dims: (u32, u32),
    rng: &mut R,
) -> Result<Option<CutoutRegion>, CutoutError> {
    check_diff_dims(diff, dims)?;
    let outline = Polygon::new(landmarks.face_outline())?;
    let quadrants = centroid_quadrants(&outline, dims.0, dims.1)?;
    let region = |idx: usize, rho: Option<f64>| CutoutRegion {
        raster: quadrants[idx].clone(),
        strategy: Strategy::HullQuadrant,
        candidate: idx,
        rho,
    };
    match DiffGate::new(diff) {
        Some(gate) => {
            let mut best: Option<(usize, f64)> = None;
            for (idx, q) in quadrants.iter().enumerate() {
                if q.is_empty() {
                    continue;
                }
                let rho = gate.rho(q);
                if rho <= cfg.gamma_h && best.is_none_or(|(_, r)| rho < r) {
                    best = Some((idx, rho));
                }
            }
            Ok(best.map(|(idx, rho)| region(idx, Some(rho))))
        }
        None => {
            let nonempty: Vec<usize> = (0..4).filter(|&i| !quadrants[i].is_empty()).collect();
            if nonempty.is_empty() {
                return Ok(None);
            }
            let idx = nonempty[rng.random_range(0..nonempty.len())];
            Ok(Some(region(idx, None)))
        }
    }
}

/// Overwrites the pixels under `region`; everything else is left untouched.
pub fn fill_region<R: Rng + ?Sized>(
    image: &RgbImage,
    region: &BinaryMask,
    fill: FillMode,
    rng: &mut R,
) -> Result<RgbImage, CutoutError> {
    if image.dimensions() != region.dims() {
        return Err(CutoutError::DimMismatch(
            image.width(),
            image.height(),
            region.width(),
            region.height(),
        ));
    }
    let mut out = image.clone();
    for (x, y) in region.iter_ones() {
        let px = out.get_pixel_mut(x, y);
        px.0 = match fill {
            FillMode::Zero => [0; 3],
            FillMode::Max => [255; 3],
            FillMode::Random => [rng.random(), rng.random(), rng.random()],
        };
    }
    Ok(out)
}

fn check_landmarks(landmarks: &Landmarks68, width: u32, height: u32) -> Result<(), CutoutError> {
    let (w, h) = (width as f64, height as f64);
    let off = landmarks
        .points()
        .iter()
        .any(|p| p.x >= 2.0 * w || p.y >= 2.0 * h || p.x <= -w || p.y <= -h);
    if off {
        return Err(CutoutError::LandmarkImageMismatch { width, height });
    }
    Ok(())
}

/// Draws the strategy for one augmentation.
fn draw_strategy<R: Rng + ?Sized>(mode: CutoutMode, rng: &mut R) -> Strategy {
    const HULLS: [Strategy; 3] = [Strategy::HullRandomSubset, Strategy::HullConsecutive, Strategy::HullQuadrant];
    let family = match mode {
        CutoutMode::Combined => rng.random_range(0..4),
        CutoutMode::SensoryOnly => rng.random_range(0..3),
        CutoutMode::HullOnly => 3,
    };
    match family {
        0 => Strategy::Eyes,
        1 => Strategy::Mouth,
        2 => Strategy::Nose,
        _ => HULLS[rng.random_range(0..3)],
    }
}

/// Proposes and selects a region with `strategy`. Degenerate landmark
/// geometry yields no region rather than an error.
pub fn propose_region<R: Rng + ?Sized>(
    strategy: Strategy,
    landmarks: &Landmarks68,
    diff: Option<&BinaryMask>,
    cfg: &CutoutConfig,
    dims: (u32, u32),
    rng: &mut R,
) -> Result<Option<CutoutRegion>, CutoutError> {
    let result = match strategy {
        Strategy::Eyes => sensory_region(landmarks, SensoryGroup::Eyes, diff, cfg, dims),
        Strategy::Nose => sensory_region(landmarks, SensoryGroup::Nose, diff, cfg, dims),
        Strategy::Mouth => sensory_region(landmarks, SensoryGroup::Mouth, diff, cfg, dims),
        Strategy::HullRandomSubset => hull_random_subset(landmarks, diff, cfg, dims, rng),
        Strategy::HullConsecutive => hull_consecutive(landmarks, diff, cfg, dims, rng),
        Strategy::HullQuadrant => hull_quadrant(landmarks, diff, cfg, dims, rng),
    };
    match result {
        Err(CutoutError::Geometry(e)) => {
            log::debug!("{strategy} proposal skipped: {e}");
            Ok(None)
        }
        other => other,
    }
}

/// Augments one image.
///
/// The random stream is derived from `(cfg.seed, image_id)` only, so the
/// outcome for an image does not depend on which other images are processed
/// or in what order.
pub fn face_cutout(
    image: &RgbImage,
    landmarks: &Landmarks68,
    diff: Option<&BinaryMask>,
    cfg: &CutoutConfig,
    image_id: &str,
) -> Result<AugmentOutcome, CutoutError> {
    cfg.validate()?;
    let dims = image.dimensions();
    if dims.0 == 0 || dims.1 == 0 {
        return Err(CutoutError::Geometry(GeometryError::EmptyImage));
    }
    check_landmarks(landmarks, dims.0, dims.1)?;
    check_diff_dims(diff, dims)?;

    let passthrough = || AugmentOutcome {
        image: image.clone(),
        applied: false,
        region: None,
    };
    let mut rng = item_rng(cfg.seed, image_id);
    if rng.random::<f64>() >= cfg.p {
        return Ok(passthrough());
    }
    let strategy = draw_strategy(cfg.mode, &mut rng);
    let Some(region) = propose_region(strategy, landmarks, diff, cfg, dims, &mut rng)? else {
        return Ok(passthrough());
    };
    let image = fill_region(image, &region.raster, cfg.fill, &mut rng)?;
    Ok(AugmentOutcome {
        image,
        applied: true,
        region: Some(region),
    })
}
