//! Video-level detection metrics: log loss, ROC AUC and average precision,
//! plus frame-to-video score aggregation.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CLIP_EPS: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no frames for video")]
    NoFrames,
    #[error("no scores")]
    EmptyInput,
    #[error("both classes are required")]
    SingleClass,
    #[error("no positive samples")]
    NoPositives,
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("video `{0}` has a label but no predictions")]
    MissingPredictions(String),
    #[error("video `{0}` has predictions but no label")]
    MissingLabel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePrediction {
    pub video_id: String,
    pub frame_id: u64,
    #[serde(rename = "prob")]
    pub prob_fake: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoScore {
    pub video_id: String,
    pub prob_fake: f64,
    /// 1 for fake, 0 for real.
    pub label: u8,
}

impl VideoScore {
    pub fn new(video_id: impl Into<String>, prob_fake: f64, label: u8) -> Result<Self, MetricsError> {
        if !(0.0..=1.0).contains(&prob_fake) {
            return Err(MetricsError::BadProbability(prob_fake));
        }
        if label > 1 {
            return Err(MetricsError::BadLabel(label));
        }
        Ok(Self {
            video_id: video_id.into(),
            prob_fake,
            label,
        })
    }
}

/// Mean of the frame probabilities.
pub fn aggregate_video(frames: &[f64]) -> Result<f64, MetricsError> {
    if frames.is_empty() {
        return Err(MetricsError::NoFrames);
    }
    if let Some(&bad) = frames.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(MetricsError::BadProbability(bad));
    }
    Ok(frames.iter().sum::<f64>() / frames.len() as f64)
}

/// Per-video mean of frame predictions.
pub fn aggregate_by_video(frames: &[FramePrediction]) -> Result<BTreeMap<String, f64>, MetricsError> {
    let mut grouped: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for f in frames {
        grouped.entry(f.video_id.as_str()).or_default().push(f.prob_fake);
    }
    grouped
        .into_iter()
        .map(|(v, probs)| Ok((v.to_string(), aggregate_video(&probs)?)))
        .collect()
}

/// Joins per-video probabilities with labels; both sides must cover the same videos.
pub fn join_labels(
    probs: &BTreeMap<String, f64>,
    labels: &BTreeMap<String, u8>,
) -> Result<Vec<VideoScore>, MetricsError> {
    if let Some(v) = probs.keys().find(|v| !labels.contains_key(*v)) {
        return Err(MetricsError::MissingLabel(v.clone()));
    }
    labels
        .iter()
        .map(|(v, &label)| {
            let p = probs
                .get(v)
                .ok_or_else(|| MetricsError::MissingPredictions(v.clone()))?;
            VideoScore::new(v.clone(), *p, label)
        })
        .collect()
}

/// Mean binary cross-entropy with probabilities clipped to `[eps, 1 - eps]`.
///
/// Terms are summed in video-id order so the result does not depend on input order.
pub fn log_loss(scores: &[VideoScore], eps: f64) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut sorted: Vec<&VideoScore> = scores.iter().collect();
    sorted.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let total: f64 = sorted
        .iter()
        .map(|s| {
            let p = s.prob_fake.clamp(eps, 1.0 - eps);
            if s.label == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / scores.len() as f64)
}

/// Probability that a random fake outscores a random real, ties counting half.
///
/// Computed from sorted ranks; the pair count is kept as an integer so the
/// result is the exact ratio `(2 * wins + ties) / (2 * n_fake * n_real)`.
pub fn roc_auc(scores: &[VideoScore]) -> Result<f64, MetricsError> {
    let n_pos = scores.iter().filter(|s| s.label == 1).count() as u64;
    let n_neg = scores.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut sorted: Vec<&VideoScore> = scores.iter().collect();
    sorted.sort_by(|a, b| a.prob_fake.total_cmp(&b.prob_fake));

    // doubled wins + ties over all (fake, real) pairs
    let mut twice_u: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].prob_fake == sorted[i].prob_fake {
            j += 1;
        }
        let group = &sorted[i..j];
        let pos = group.iter().filter(|s| s.label == 1).count() as u64;
        let neg = group.len() as u64 - pos;
        twice_u += pos * (2 * negatives_below + neg);
        negatives_below += neg;
        i = j;
    }
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

fn ranking(scores: &[VideoScore]) -> Vec<&VideoScore> {
    let mut ranked: Vec<&VideoScore> = scores.iter().collect();
    ranked.sort_by(|a, b| match b.prob_fake.total_cmp(&a.prob_fake) {
        Ordering::Equal => a.video_id.cmp(&b.video_id),
        o => o,
    });
    ranked
}

/// Step-wise area under the precision-recall curve,
/// `sum_n (R_n - R_{n-1}) * P_n`, over the ranking by descending score
/// (ties ordered by video id).
pub fn average_precision(scores: &[VideoScore]) -> Result<f64, MetricsError> {
    let n_pos = scores.iter().filter(|s| s.label == 1).count();
    if n_pos == 0 {
        return Err(MetricsError::NoPositives);
    }
    let mut tp = 0usize;
    let mut sum = 0.0;
    for (rank, s) in ranking(scores).into_iter().enumerate() {
        if s.label == 1 {
            tp += 1;
            sum += tp as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub logloss: f64,
    pub auc: f64,
    pub ap: f64,
    pub n_videos: usize,
}

pub fn evaluate(scores: &[VideoScore], eps: f64) -> Result<MetricsReport, MetricsError> {
    Ok(MetricsReport {
        logloss: log_loss(scores, eps)?,
        auc: roc_auc(scores)?,
        ap: average_precision(scores)?,
        n_videos: scores.len(),
    })
}

#[derive(Debug, Error)]
pub enum MetricsIoError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Reads `video_id,frame_id,prob` rows.
pub fn read_predictions<R: std::io::Read>(reader: R) -> Result<Vec<FramePrediction>, MetricsIoError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: FramePrediction = row?;
        if !(0.0..=1.0).contains(&row.prob_fake) {
            return Err(MetricsError::BadProbability(row.prob_fake).into());
        }
        out.push(row);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct LabelRow {
    video_id: String,
    label: String,
}

/// Reads `video_id,label` rows; labels are `0`/`1` or `real`/`fake`.
pub fn read_labels<R: std::io::Read>(reader: R) -> Result<BTreeMap<String, u8>, MetricsIoError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = BTreeMap::new();
    for (i, row) in r.deserialize().enumerate() {
        let row: LabelRow = row?;
        let label = match row.label.to_ascii_lowercase().as_str() {
            "0" | "real" => 0,
            "1" | "fake" => 1,
            other => {
                return Err(MetricsIoError::Parse {
                    line: i + 2,
                    message: format!("bad label `{other}`"),
                })
            }
        };
        if out.insert(row.video_id.clone(), label).is_some() {
            return Err(MetricsIoError::Parse {
                line: i + 2,
                message: format!("duplicate video `{}`", row.video_id),
            });
        }
    }
    Ok(out)
}
