//! Identity-disjoint dataset splits.
//!
//! Whole clusters are the unit of assignment, so a face that appears in the
//! training data never appears in validation or test data. Noise videos form
//! one extra unit: an unidentified face must not straddle splits either.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusterLabel;
use crate::manifest::{DatasetManifest, ManifestError};

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("need at least {needed} clusters, found {found}")]
    TooFewClusters { needed: usize, found: usize },
    #[error("invalid ratios: {0}")]
    BadRatios(String),
    #[error("K must be >= 2, got {0}")]
    BadFoldCount(usize),
    #[error("video `{0}` has no split assignment")]
    UnassignedVideo(String),
    #[error("bad split value `{0}`")]
    BadAssignment(String),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Assignment {
    Train,
    Val,
    Test,
    Fold(usize),
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assignment::Train => f.write_str("train"),
            Assignment::Val => f.write_str("val"),
            Assignment::Test => f.write_str("test"),
            Assignment::Fold(i) => write!(f, "fold:{i}"),
        }
    }
}

impl FromStr for Assignment {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "train" => Ok(Assignment::Train),
            "val" => Ok(Assignment::Val),
            "test" => Ok(Assignment::Test),
            other => other
                .strip_prefix("fold:")
                .and_then(|i| i.parse().ok())
                .map(Assignment::Fold)
                .ok_or_else(|| SplitError::BadAssignment(other.to_string())),
        }
    }
}

/// Target fractions for train / val / test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self, SplitError> {
        let r = Self { train, val, test };
        let parts = r.as_array();
        if parts.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SplitError::BadRatios(format!("{train}, {val}, {test} must all be positive")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(SplitError::BadRatios(format!("sum is {sum}, expected 1")));
        }
        Ok(r)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl FromStr for SplitRatios {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| SplitError::BadRatios(e.to_string()))?;
        match parts.as_slice() {
            [a, b, c] => Self::new(*a, *b, *c),
            _ => Err(SplitError::BadRatios(format!("expected three values, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitPlan {
    pub assignment: BTreeMap<String, Assignment>,
    pub ratios: Option<SplitRatios>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanRow {
    video_id: String,
    split: String,
}

impl SplitPlan {
    pub fn get(&self, video_id: &str) -> Option<Assignment> {
        self.assignment.get(video_id).copied()
    }

    /// Videos per assignment.
    pub fn counts(&self) -> BTreeMap<Assignment, usize> {
        let mut counts = BTreeMap::new();
        for a in self.assignment.values() {
            *counts.entry(*a).or_default() += 1;
        }
        counts
    }

    /// CSV `video_id,split`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), SplitError> {
        let mut w = csv::Writer::from_writer(writer);
        for (video_id, a) in &self.assignment {
            w.serialize(PlanRow {
                video_id: video_id.clone(),
                split: a.to_string(),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self, SplitError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut assignment = BTreeMap::new();
        for row in r.deserialize() {
            let row: PlanRow = row?;
            assignment.insert(row.video_id, row.split.parse()?);
        }
        Ok(Self {
            assignment,
            ratios: None,
        })
    }
}

/// Clusters as (label, member videos), in label order.
fn units(manifest: &DatasetManifest) -> Result<Vec<(ClusterLabel, Vec<&str>)>, SplitError> {
    Ok(manifest.cluster_groups()?.into_iter().collect())
}

fn shuffled_units(manifest: &DatasetManifest, seed: u64) -> Result<Vec<(ClusterLabel, Vec<&str>)>, SplitError> {
    let mut units = units(manifest)?;
    units.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(units)
}

/// What [`cluster_split_by`] balances across splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Balance {
    #[default]
    Videos,
    Frames,
}

impl FromStr for Balance {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "videos" => Ok(Balance::Videos),
            "frames" => Ok(Balance::Frames),
            other => Err(SplitError::BadRatios(format!("unknown balance `{other}`"))),
        }
    }
}

/// Splits clusters into train / val / test, balancing video counts.
///
/// Clusters are visited in seeded random order; each goes to the split whose
/// video count is furthest below its target (ties to train, then val).
pub fn cluster_split(manifest: &DatasetManifest, ratios: SplitRatios, seed: u64) -> Result<SplitPlan, SplitError> {
    cluster_split_by(manifest, ratios, seed, Balance::Videos)
}

/// [`cluster_split`] with a choice of weight: one per video, or the video's frame count.
pub fn cluster_split_by(
    manifest: &DatasetManifest,
    ratios: SplitRatios,
    seed: u64,
    balance: Balance,
) -> Result<SplitPlan, SplitError> {
    let ratios = SplitRatios::new(ratios.train, ratios.val, ratios.test)?;
    let units = shuffled_units(manifest, seed)?;
    if units.len() < 3 {
        return Err(SplitError::TooFewClusters {
            needed: 3,
            found: units.len(),
        });
    }
    let frames: BTreeMap<&str, usize> = manifest
        .records()
        .iter()
        .map(|r| (r.video_id.as_str(), r.n_frames))
        .collect();
    let weight = |video: &str| match balance {
        Balance::Videos => 1,
        Balance::Frames => frames.get(video).copied().unwrap_or(0),
    };
    let total = manifest.records().iter().map(|r| weight(&r.video_id)).sum::<usize>() as f64;
    let targets = ratios.as_array().map(|r| r * total);
    let tol = 1e-9 * total.max(1.0);
    let kinds = [Assignment::Train, Assignment::Val, Assignment::Test];
    let mut counts = [0usize; 3];
    let mut assignment = BTreeMap::new();
    for (_, videos) in units {
        let mut pick = 0;
        for k in 1..3 {
            let deficit = |j: usize| targets[j] - counts[j] as f64;
            if deficit(k) > deficit(pick) + tol {
                pick = k;
            }
        }
        counts[pick] += videos.iter().map(|v| weight(v)).sum::<usize>();
        for v in videos {
            assignment.insert(v.to_string(), kinds[pick]);
        }
    }
    Ok(SplitPlan {
        assignment,
        ratios: Some(ratios),
    })
}

/// Deals shuffled clusters round-robin into `k` folds.
fn fold_units(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<Vec<Vec<Vec<&str>>>, SplitError> {
    if k < 2 {
        return Err(SplitError::BadFoldCount(k));
    }
    let units = shuffled_units(manifest, seed)?;
    if units.len() < k {
        return Err(SplitError::TooFewClusters {
            needed: k,
            found: units.len(),
        });
    }
    let mut folds: Vec<Vec<Vec<&str>>> = vec![Vec::new(); k];
    for (i, (_, videos)) in units.into_iter().enumerate() {
        folds[i % k].push(videos);
    }
    Ok(folds)
}

/// K cross-validation plans; plan `i` validates on fold `i` and trains on the rest.
pub fn kfold_by_cluster(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<Vec<SplitPlan>, SplitError> {
    let folds = fold_units(manifest, k, seed)?;
    Ok((0..k)
        .map(|held_out| {
            let mut assignment = BTreeMap::new();
            for (f, fold) in folds.iter().enumerate() {
                let a = if f == held_out { Assignment::Val } else { Assignment::Train };
                for v in fold.iter().flatten() {
                    assignment.insert(v.to_string(), a);
                }
            }
            SplitPlan {
                assignment,
                ratios: None,
            }
        })
        .collect())
}

/// The same folds as [`kfold_by_cluster`] in one plan, each video tagged `fold:i`.
pub fn fold_plan(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<SplitPlan, SplitError> {
    let folds = fold_units(manifest, k, seed)?;
    let mut assignment = BTreeMap::new();
    for (f, fold) in folds.iter().enumerate() {
        for v in fold.iter().flatten() {
            assignment.insert(v.to_string(), Assignment::Fold(f));
        }
    }
    Ok(SplitPlan {
        assignment,
        ratios: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakReport {
    /// Cluster ids (-1 for noise) whose videos land in more than one split.
    pub leaks: Vec<i64>,
    pub ok: bool,
}

/// Lists clusters whose videos are spread over more than one assignment.
pub fn leak_audit(plan: &SplitPlan, manifest: &DatasetManifest) -> Result<LeakReport, SplitError> {
    let mut seen: BTreeMap<ClusterLabel, BTreeSet<Assignment>> = BTreeMap::new();
    for (video, cluster) in manifest.clusters()? {
        let a = plan
            .get(video)
            .ok_or_else(|| SplitError::UnassignedVideo(video.to_string()))?;
        seen.entry(cluster).or_default().insert(a);
    }
    let leaks: Vec<i64> = seen
        .into_iter()
        .filter(|(_, a)| a.len() > 1)
        .map(|(c, _)| c.as_i64())
        .collect();
    Ok(LeakReport {
        ok: leaks.is_empty(),
        leaks,
    })
}
