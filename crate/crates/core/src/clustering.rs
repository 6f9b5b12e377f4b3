//! Identity clustering of face embeddings.
//!
//! Frames are grouped with an exact, order-independent DBSCAN; each real
//! video takes the majority cluster of its frames and every fake inherits
//! the cluster of the real video it was made from. A 2-D PCA projection is
//! provided for plotting.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{DatasetManifest, VideoLabel};

pub const EMBEDDING_DIM: usize = 128;

#[derive(Debug, Error)]
pub enum ClusteringError {
    #[error("no input points")]
    EmptyInput,
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("non-finite coordinate in point {0}")]
    NonFinite(usize),
    #[error("invalid DBSCAN parameters: {0}")]
    InvalidParams(String),
    #[error("fake video `{fake}` references unknown real video `{source_video}`")]
    DanglingSource { fake: String, source_video: String },
    #[error("real video `{0}` has no cluster assignment")]
    UnclusteredReal(String),
    #[error("need at least 3 points for PCA, got {0}")]
    TooFewPoints(usize),
    #[error("data has no variance")]
    RankDeficient,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// DBSCAN output label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClusterLabel {
    Cluster(u32),
    Noise,
}

impl ClusterLabel {
    /// Cluster id, or -1 for noise.
    pub fn as_i64(&self) -> i64 {
        match self {
            ClusterLabel::Cluster(c) => *c as i64,
            ClusterLabel::Noise => -1,
        }
    }

    pub fn from_i64(v: i64) -> Self {
        if v < 0 {
            ClusterLabel::Noise
        } else {
            ClusterLabel::Cluster(v as u32)
        }
    }

    pub fn is_noise(&self) -> bool {
        matches!(self, ClusterLabel::Noise)
    }
}

impl fmt::Display for ClusterLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i64())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceEmbedding {
    pub video_id: String,
    pub frame_id: u64,
    #[serde(rename = "embedding")]
    pub vector: Vec<f64>,
}

/// Reads `{"video_id", "frame_id", "embedding": [128 floats]}` records, one per line.
pub fn read_embeddings<R: BufRead>(reader: R) -> Result<Vec<FaceEmbedding>, ClusteringError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FaceEmbedding = serde_json::from_str(&line).map_err(|e| ClusteringError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.vector.len() != EMBEDDING_DIM {
            return Err(ClusteringError::Parse {
                line: i + 1,
                message: format!("embedding has {} values, expected {EMBEDDING_DIM}", rec.vector.len()),
            });
        }
        if rec.vector.iter().any(|v| !v.is_finite()) {
            return Err(ClusteringError::Parse {
                line: i + 1,
                message: "non-finite embedding value".into(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_embeddings_file(path: &Path) -> Result<Vec<FaceEmbedding>, ClusteringError> {
    read_embeddings(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    /// Neighbourhood radius (Euclidean, inclusive).
    pub eps: f64,
    /// Neighbours needed for a core point, the point itself included.
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self { eps: 0.5, min_pts: 5 }
    }
}

fn validate_points<P: AsRef<[f64]>>(points: &[P]) -> Result<usize, ClusteringError> {
    let first = points.first().ok_or(ClusteringError::EmptyInput)?;
    let dim = first.as_ref().len();
    for (index, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(ClusteringError::DimensionMismatch {
                index,
                expected: dim,
                found: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(ClusteringError::NonFinite(index));
        }
    }
    Ok(dim)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Density-based clustering.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps`. Clusters are the `eps`-connected components of core points.
/// A border point joins the cluster of its lowest-index core neighbour.
/// Cluster ids are numbered by the smallest member index, so the labelling
/// does not depend on traversal order.
pub fn dbscan<P: AsRef<[f64]> + Sync>(points: &[P], params: DbscanParams) -> Result<Vec<ClusterLabel>, ClusteringError> {
    Ok(dbscan_with_core(points, params)?.labels)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbscanResult {
    pub labels: Vec<ClusterLabel>,
    /// Whether each point is a core point.
    pub core: Vec<bool>,
}

/// [`dbscan`] that also reports which points are core points.
pub fn dbscan_with_core<P: AsRef<[f64]> + Sync>(points: &[P], params: DbscanParams) -> Result<DbscanResult, ClusteringError> {
    if !(params.eps > 0.0 && params.eps.is_finite()) {
        return Err(ClusteringError::InvalidParams(format!("eps = {}", params.eps)));
    }
    if params.min_pts == 0 {
        return Err(ClusteringError::InvalidParams("min_pts must be >= 1".into()));
    }
    validate_points(points)?;
    let n = points.len();
    let eps2 = params.eps * params.eps;

    let neighbours: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = points[i].as_ref();
            (0..n)
                .filter(|&j| squared_distance(pi, points[j].as_ref()) <= eps2)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= params.min_pts).collect();

    // connected components of core points
    let mut component: Vec<Option<usize>> = vec![None; n];
    let mut n_components = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if !core[start] || component[start].is_some() {
            continue;
        }
        component[start] = Some(n_components);
        stack.push(start);
        while let Some(p) = stack.pop() {
            for &q in &neighbours[p] {
                if core[q] && component[q].is_none() {
                    component[q] = Some(n_components);
                    stack.push(q);
                }
            }
        }
        n_components += 1;
    }

    // border points: neighbour lists are ascending, so the first core hit is the lowest index
    for i in 0..n {
        if !core[i] {
            component[i] = neighbours[i].iter().find(|&&j| core[j]).and_then(|&j| component[j]);
        }
    }

    // renumber by smallest member index
    let mut renumber: Vec<Option<u32>> = vec![None; n_components];
    let mut next = 0u32;
    let labels = component
        .iter()
        .map(|c| match c {
            Some(c) => {
                let id = *renumber[*c].get_or_insert_with(|| {
                    next += 1;
                    next - 1
                });
                ClusterLabel::Cluster(id)
            }
            None => ClusterLabel::Noise,
        })
        .collect();
    Ok(DbscanResult { labels, core })
}

/// Video id to cluster.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClusterAssignment(BTreeMap<String, ClusterLabel>);

#[derive(Debug, Serialize, Deserialize)]
struct ClusterRow {
    video_id: String,
    cluster_id: i64,
}

impl ClusterAssignment {
    pub fn new(map: BTreeMap<String, ClusterLabel>) -> Self {
        Self(map)
    }

    pub fn get(&self, video_id: &str) -> Option<ClusterLabel> {
        self.0.get(video_id).copied()
    }

    pub fn insert(&mut self, video_id: impl Into<String>, label: ClusterLabel) {
        self.0.insert(video_id.into(), label);
    }

    pub fn as_map(&self) -> &BTreeMap<String, ClusterLabel> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ClusterLabel)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Number of videos per label.
    pub fn counts(&self) -> BTreeMap<ClusterLabel, usize> {
        let mut counts = BTreeMap::new();
        for label in self.0.values() {
            *counts.entry(*label).or_default() += 1;
        }
        counts
    }

    /// CSV `video_id,cluster_id`, noise written as -1.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), ClusteringError> {
        let mut w = csv::Writer::from_writer(writer);
        for (video_id, label) in &self.0 {
            w.serialize(ClusterRow {
                video_id: video_id.clone(),
                cluster_id: label.as_i64(),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self, ClusteringError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut map = BTreeMap::new();
        for row in r.deserialize() {
            let row: ClusterRow = row?;
            map.insert(row.video_id, ClusterLabel::from_i64(row.cluster_id));
        }
        Ok(Self(map))
    }
}

/// Clusters every frame, then gives each video the most common non-noise
/// cluster among its frames (ties to the smaller id; all-noise videos are noise).
///
/// Frames are sorted by `(video_id, frame_id)` first, so cluster ids and tie
/// breaks do not depend on input order.
pub fn video_clusters(embeddings: &[FaceEmbedding], params: DbscanParams) -> Result<ClusterAssignment, ClusteringError> {
    let mut sorted: Vec<&FaceEmbedding> = embeddings.iter().collect();
    sorted.sort_by(|a, b| (&a.video_id, a.frame_id).cmp(&(&b.video_id, b.frame_id)));
    let vectors: Vec<&[f64]> = sorted.iter().map(|e| e.vector.as_slice()).collect();
    let labels = dbscan(&vectors, params)?;
    let mut votes: BTreeMap<&str, BTreeMap<u32, usize>> = BTreeMap::new();
    for (emb, label) in sorted.iter().zip(&labels) {
        let tally = votes.entry(emb.video_id.as_str()).or_default();
        if let ClusterLabel::Cluster(c) = label {
            *tally.entry(*c).or_default() += 1;
        }
    }
    let map = votes
        .into_iter()
        .map(|(video, tally)| {
            // iteration is ascending by id and max_by keeps the last maximum,
            // so compare on (count, Reverse(id))
            let best = tally
                .iter()
                .max_by_key(|(&id, &count)| (count, std::cmp::Reverse(id)))
                .map_or(ClusterLabel::Noise, |(&id, _)| ClusterLabel::Cluster(id));
            (video.to_string(), best)
        })
        .collect();
    Ok(ClusterAssignment(map))
}

/// Extends a real-video assignment to the whole manifest: fakes take their
/// source video's cluster.
pub fn propagate_to_fakes(
    assign: &ClusterAssignment,
    manifest: &DatasetManifest,
) -> Result<ClusterAssignment, ClusteringError> {
    let mut out = BTreeMap::new();
    for rec in manifest.records() {
        let label = match rec.label {
            VideoLabel::Real => assign
                .get(&rec.video_id)
                .ok_or_else(|| ClusteringError::UnclusteredReal(rec.video_id.clone()))?,
            VideoLabel::Fake => {
                let source = rec.source_video_id.as_deref().unwrap_or_default();
                let is_real_source = manifest.get(source).is_some_and(|r| r.label == VideoLabel::Real);
                if !is_real_source {
                    return Err(ClusteringError::DanglingSource {
                        fake: rec.video_id.clone(),
                        source_video: source.to_string(),
                    });
                }
                assign
                    .get(source)
                    .ok_or_else(|| ClusteringError::UnclusteredReal(source.to_string()))?
            }
        };
        out.insert(rec.video_id.clone(), label);
    }
    Ok(ClusterAssignment(out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub coords: Vec<[f64; 2]>,
    /// Share of total variance carried by each of the two components.
    pub explained_variance_ratio: [f64; 2],
    pub components: [Vec<f64>; 2],
    pub mean: Vec<f64>,
}

/// Projects centred data onto the two leading covariance eigenvectors.
///
/// Each component is signed so that its largest-magnitude coordinate is positive.
pub fn pca_2d<P: AsRef<[f64]> + Sync>(points: &[P]) -> Result<PcaProjection, ClusteringError> {
    let dim = validate_points(points)?;
    let n = points.len();
    if n < 3 {
        return Err(ClusteringError::TooFewPoints(n));
    }
    let mut mean = vec![0.0; dim];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p.as_ref()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centred = DMatrix::from_fn(n, dim, |i, j| points[i].as_ref()[j] - mean[j]);
    let cov = (centred.transpose() * &centred) / (n as f64 - 1.0);
    let total_var = cov.trace();
    if total_var < 1e-12 {
        return Err(ClusteringError::RankDeficient);
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let components: [Vec<f64>; 2] = std::array::from_fn(|k| {
        let col = eig.eigenvectors.column(order.get(k).copied().unwrap_or(0));
        let mut v: Vec<f64> = col.iter().copied().collect();
        if order.len() <= k {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
        let pivot = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    });
    let explained_variance_ratio = std::array::from_fn(|k| {
        order
            .get(k)
            .map_or(0.0, |&i| eig.eigenvalues[i].max(0.0) / total_var)
    });
    let coords = (0..n)
        .map(|i| {
            let row = centred.row(i);
            std::array::from_fn(|k| row.iter().zip(&components[k]).map(|(a, b)| a * b).sum())
        })
        .collect();
    Ok(PcaProjection {
        coords,
        explained_variance_ratio,
        components,
        mean,
    })
}

/// CSV `video_id,pc1,pc2`.
pub fn write_pca_csv<W: std::io::Write>(
    writer: W,
    video_ids: &[&str],
    coords: &[[f64; 2]],
) -> Result<(), ClusteringError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["video_id", "pc1", "pc2"])?;
    for (id, c) in video_ids.iter().zip(coords) {
        w.write_record([id.to_string(), c[0].to_string(), c[1].to_string()])?;
    }
    w.flush()?;
    Ok(())
}
