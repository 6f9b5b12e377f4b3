//! Dataset manifests: per-frame CSV rows and the per-video view used for
//! clustering and splitting.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusterLabel;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("duplicate video id `{0}`")]
    DuplicateVideo(String),
    #[error("fake video `{0}` has no source video")]
    MissingSource(String),
    #[error("video `{0}` has no cluster assignment")]
    Unclustered(String),
    #[error("video `{video}` rows disagree on {field}")]
    InconsistentVideo { video: String, field: &'static str },
    #[error("bad label `{0}` (expected real/fake or 0/1)")]
    BadLabel(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VideoLabel {
    Real,
    Fake,
}

impl VideoLabel {
    /// 1 for fake, 0 for real.
    pub fn as_target(&self) -> u8 {
        match self {
            VideoLabel::Real => 0,
            VideoLabel::Fake => 1,
        }
    }
}

impl FromStr for VideoLabel {
    type Err = ManifestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" | "0" => Ok(VideoLabel::Real),
            "fake" | "1" => Ok(VideoLabel::Fake),
            other => Err(ManifestError::BadLabel(other.to_string())),
        }
    }
}

impl fmt::Display for VideoLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VideoLabel::Real => "real",
            VideoLabel::Fake => "fake",
        })
    }
}

/// One row of the frame manifest CSV
/// (`video_id,frame_id,path,label,source_video_id`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRow {
    pub video_id: String,
    pub frame_id: u64,
    pub path: String,
    pub label: String,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub source_video_id: Option<String>,
}

fn empty_as_none<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    Ok(s.filter(|s| !s.trim().is_empty()))
}

impl FrameRow {
    pub fn video_label(&self) -> Result<VideoLabel, ManifestError> {
        self.label.parse()
    }

    /// Stable identifier of this frame within a run.
    pub fn image_id(&self) -> String {
        format!("{}/{}", self.video_id, self.frame_id)
    }
}

pub fn read_frame_rows(path: &Path) -> Result<Vec<FrameRow>, ManifestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let rows = reader.deserialize().collect::<Result<Vec<FrameRow>, _>>()?;
    for row in &rows {
        row.video_label()?;
    }
    Ok(rows)
}

pub fn write_frame_rows(path: &Path, rows: &[FrameRow]) -> Result<(), ManifestError> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub label: VideoLabel,
    pub source_video_id: Option<String>,
    pub cluster: Option<ClusterLabel>,
    pub n_frames: usize,
}

/// Video-level manifest. Video ids are unique and every fake names a source.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    records: Vec<VideoRecord>,
}

impl DatasetManifest {
    pub fn new(records: Vec<VideoRecord>) -> Result<Self, ManifestError> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.video_id.as_str()) {
                return Err(ManifestError::DuplicateVideo(r.video_id.clone()));
            }
            if r.label == VideoLabel::Fake && r.source_video_id.is_none() {
                return Err(ManifestError::MissingSource(r.video_id.clone()));
            }
        }
        Ok(Self { records })
    }

    /// Collapses frame rows into videos, counting frames.
    pub fn from_frame_rows(rows: &[FrameRow]) -> Result<Self, ManifestError> {
        let mut videos: BTreeMap<&str, VideoRecord> = BTreeMap::new();
        for row in rows {
            let label = row.video_label()?;
            match videos.get_mut(row.video_id.as_str()) {
                Some(rec) => {
                    if rec.label != label {
                        return Err(ManifestError::InconsistentVideo {
                            video: row.video_id.clone(),
                            field: "label",
                        });
                    }
                    if rec.source_video_id != row.source_video_id {
                        return Err(ManifestError::InconsistentVideo {
                            video: row.video_id.clone(),
                            field: "source_video_id",
                        });
                    }
                    rec.n_frames += 1;
                }
                None => {
                    videos.insert(
                        &row.video_id,
                        VideoRecord {
                            video_id: row.video_id.clone(),
                            label,
                            source_video_id: row.source_video_id.clone(),
                            cluster: None,
                            n_frames: 1,
                        },
                    );
                }
            }
        }
        Self::new(videos.into_values().collect())
    }

    pub fn records(&self) -> &[VideoRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, video_id: &str) -> Option<&VideoRecord> {
        self.records.iter().find(|r| r.video_id == video_id)
    }

    /// Cluster of every video; fails on the first unclustered one.
    pub fn clusters(&self) -> Result<Vec<(&str, ClusterLabel)>, ManifestError> {
        self.records
            .iter()
            .map(|r| {
                r.cluster
                    .map(|c| (r.video_id.as_str(), c))
                    .ok_or_else(|| ManifestError::Unclustered(r.video_id.clone()))
            })
            .collect()
    }

    /// Videos grouped by cluster, each group in manifest order.
    pub fn cluster_groups(&self) -> Result<BTreeMap<ClusterLabel, Vec<&str>>, ManifestError> {
        let mut groups: BTreeMap<ClusterLabel, Vec<&str>> = BTreeMap::new();
        for (video, cluster) in self.clusters()? {
            groups.entry(cluster).or_default().push(video);
        }
        Ok(groups)
    }

    pub fn with_clusters(mut self, clusters: &BTreeMap<String, ClusterLabel>) -> Self {
        for r in &mut self.records {
            if let Some(&c) = clusters.get(&r.video_id) {
                r.cluster = Some(c);
            }
        }
        self
    }
}
