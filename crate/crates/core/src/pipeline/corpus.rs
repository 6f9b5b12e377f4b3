use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::io::{create_parent, write_landmarks};
use super::PipelineError;
use crate::clustering::{FaceEmbedding, EMBEDDING_DIM};
use crate::manifest::{write_frame_rows, FrameRow};
use crate::rng::{item_rng, item_seed};
use crate::synthetic::{plant_noise, planted_diff, posed_landmarks, textured_image};

/// Shape of a generated demo corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub real_videos: usize,
    pub fakes_per_real: usize,
    pub frames_per_video: usize,
    /// Frames are `size`x`size` pixels.
    pub size: u32,
    /// Number of distinct faces; real video `i` shows face `i % identities`.
    pub identities: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            real_videos: 10,
            fakes_per_real: 1,
            frames_per_video: 5,
            size: 64,
            identities: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub manifest: PathBuf,
    pub embeddings: PathBuf,
    pub frames: usize,
    pub videos: usize,
}

/// Writes a synthetic corpus under `dir`:
///
/// - `frames/<video>/<frame>.png` with a `.landmarks.json` sidecar each,
/// - `manifest.csv` listing every frame,
/// - `embeddings.jsonl` with one embedding per real frame, grouped by face.
///
/// Fake frames copy their source frame and replace a small patch around a
/// landmark with noise.
pub fn write_synthetic_corpus(dir: &Path, spec: &CorpusSpec) -> Result<CorpusSummary, PipelineError> {
    if spec.real_videos == 0 || spec.frames_per_video == 0 || spec.identities == 0 || spec.size < 16 {
        return Err(PipelineError::InvalidConfig(
            "corpus needs videos, frames, identities and size >= 16".into(),
        ));
    }
    let size = spec.size;
    let mut centre_rng = ChaCha8Rng::seed_from_u64(item_seed(spec.seed, "identities"));
    let centres: Vec<Vec<f64>> = (0..spec.identities)
        .map(|_| (0..EMBEDDING_DIM).map(|_| centre_rng.random_range(-1.0..1.0)).collect())
        .collect();

    let mut rows = Vec::new();
    let mut embeddings = Vec::new();
    for r in 0..spec.real_videos {
        let real_id = format!("real_{r:04}");
        for f in 0..spec.frames_per_video {
            let frame_id = 10 * f as u64;
            let frame_key = format!("{real_id}/{frame_id}");
            let mut rng = item_rng(spec.seed, &frame_key);
            let landmarks = posed_landmarks(size, size, &mut rng);
            let real = textured_image(size, size, rng.random());
            let real_rel = format!("frames/{real_id}/{frame_id}.png");
            save_frame(dir, &real_rel, &real, &landmarks)?;
            rows.push(FrameRow {
                video_id: real_id.clone(),
                frame_id,
                path: real_rel,
                label: "real".into(),
                source_video_id: None,
            });
            let centre = &centres[r % spec.identities];
            embeddings.push(FaceEmbedding {
                video_id: real_id.clone(),
                frame_id,
                vector: centre.iter().map(|c| c + rng.random_range(-0.02..0.02)).collect(),
            });

            for k in 0..spec.fakes_per_real {
                let fake_id = format!("fake_{r:04}_{k}");
                let mut fake_rng = item_rng(spec.seed, &format!("{fake_id}/{frame_id}"));
                let region = planted_diff(&landmarks, size, size, &mut fake_rng);
                let fake = plant_noise(&real, &region, fake_rng.random());
                let fake_rel = format!("frames/{fake_id}/{frame_id}.png");
                save_frame(dir, &fake_rel, &fake, &landmarks)?;
                rows.push(FrameRow {
                    video_id: fake_id,
                    frame_id,
                    path: fake_rel,
                    label: "fake".into(),
                    source_video_id: Some(real_id.clone()),
                });
            }
        }
    }

    let manifest = dir.join("manifest.csv");
    write_frame_rows(&manifest, &rows)?;
    let emb_path = dir.join("embeddings.jsonl");
    let file = File::create(&emb_path).map_err(|e| PipelineError::io(&emb_path, e))?;
    let mut w = BufWriter::new(file);
    for e in &embeddings {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n").map_err(|e| PipelineError::io(&emb_path, e))?;
    }
    w.flush().map_err(|e| PipelineError::io(&emb_path, e))?;
    Ok(CorpusSummary {
        manifest,
        embeddings: emb_path,
        frames: rows.len(),
        videos: spec.real_videos * (1 + spec.fakes_per_real),
    })
}

fn save_frame(
    dir: &Path,
    rel: &str,
    image: &image::RgbImage,
    landmarks: &crate::geometry::Landmarks68,
) -> Result<(), PipelineError> {
    let path = dir.join(rel);
    create_parent(&path)?;
    image
        .save_with_format(&path, image::ImageFormat::Png)
        .map_err(|e| PipelineError::image(&path, e))?;
    write_landmarks(&dir.join(format!("{rel}.landmarks.json")), landmarks)
}
