//! `facecut` command-line tool.
//!
//! Exit status: 0 on success, 2 when a batch finished with per-item failures
//! (or an audit found leaks), 1 on a fatal error.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use facecut::clustering::{
    pca_2d, propagate_to_fakes, read_embeddings_file, video_clusters, write_pca_csv, ClusterAssignment, DbscanParams,
};
use facecut::cutout::{CutoutConfig, CutoutMode, FillMode};
use facecut::geometry::BinaryMask;
use facecut::manifest::{read_frame_rows, DatasetManifest};
use facecut::metrics::{aggregate_by_video, evaluate, join_labels, read_labels, read_predictions, DEFAULT_CLIP_EPS};
use facecut::pipeline::{
    build_masks, load_image, mask_jobs_from_manifest, preview, preview_png, read_landmarks, resize_pad, run_augment,
    write_synthetic_corpus, CorpusSpec, JobConfig, MODEL_INPUT_SIZE,
};
use facecut::simmask::DEFAULT_SSIM_THRESHOLD;
use facecut::split::{cluster_split_by, fold_plan, leak_audit, Balance, SplitPlan, SplitRatios};

const PARTIAL_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "facecut", version, about = "Face cutout augmentation and leak-free dataset tooling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute SSIM difference masks for every fake frame in a manifest.
    Mask(MaskArgs),
    /// Augment every frame of a manifest.
    Augment(AugmentArgs),
    /// Cluster face embeddings into identities and label every video.
    Cluster(ClusterArgs),
    /// Split videos into train/val/test (or K folds) by identity cluster.
    Split(SplitArgs),
    /// Check that no identity cluster spans more than one split.
    Audit(AuditArgs),
    /// Video-level log loss, ROC AUC and average precision.
    Eval(EvalArgs),
    /// Render original | overlay | augmented for one image.
    Preview(PreviewArgs),
    /// Resize and zero-pad an image to a square model input.
    Resize(ResizeArgs),
    /// Write a small synthetic corpus (frames, landmarks, manifest, embeddings).
    Synth(SynthArgs),
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SSIM_THRESHOLD)]
    ssim_threshold: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct CutoutArgs {
    #[arg(long, default_value_t = 777)]
    seed: u64,
    /// Probability of augmenting an image.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Largest allowed share of the manipulated area a cutout may cover.
    #[arg(long, default_value_t = 0.3)]
    gamma_h: f64,
    /// random | zero | max
    #[arg(long, default_value = "zero")]
    fill: FillMode,
    /// combined | sensory | hull
    #[arg(long, default_value = "combined")]
    mode: CutoutMode,
    #[arg(long, default_value_t = 5)]
    max_attempts: usize,
}

impl CutoutArgs {
    fn config(&self) -> CutoutConfig {
        CutoutConfig {
            p: self.p,
            gamma_h: self.gamma_h,
            fill: self.fill,
            max_attempts: self.max_attempts,
            seed: self.seed,
            mode: self.mode,
        }
    }
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Root of the landmark sidecars (default: next to the images).
    #[arg(long)]
    landmarks_dir: Option<PathBuf>,
    /// Output of `facecut mask`; without it masks are computed on the fly.
    #[arg(long)]
    masks_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = DEFAULT_SSIM_THRESHOLD)]
    ssim_threshold: f64,
    #[command(flatten)]
    cutout: CutoutArgs,
}

#[derive(Args)]
struct ClusterArgs {
    /// JSON lines of `{"video_id", "frame_id", "embedding"}` for real frames.
    #[arg(long)]
    embeddings: PathBuf,
    /// Frame manifest; fakes inherit their source video's cluster.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 5)]
    min_pts: usize,
    /// Also write a 2-D PCA projection of the embeddings.
    #[arg(long)]
    pca: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output of `facecut cluster`.
    #[arg(long)]
    clusters: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "0.8,0.1,0.1")]
    ratios: SplitRatios,
    /// Assign K folds instead of train/val/test.
    #[arg(long)]
    kfold: Option<usize>,
    /// Balance split sizes by `videos` or `frames`.
    #[arg(long, default_value = "videos")]
    balance: Balance,
    #[arg(long, default_value_t = 777)]
    seed: u64,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    clusters: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// CSV `video_id,frame_id,prob`.
    #[arg(long)]
    predictions: PathBuf,
    /// CSV `video_id,label`.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CLIP_EPS)]
    eps: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PreviewArgs {
    #[arg(long)]
    image: PathBuf,
    /// Landmark sidecar (default: `<image>.landmarks.json`).
    #[arg(long)]
    landmarks: Option<PathBuf>,
    /// Difference mask PNG.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Identifier that keys the random stream (default: the image file name).
    #[arg(long)]
    image_id: Option<String>,
    #[command(flatten)]
    cutout: CutoutArgs,
}

#[derive(Args)]
struct ResizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = MODEL_INPUT_SIZE)]
    size: u32,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    videos: usize,
    #[arg(long, default_value_t = 1)]
    fakes_per_real: usize,
    #[arg(long, default_value_t = 5)]
    frames: usize,
    #[arg(long, default_value_t = 64)]
    size: u32,
    #[arg(long, default_value_t = 4)]
    identities: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Mask(a) => mask(a),
        Command::Augment(a) => augment(a),
        Command::Cluster(a) => cluster(a),
        Command::Split(a) => split(a),
        Command::Audit(a) => audit(a),
        Command::Eval(a) => eval(a),
        Command::Preview(a) => preview_cmd(a),
        Command::Resize(a) => resize(a),
        Command::Synth(a) => synth(a),
    }
}

fn status(partial: bool) -> ExitCode {
    if partial {
        ExitCode::from(PARTIAL_FAILURE)
    } else {
        ExitCode::SUCCESS
    }
}

fn base_dir(manifest: &Path) -> &Path {
    manifest.parent().unwrap_or(Path::new("."))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn mask(a: MaskArgs) -> Result<ExitCode> {
    let rows = read_frame_rows(&a.manifest)?;
    let (jobs, unmatched) = mask_jobs_from_manifest(&rows, base_dir(&a.manifest))?;
    for id in &unmatched {
        log::warn!("{id}: no source frame to compare against");
    }
    let index = build_masks(&jobs, &a.out, a.ssim_threshold, a.workers)?;
    println!(
        "{} masks written, {} failed, {} fake frames without a source frame",
        index.masks.len(),
        index.failures.len(),
        unmatched.len()
    );
    Ok(status(!index.failures.is_empty() || !unmatched.is_empty()))
}

fn augment(a: AugmentArgs) -> Result<ExitCode> {
    let job = JobConfig {
        manifest: a.manifest,
        landmarks_dir: a.landmarks_dir,
        masks_dir: a.masks_dir,
        output_dir: a.out,
        cutout: a.cutout.config(),
        workers: a.workers,
        ssim_threshold: a.ssim_threshold,
    };
    let report = run_augment(&job)?;
    println!(
        "{} frames: {} augmented, {} unchanged, {} failed",
        report.total, report.applied, report.passthrough, report.failed
    );
    for item in report.failures() {
        eprintln!("{}: {}", item.image_id, item.error.as_deref().unwrap_or_default());
    }
    Ok(status(report.failed > 0))
}

fn load_manifest(manifest: &Path, clusters: &Path) -> Result<DatasetManifest> {
    let rows = read_frame_rows(manifest)?;
    let assignment = ClusterAssignment::read_csv(File::open(clusters).with_context(|| format!("opening {}", clusters.display()))?)?;
    Ok(DatasetManifest::from_frame_rows(&rows)?.with_clusters(assignment.as_map()))
}

fn cluster(a: ClusterArgs) -> Result<ExitCode> {
    let embeddings = read_embeddings_file(&a.embeddings).with_context(|| format!("reading {}", a.embeddings.display()))?;
    let params = DbscanParams {
        eps: a.eps,
        min_pts: a.min_pts,
    };
    let real = video_clusters(&embeddings, params)?;
    let manifest = DatasetManifest::from_frame_rows(&read_frame_rows(&a.manifest)?)?;
    let all = propagate_to_fakes(&real, &manifest)?;
    all.write_csv(create(&a.out)?)?;
    let counts: BTreeMap<String, usize> = all.counts().into_iter().map(|(c, n)| (c.to_string(), n)).collect();
    print_json(&counts)?;
    if let Some(path) = a.pca {
        let vectors: Vec<&[f64]> = embeddings.iter().map(|e| e.vector.as_slice()).collect();
        let ids: Vec<&str> = embeddings.iter().map(|e| e.video_id.as_str()).collect();
        let pca = pca_2d(&vectors)?;
        write_pca_csv(create(&path)?, &ids, &pca.coords)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn split(a: SplitArgs) -> Result<ExitCode> {
    let manifest = load_manifest(&a.manifest, &a.clusters)?;
    let plan = match a.kfold {
        Some(k) => fold_plan(&manifest, k, a.seed)?,
        None => cluster_split_by(&manifest, a.ratios, a.seed, a.balance)?,
    };
    plan.write_csv(create(&a.out)?)?;
    let counts: BTreeMap<String, usize> = plan.counts().into_iter().map(|(k, n)| (k.to_string(), n)).collect();
    print_json(&counts)?;
    Ok(ExitCode::SUCCESS)
}

fn audit(a: AuditArgs) -> Result<ExitCode> {
    let manifest = load_manifest(&a.manifest, &a.clusters)?;
    let plan = SplitPlan::read_csv(File::open(&a.plan).with_context(|| format!("opening {}", a.plan.display()))?)?;
    let report = leak_audit(&plan, &manifest)?;
    print_json(&report)?;
    if let Some(out) = a.out {
        write_json(&out, &report)?;
    }
    Ok(status(!report.ok))
}

fn eval(a: EvalArgs) -> Result<ExitCode> {
    let preds = read_predictions(File::open(&a.predictions).with_context(|| format!("opening {}", a.predictions.display()))?)?;
    let labels = read_labels(File::open(&a.labels).with_context(|| format!("opening {}", a.labels.display()))?)?;
    let scores = join_labels(&aggregate_by_video(&preds)?, &labels)?;
    let report = evaluate(&scores, a.eps)?;
    print_json(&report)?;
    if let Some(out) = a.out {
        write_json(&out, &report)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn preview_cmd(a: PreviewArgs) -> Result<ExitCode> {
    let image = load_image(&a.image)?;
    let lm_path = a.landmarks.unwrap_or_else(|| {
        let mut p = a.image.clone().into_os_string();
        p.push(".landmarks.json");
        p.into()
    });
    let landmarks = read_landmarks(&lm_path)?;
    let diff = match &a.mask {
        Some(path) => {
            let luma = image::open(path)
                .with_context(|| format!("opening {}", path.display()))?
                .to_luma8();
            Some(BinaryMask::from_luma8(&luma))
        }
        None => None,
    };
    let id = match a.image_id {
        Some(id) => id,
        None => a
            .image
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let rendered = preview(&image, &landmarks, diff.as_ref(), &a.cutout.config(), &id)?;
    fs::write(&a.out, preview_png(&rendered)?).with_context(|| format!("writing {}", a.out.display()))?;
    match &rendered.outcome.region {
        Some(r) => println!(
            "{}: {} (candidate {}, rho {})",
            id,
            r.strategy,
            r.candidate,
            r.rho.map_or("n/a".to_string(), |v| format!("{v:.4}"))
        ),
        None => println!("{id}: unchanged"),
    }
    Ok(ExitCode::SUCCESS)
}

fn resize(a: ResizeArgs) -> Result<ExitCode> {
    let image = load_image(&a.input)?;
    let out = resize_pad(&image, a.size)?;
    out.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn synth(a: SynthArgs) -> Result<ExitCode> {
    if a.out.exists() && fs::read_dir(&a.out)?.next().is_some() {
        bail!("{} is not empty", a.out.display());
    }
    let summary = write_synthetic_corpus(
        &a.out,
        &CorpusSpec {
            real_videos: a.videos,
            fakes_per_real: a.fakes_per_real,
            frames_per_video: a.frames,
            size: a.size,
            identities: a.identities,
            seed: a.seed,
        },
    )?;
    print_json(&summary)?;
    Ok(ExitCode::SUCCESS)
}
