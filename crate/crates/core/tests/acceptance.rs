//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line to stderr,
//! bypassing the test harness capture, and then fails if any check failed.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::{Duration, Instant};

use common::*;
use facecut::clustering::{dbscan_with_core, ClusterLabel, DbscanParams};
use facecut::cutout::{face_cutout, fill_region, overlap_ratio, CutoutConfig, FillMode};
use facecut::geometry::{
    binary_dilate, centroid_quadrants, convex_hull, polygon_area, rasterize_polygon, BinaryMask, Polygon,
};
use facecut::metrics::{aggregate_video, average_precision, log_loss, roc_auc, VideoScore, DEFAULT_CLIP_EPS};
use facecut::pipeline::{run_augment, write_synthetic_corpus, CorpusSpec, JobConfig};
use facecut::simmask::{difference_mask, ssim_map, to_gray, DEFAULT_SSIM_THRESHOLD};
use facecut::split::{cluster_split, kfold_by_cluster, leak_audit, Assignment, SplitPlan, SplitRatios};
use facecut::synthetic::{block_mask, plant_noise, planted_diff, posed_landmarks, textured_image};
use image::RgbImage;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Criterion {
    number: u32,
    title: &'static str,
    start: Instant,
    failures: Vec<String>,
}

impl Criterion {
    fn new(number: u32, title: &'static str) -> Self {
        Self {
            number,
            title,
            start: Instant::now(),
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok && self.failures.len() < 20 {
            self.failures.push(what());
        }
    }

    fn within(&mut self, limit: Duration) {
        let elapsed = self.start.elapsed();
        self.check(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"));
    }

    fn finish(self) {
        let status = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let mut line = format!(
            "{status} criterion {}: {} ({:.2?})\n",
            self.number,
            self.title,
            self.start.elapsed()
        );
        for f in &self.failures {
            line.push_str(&format!("    {f}\n"));
        }
        std::io::stderr().write_all(line.as_bytes()).unwrap();
        assert!(self.failures.is_empty(), "criterion {} failed:\n{line}", self.number);
    }
}

const SIZE: u32 = 64;

#[test]
fn criterion_01_overlap_ratio() {
    let mut c = Criterion::new(1, "overlap ratio equals popcount oracle on 1000 mask pairs");
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    for i in 0..1000 {
        let density = rng.random_range(0.01..0.9);
        let region = random_mask(SIZE, SIZE, rng.random_range(0.01..0.9), &mut rng);
        let mut diff = random_mask(SIZE, SIZE, density, &mut rng);
        if diff.is_empty() {
            diff.set(0, 0, true);
        }
        let got = overlap_ratio(&region, &diff).unwrap();
        let want = popcount_and(&region, &diff) as f64 / diff.count_ones() as f64;
        c.check(got == want, || format!("pair {i}: {got} vs {want}"));
    }
    c.within(Duration::from_secs(5));
    c.finish();
}

#[test]
fn criterion_02_overlap_guarantee() {
    let mut c = Criterion::new(2, "no applied cutout exceeds the overlap threshold in 10^4 calls");
    let cfg = CutoutConfig {
        p: 1.0,
        gamma_h: 0.3,
        ..Default::default()
    };
    let img = RgbImage::new(SIZE, SIZE);
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let (mut applied, mut violations) = (0, 0);
    for face in 0..100 {
        let lm = posed_landmarks(SIZE, SIZE, &mut rng);
        let diff = planted_diff(&lm, SIZE, SIZE, &mut rng);
        c.check(!diff.is_empty(), || format!("face {face}: empty diff"));
        for k in 0..100 {
            let out = face_cutout(&img, &lm, Some(&diff), &cfg, &format!("face{face}_{k}")).unwrap();
            if let Some(r) = &out.region {
                applied += 1;
                let rho = popcount_and(&r.raster, &diff) as f64 / diff.count_ones() as f64;
                if rho > 0.3 {
                    violations += 1;
                }
            }
        }
    }
    c.check(violations == 0, || format!("{violations} violations"));
    c.check(applied > 0, || "nothing applied".into());
    c.finish();
}

#[test]
fn criterion_03_gate_frequency() {
    let mut c = Criterion::new(3, "applied fraction within 4 sigma for p in {0.1, 0.5, 0.9}");
    let img = RgbImage::new(SIZE, SIZE);
    let lm = posed_landmarks(SIZE, SIZE, &mut ChaCha8Rng::seed_from_u64(1003));
    let n = 10_000;
    for p in [0.1, 0.5, 0.9] {
        let cfg = CutoutConfig {
            p,
            ..Default::default()
        };
        let applied = (0..n)
            .filter(|i| face_cutout(&img, &lm, None, &cfg, &format!("gate{i}")).unwrap().applied)
            .count();
        let frac = applied as f64 / n as f64;
        let bound = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
        c.check((frac - p).abs() <= bound, || format!("p={p}: {frac} outside ±{bound}"));
    }
    c.finish();
}

#[test]
fn criterion_04_fill_semantics() {
    let mut c = Criterion::new(4, "zero, max and random fills");
    let img = textured_image(SIZE, SIZE, 1004);
    let region = BinaryMask::from_fn(SIZE, SIZE, |x, y| (8..56).contains(&x) && (10..50).contains(&y));
    let n = region.count_ones();
    c.check(n >= 1000, || format!("region has only {n} pixels"));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let zero = fill_region(&img, &region, FillMode::Zero, &mut rng).unwrap();
    let max = fill_region(&img, &region, FillMode::Max, &mut rng).unwrap();
    let sum: u64 = region
        .iter_ones()
        .map(|(x, y)| zero.get_pixel(x, y).0.iter().map(|&v| v as u64).sum::<u64>())
        .sum();
    c.check(sum == 0, || format!("zero fill sums to {sum}"));
    c.check(region.iter_ones().all(|(x, y)| max.get_pixel(x, y).0 == [255; 3]), || {
        "max fill not saturated".into()
    });
    let a = fill_region(&img, &region, FillMode::Random, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let b = fill_region(&img, &region, FillMode::Random, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    c.check(a == b, || "random fill not reproducible".into());
    for ch in 0..3 {
        let mean = region.iter_ones().map(|(x, y)| a.get_pixel(x, y).0[ch] as f64).sum::<f64>() / n as f64;
        c.check((mean - 127.5).abs() <= 5.0, || format!("channel {ch} mean {mean}"));
    }
    for out in [&zero, &max, &a] {
        let outside_same = img
            .enumerate_pixels()
            .all(|(x, y, p)| region.get(x, y) || out.get_pixel(x, y) == p);
        c.check(outside_same, || "pixels outside the region changed".into());
    }
    c.finish();
}

#[test]
fn criterion_05_geometry() {
    let mut c = Criterion::new(5, "area, hull, dilation and quadrant oracles over 100 instances each");
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    for i in 0..100 {
        let poly = random_star_polygon(rng.random_range(5..14), (0.0, 0.0), (2.0, 10.0), &mut rng);
        let area = polygon_area(&Polygon::new(to_points(&poly)).unwrap());
        let mc = monte_carlo_area(&poly, 400_000, &mut rng);
        c.check((area - mc).abs() / area < 0.01, || format!("area {i}: {area} vs {mc}"));
    }
    for i in 0..100 {
        let pts: Vec<(f64, f64)> = (0..rng.random_range(3..40))
            .map(|_| (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)))
            .collect();
        let got: BTreeSet<(u64, u64)> = match convex_hull(&to_points(&pts)) {
            Ok(h) => h.vertices().iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect(),
            Err(_) => BTreeSet::new(),
        };
        c.check(got == hull_vertices_oracle(&pts), || format!("hull {i}"));
    }
    for i in 0..100 {
        let m = random_mask(31, 23, 0.02, &mut rng);
        let mut prev = m.clone();
        for k in 1..5 {
            let d = binary_dilate(&m, k);
            c.check(prev.is_subset_of(&d), || format!("dilation {i}: not nested at k={k}"));
            c.check(d == dilate_oracle(&m, k), || format!("dilation {i}: oracle mismatch at k={k}"));
            prev = d;
        }
    }
    let mut quads_checked = 0;
    while quads_checked < 100 {
        let pts: Vec<(f64, f64)> = (0..rng.random_range(3..12))
            .map(|_| (rng.random_range(0.0..48.0), rng.random_range(0.0..48.0)))
            .collect();
        let Ok(hull) = convex_hull(&to_points(&pts)) else { continue };
        if polygon_area(&hull) < 4.0 {
            continue;
        }
        quads_checked += 1;
        let raster = rasterize_polygon(&hull, 48, 48).unwrap();
        let quads = centroid_quadrants(&hull, 48, 48).unwrap();
        let total: usize = quads.iter().map(BinaryMask::count_ones).sum();
        let covered = raster
            .iter_ones()
            .all(|(x, y)| quads.iter().filter(|q| q.get(x, y)).count() == 1);
        c.check(total == raster.count_ones() && covered, || format!("quadrants {quads_checked}"));
    }
    c.within(Duration::from_secs(30));
    c.finish();
}

fn options(labels: &[ClusterLabel]) -> Vec<Option<u32>> {
    labels
        .iter()
        .map(|l| match l {
            ClusterLabel::Cluster(c) => Some(*c),
            ClusterLabel::Noise => None,
        })
        .collect()
}

#[test]
fn criterion_06_dbscan() {
    let mut c = Criterion::new(6, "DBSCAN matches the reference on 50 seeds and ignores point order");
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = planted_identities(128, 3, 60, 0.05, 20, &mut rng);
        let params = DbscanParams {
            eps: rng.random_range(0.4..0.5),
            min_pts: 5,
        };
        let got = dbscan_with_core(&pts, params).unwrap();
        let want = dbscan_oracle(&pts, params.eps, params.min_pts);
        c.check(got.core == want.core, || format!("seed {seed}: core sets differ"));
        c.check(
            partition(&options(&got.labels), &got.core) == partition(&want.labels, &want.core),
            || format!("seed {seed}: core partitions differ"),
        );
        let all = vec![true; pts.len()];
        c.check(
            partition(&options(&got.labels), &all) == partition(&want.labels, &all),
            || format!("seed {seed}: full partitions differ"),
        );

        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.shuffle(&mut rng);
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let other = dbscan_with_core(&shuffled, params).unwrap();
        let mut core = vec![false; pts.len()];
        let mut labels = vec![None; pts.len()];
        for (k, &i) in perm.iter().enumerate() {
            core[i] = other.core[k];
            labels[i] = options(&other.labels)[k];
        }
        c.check(core == got.core, || format!("seed {seed}: core set depends on order"));
        c.check(
            partition(&labels, &core) == partition(&options(&got.labels), &got.core),
            || format!("seed {seed}: core partition depends on order"),
        );
    }
    c.finish();
}

#[test]
fn criterion_07_leak_free_splits() {
    let mut c = Criterion::new(7, "cluster splits never leak and per-video splits are flagged");
    let mut rng = ChaCha8Rng::seed_from_u64(1007);
    let kinds = [Assignment::Train, Assignment::Val, Assignment::Test];
    for trial in 0..100u64 {
        let m = skewed_manifest(rng.random_range(30..120), &mut rng);
        let groups = m.cluster_groups().unwrap();
        let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
        let ratio = *sizes.iter().max().unwrap() as f64 / (m.len() as f64 / sizes.len() as f64);
        c.check((6.0..=14.0).contains(&ratio), || format!("manifest {trial}: max/avg {ratio:.1}"));

        let plan = cluster_split(&m, SplitRatios::default(), trial).unwrap();
        c.check(leak_audit(&plan, &m).unwrap().ok, || format!("manifest {trial}: split leaks"));
        for (k, fold) in kfold_by_cluster(&m, 5, trial).unwrap().iter().enumerate() {
            c.check(leak_audit(fold, &m).unwrap().ok, || format!("manifest {trial}: fold {k} leaks"));
        }

        let random = SplitPlan {
            assignment: m
                .records()
                .iter()
                .map(|r| (r.video_id.clone(), kinds[rng.random_range(0..3)]))
                .collect(),
            ratios: None,
        };
        let mut spread: BTreeMap<i64, BTreeSet<Assignment>> = BTreeMap::new();
        for (v, cl) in m.clusters().unwrap() {
            spread.entry(cl.as_i64()).or_default().insert(random.get(v).unwrap());
        }
        let expected: BTreeSet<i64> = spread.into_iter().filter(|(_, s)| s.len() > 1).map(|(k, _)| k).collect();
        let report = leak_audit(&random, &m).unwrap();
        let flagged: BTreeSet<i64> = report.leaks.iter().copied().collect();
        c.check(flagged == expected, || format!("manifest {trial}: audit flagged {flagged:?}, expected {expected:?}"));
        c.check(report.ok == expected.is_empty(), || format!("manifest {trial}: ok flag wrong"));
    }
    c.finish();
}

#[test]
fn criterion_08_metrics() {
    let mut c = Criterion::new(8, "log loss, AUC, AP and frame-mean oracles");
    let half = [VideoScore::new("v", 0.5, 1).unwrap()];
    let l = log_loss(&half, DEFAULT_CLIP_EPS).unwrap();
    c.check((l - std::f64::consts::LN_2).abs() <= 1e-9, || format!("log loss {l}"));

    let mut rng = ChaCha8Rng::seed_from_u64(1008);
    for trial in 0..200 {
        let levels = if trial % 2 == 0 { 4 } else { 1 << 20 };
        let pairs: Vec<(f64, u8)> = (0..30)
            .map(|i| (rng.random_range(0..=levels) as f64 / levels as f64, (i % 2) as u8))
            .collect();
        let scores: Vec<VideoScore> = pairs
            .iter()
            .enumerate()
            .map(|(i, &(p, y))| VideoScore::new(format!("v{i:02}"), p, y).unwrap())
            .collect();
        let (num, den) = pairwise_auc(&pairs);
        let auc = roc_auc(&scores).unwrap();
        c.check(auc == num as f64 / den as f64, || format!("set {trial}: AUC {auc} vs {num}/{den}"));

        let mut ranked: Vec<&VideoScore> = scores.iter().collect();
        ranked.sort_by(|a, b| b.prob_fake.total_cmp(&a.prob_fake).then_with(|| a.video_id.cmp(&b.video_id)));
        let labels: Vec<u8> = ranked.iter().map(|s| s.label).collect();
        let ap = average_precision(&scores).unwrap();
        let want = rank_walk_ap(&labels);
        c.check((ap - want).abs() <= 1e-12, || format!("set {trial}: AP {ap} vs {want}"));
    }
    for trial in 0..200 {
        let n = rng.random_range(1..10_000);
        let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let got = aggregate_video(&probs).unwrap();
        let want = kahan_sum(&probs) / n as f64;
        c.check((got - want).abs() <= 1e-12, || format!("mean {trial}: {got} vs {want}"));
    }
    c.finish();
}

#[test]
fn criterion_09_ssim() {
    let mut c = Criterion::new(9, "SSIM identity, symmetry and planted-mask IoU on 20 pairs");
    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    for pair in 0..20 {
        let real = textured_image(SIZE, SIZE, rng.random());
        let size = rng.random_range(20..=28);
        let (x0, y0) = (rng.random_range(4..SIZE - size - 4), rng.random_range(4..SIZE - size - 4));
        let block = block_mask(SIZE, SIZE, x0, y0, size);
        let fake = plant_noise(&real, &block, rng.random());
        let (gr, gf) = (to_gray(&real).unwrap(), to_gray(&fake).unwrap());

        let same = ssim_map(&gr, &gr, 11).unwrap();
        c.check(same.values().iter().all(|v| (v - 1.0).abs() <= 1e-9), || format!("pair {pair}: ssim(x, x) != 1"));
        let ab = ssim_map(&gr, &gf, 11).unwrap();
        let ba = ssim_map(&gf, &gr, 11).unwrap();
        let sym = ab.values().iter().zip(ba.values()).all(|(a, b)| (a - b).abs() <= 1e-9);
        c.check(sym, || format!("pair {pair}: not symmetric"));

        let mask = difference_mask(&real, &fake, DEFAULT_SSIM_THRESHOLD).unwrap();
        let score = iou(&mask, &block);
        c.check(score >= 0.5, || format!("pair {pair}: IoU {score:.3}"));
    }
    c.finish();
}

#[test]
fn criterion_10_end_to_end_determinism() {
    let mut c = Criterion::new(10, "augment over 500 images is byte-identical with 1 and 8 workers");
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_synthetic_corpus(
        dir.path(),
        &CorpusSpec {
            real_videos: 50,
            fakes_per_real: 1,
            frames_per_video: 5,
            size: 64,
            identities: 10,
            seed: 1010,
        },
    )
    .unwrap();
    c.check(corpus.frames == 500, || format!("corpus has {} frames", corpus.frames));
    let start = Instant::now();
    let run = |out: &str, workers: usize| {
        let cfg = JobConfig {
            workers,
            ..JobConfig::new(&corpus.manifest, dir.path().join(out))
        };
        run_augment(&cfg).unwrap()
    };
    let a = run("w1", 1);
    let b = run("w8", 8);
    let elapsed = start.elapsed();
    c.check(a == b, || "reports differ".into());
    c.check(a.failed == 0, || format!("{} items failed", a.failed));
    let (ta, tb) = (read_tree(&dir.path().join("w1")), read_tree(&dir.path().join("w8")));
    c.check(ta.len() == 501, || format!("{} files written", ta.len()));
    c.check(ta == tb, || {
        let differing: Vec<&String> = ta.keys().filter(|k| ta.get(*k) != tb.get(*k)).take(5).collect();
        format!("trees differ, e.g. {differing:?}")
    });
    c.check(elapsed < Duration::from_secs(60), || format!("two runs took {elapsed:?}"));
    c.finish();
}
