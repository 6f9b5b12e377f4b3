//! Independent reference implementations used as test oracles. They favour
//! obviousness over speed and share no code with the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use facecut::geometry::{BinaryMask, Point2};
use rand::Rng;

// ---------- geometry ----------

pub fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Hull vertices by brute force: `(i, j)` is a hull edge when every point is
/// left of or on the line `i -> j`, and collinear points lie within the
/// segment. Returns the set of vertex coordinates (bit patterns).
pub fn hull_vertices_oracle(points: &[(f64, f64)]) -> BTreeSet<(u64, u64)> {
    let mut out = BTreeSet::new();
    let n = points.len();
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (points[i], points[j]);
            if a == b {
                continue;
            }
            let ok = points.iter().all(|&p| {
                let c = cross(a, b, p);
                if c < 0.0 {
                    return false;
                }
                if c > 0.0 {
                    return true;
                }
                // collinear: must lie on the closed segment
                let t = (p.0 - a.0) * (b.0 - a.0) + (p.1 - a.1) * (b.1 - a.1);
                let len2 = (b.0 - a.0).powi(2) + (b.1 - a.1).powi(2);
                (0.0..=len2).contains(&t)
            });
            if ok {
                out.insert((a.0.to_bits(), a.1.to_bits()));
                out.insert((b.0.to_bits(), b.1.to_bits()));
            }
        }
    }
    out
}

/// Even-odd point-in-polygon by ray casting to +x.
pub fn point_in_polygon(p: (f64, f64), poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.1 > p.1) != (b.1 > p.1) {
            let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
            if p.0 < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Monte-Carlo area estimate over the bounding box.
pub fn monte_carlo_area<R: Rng>(poly: &[(f64, f64)], samples: usize, rng: &mut R) -> f64 {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in poly {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let hits = (0..samples)
        .filter(|_| point_in_polygon((rng.random_range(x0..x1), rng.random_range(y0..y1)), poly))
        .count();
    (x1 - x0) * (y1 - y0) * hits as f64 / samples as f64
}

/// Star-shaped (hence simple) polygon with `n >= 4` vertices around `centre`.
/// One angle is drawn per equal sector, so consecutive angles are less than
/// pi apart and the centre stays inside.
pub fn random_star_polygon<R: Rng>(n: usize, centre: (f64, f64), r: (f64, f64), rng: &mut R) -> Vec<(f64, f64)> {
    let sector = std::f64::consts::TAU / n as f64;
    (0..n)
        .map(|i| {
            let t = sector * (i as f64 + rng.random_range(0.0..0.5));
            let rad = rng.random_range(r.0..r.1);
            (centre.0 + rad * t.cos(), centre.1 + rad * t.sin())
        })
        .collect()
}

pub fn to_points(poly: &[(f64, f64)]) -> Vec<Point2> {
    poly.iter().map(|&(x, y)| Point2::new(x, y)).collect()
}

/// Mean coordinate of the set pixels.
pub fn raster_centroid(mask: &BinaryMask) -> (f64, f64) {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                sx += x as f64;
                sy += y as f64;
                n += 1;
            }
        }
    }
    (sx / n as f64, sy / n as f64)
}

/// One 3x3 dilation step by explicit neighbour lookup.
pub fn dilate_once_oracle(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        (-1..=1).any(|dy| {
            (-1..=1).any(|dx| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                nx >= 0 && ny >= 0 && nx < w && ny < h && mask.get(nx as u32, ny as u32)
            })
        })
    })
}

pub fn dilate_oracle(mask: &BinaryMask, iterations: u32) -> BinaryMask {
    (0..iterations).fold(mask.clone(), |m, _| dilate_once_oracle(&m))
}

pub fn popcount_and(a: &BinaryMask, b: &BinaryMask) -> usize {
    let mut n = 0;
    for y in 0..a.height() {
        for x in 0..a.width() {
            if a.get(x, y) && b.get(x, y) {
                n += 1;
            }
        }
    }
    n
}

pub fn iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let inter = popcount_and(a, b);
    let union = a.count_ones() + b.count_ones() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn random_mask<R: Rng>(w: u32, h: u32, density: f64, rng: &mut R) -> BinaryMask {
    let bits: Vec<bool> = (0..w * h).map(|_| rng.random_bool(density)).collect();
    BinaryMask::from_vec(w, h, bits).unwrap()
}

// ---------- simmask ----------

/// SSIM of two constant images: the variance terms vanish.
pub fn ssim_of_constants(a: f64, b: f64) -> f64 {
    let c1 = (0.01f64).powi(2);
    (2.0 * a * b + c1) / (a * a + b * b + c1)
}

// ---------- clustering ----------

pub struct DbscanOracle {
    pub core: Vec<bool>,
    /// Cluster index per point from the classic expand-cluster loop.
    pub labels: Vec<Option<usize>>,
}

/// Textbook DBSCAN: visit points in index order, grow a cluster from each
/// unvisited core point with a FIFO queue. Border points keep the first
/// cluster that reaches them, then are re-attached to their lowest-index
/// core neighbour to match the deterministic convention.
pub fn dbscan_oracle(points: &[Vec<f64>], eps: f64, min_pts: usize) -> DbscanOracle {
    let n = points.len();
    let dist = |i: usize, j: usize| -> f64 {
        points[i]
            .iter()
            .zip(&points[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let region = |i: usize| -> Vec<usize> { (0..n).filter(|&j| dist(i, j) <= eps).collect() };
    let core: Vec<bool> = (0..n).map(|i| region(i).len() >= min_pts).collect();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut cluster = 0;
    for i in 0..n {
        if labels[i].is_some() || !core[i] {
            continue;
        }
        labels[i] = Some(cluster);
        let mut queue: VecDeque<usize> = region(i).into();
        while let Some(q) = queue.pop_front() {
            if labels[q].is_none() {
                labels[q] = Some(cluster);
                if core[q] {
                    queue.extend(region(q));
                }
            }
        }
        cluster += 1;
    }
    for i in 0..n {
        if !core[i] {
            labels[i] = (0..n).find(|&j| core[j] && dist(i, j) <= eps).and_then(|j| labels[j]);
        }
    }
    DbscanOracle { core, labels }
}

/// Canonical partition: sets of member indices, restricted to `keep`.
pub fn partition<L: Ord + Copy>(labels: &[Option<L>], keep: &[bool]) -> BTreeSet<BTreeSet<usize>> {
    let mut groups: BTreeMap<L, BTreeSet<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        if let (Some(l), true) = (l, keep[i]) {
            groups.entry(*l).or_default().insert(i);
        }
    }
    groups.into_values().collect()
}

/// Planted identities in `dim` dimensions plus uniform outliers.
pub fn planted_identities<R: Rng>(
    dim: usize,
    identities: usize,
    per_identity: usize,
    spread: f64,
    outliers: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    for _ in 0..identities {
        let centre: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..per_identity {
            pts.push(centre.iter().map(|c| c + rng.random_range(-spread..spread)).collect());
        }
    }
    for _ in 0..outliers {
        pts.push((0..dim).map(|_| rng.random_range(-3.0..3.0)).collect());
    }
    pts
}

// ---------- metrics ----------

/// AUC by comparing every (positive, negative) pair; returns the exact
/// numerator `2 * wins + ties` and denominator `2 * n_pos * n_neg`.
pub fn pairwise_auc(scores: &[(f64, u8)]) -> (u64, u64) {
    let (mut num, mut pairs) = (0u64, 0u64);
    for &(sp, yp) in scores {
        if yp != 1 {
            continue;
        }
        for &(sn, yn) in scores {
            if yn != 0 {
                continue;
            }
            pairs += 1;
            if sp > sn {
                num += 2;
            } else if sp == sn {
                num += 1;
            }
        }
    }
    (num, 2 * pairs)
}

/// Walks the ranking, building the precision-recall curve point by point and
/// integrating `(R_n - R_{n-1}) * P_n`.
pub fn rank_walk_ap(ranked_labels: &[u8]) -> f64 {
    let total_pos = ranked_labels.iter().filter(|&&y| y == 1).count() as f64;
    let (mut tp, mut prev_recall, mut ap) = (0.0, 0.0, 0.0);
    for (n, &y) in ranked_labels.iter().enumerate() {
        if y == 1 {
            tp += 1.0;
        }
        let precision = tp / (n + 1) as f64;
        let recall = tp / total_pos;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

/// Compensated (Kahan-Babuska) summation.
pub fn kahan_sum(values: &[f64]) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

// ---------- split ----------

/// Cluster sizes with a heavy tail: most clusters hold one or two videos, a
/// few hold many, so that max / mean is around ten.
pub fn skewed_cluster_sizes<R: Rng>(clusters: usize, rng: &mut R) -> Vec<usize> {
    let mut sizes: Vec<usize> = (0..clusters)
        .map(|_| {
            let u: f64 = rng.random_range(0.0..1.0);
            // Pareto-like tail, capped
            ((1.0 / (1.0 - u).powf(0.8)).floor() as usize).clamp(1, 20)
        })
        .collect();
    // choose the first size so that it is ten times the mean including itself
    let rest: usize = sizes[1..].iter().sum();
    let big = if clusters > 10 {
        (10.0 * rest as f64 / (clusters - 10) as f64).round() as usize
    } else {
        10 * rest.max(1)
    };
    sizes[0] = sizes[0].max(big);
    sizes
}

/// Manifest with one real video per cluster plus `size - 1` fakes derived from
/// it. Roughly one cluster in twenty is labelled noise.
pub fn skewed_manifest<R: Rng>(clusters: usize, rng: &mut R) -> facecut::manifest::DatasetManifest {
    let sizes = skewed_cluster_sizes(clusters, rng);
    manifest_from_sizes(&sizes, 0.05, rng)
}

pub fn manifest_from_sizes<R: Rng>(sizes: &[usize], noise: f64, rng: &mut R) -> facecut::manifest::DatasetManifest {
    use facecut::clustering::ClusterLabel;
    use facecut::manifest::{DatasetManifest, VideoLabel, VideoRecord};
    let mut records = Vec::new();
    for (c, &size) in sizes.iter().enumerate() {
        let label = if c > 0 && rng.random_bool(noise) {
            ClusterLabel::Noise
        } else {
            ClusterLabel::Cluster(c as u32)
        };
        let real = format!("real_{c:03}");
        for i in 1..size {
            records.push(VideoRecord {
                video_id: format!("fake_{c:03}_{i:02}"),
                label: VideoLabel::Fake,
                source_video_id: Some(real.clone()),
                cluster: Some(label),
                n_frames: 1,
            });
        }
        records.push(VideoRecord {
            video_id: real,
            label: VideoLabel::Real,
            source_video_id: None,
            cluster: Some(label),
            n_frames: 1,
        });
    }
    DatasetManifest::new(records).unwrap()
}

// ---------- pipeline ----------

/// Every file below `root`, keyed by relative path with `/` separators.
pub fn read_tree(root: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap();
                let key: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
                out.insert(key.join("/"), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
