//! Synthetic faces, textures and planted manipulations.
//!
//! Used to exercise the pipeline end to end without real footage: a frontal
//! 68-point template, randomly posed copies of it, a smooth random texture
//! and "fakes" made by replacing a block or polygon of a real frame.

use std::f64::consts::PI;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{rasterize_polygon, BinaryMask, Landmarks68, Point2, Polygon};

/// Template in unit face-box coordinates (x right, y down).
fn unit_template() -> Vec<Point2> {
    let mut pts = Vec::with_capacity(68);
    // jaw 0..17: left temple, around the chin, right temple
    for i in 0..17 {
        let phi = i as f64 * PI / 16.0;
        pts.push(Point2::new(0.5 - 0.45 * phi.cos(), 0.40 + 0.55 * phi.sin()));
    }
    // eyebrows 17..27, each left to right
    for (x0, x1) in [(0.14, 0.42), (0.58, 0.86)] {
        for k in 0..5 {
            let t = k as f64 / 4.0;
            pts.push(Point2::new(x0 + t * (x1 - x0), 0.30 - 0.04 * (t * PI).sin()));
        }
    }
    // nose bridge 27..31 and base 31..36
    for k in 0..4 {
        pts.push(Point2::new(0.5, 0.40 + 0.065 * k as f64));
    }
    for k in 0..5 {
        let t = k as f64 / 4.0;
        pts.push(Point2::new(0.42 + 0.16 * t, 0.64 + 0.02 * (t * PI).sin()));
    }
    // eyes 36..48: outer corner, upper lid, inner corner, lower lid
    for (cx, outer_left) in [(0.30, true), (0.70, false)] {
        let dir = if outer_left { -1.0 } else { 1.0 };
        let ring = [
            (dir * 0.08, 0.0),
            (dir * 0.03, -0.025),
            (-dir * 0.03, -0.025),
            (-dir * 0.08, 0.0),
            (-dir * 0.03, 0.025),
            (dir * 0.03, 0.025),
        ];
        let ring: Vec<_> = if outer_left {
            ring.to_vec()
        } else {
            // right eye starts at its inner corner
            vec![ring[3], ring[2], ring[1], ring[0], ring[5], ring[4]]
        };
        for (dx, dy) in ring {
            pts.push(Point2::new(cx + dx, 0.42 + dy));
        }
    }
    // outer lip 48..60, inner lip 60..68
    for k in 0..12 {
        let theta = PI + k as f64 * 2.0 * PI / 12.0;
        pts.push(Point2::new(0.5 + 0.14 * theta.cos(), 0.79 + 0.06 * theta.sin()));
    }
    for k in 0..8 {
        let theta = PI + k as f64 * 2.0 * PI / 8.0;
        pts.push(Point2::new(0.5 + 0.09 * theta.cos(), 0.79 + 0.025 * theta.sin()));
    }
    debug_assert_eq!(pts.len(), 68);
    pts
}

/// Frontal face filling the central 80% of a `width`x`height` frame.
pub fn frontal_landmarks(width: u32, height: u32) -> Landmarks68 {
    let (w, h) = (width as f64, height as f64);
    let side = 0.8 * w.min(h);
    let (ox, oy) = ((w - side) / 2.0, (h - side) / 2.0);
    Landmarks68::new(
        unit_template()
            .into_iter()
            .map(|p| Point2::new(ox + p.x * side, oy + p.y * side))
            .collect(),
    )
    .expect("template has 68 finite points")
}

/// Frontal template under a random similarity transform (rotation up to
/// +-15 degrees, scale 0.75..1.0, small shift) plus up to half a pixel of
/// per-point jitter.
pub fn posed_landmarks<R: Rng + ?Sized>(width: u32, height: u32, rng: &mut R) -> Landmarks68 {
    let base = frontal_landmarks(width, height);
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let angle = rng.random_range(-15.0f64..15.0).to_radians();
    let scale = rng.random_range(0.75..1.0);
    let shift = 0.05 * width.min(height) as f64;
    let (tx, ty) = (rng.random_range(-shift..shift), rng.random_range(-shift..shift));
    let (s, c) = angle.sin_cos();
    let pts = base
        .points()
        .iter()
        .map(|p| {
            let (dx, dy) = ((p.x - cx) * scale, (p.y - cy) * scale);
            Point2::new(
                cx + c * dx - s * dy + tx + rng.random_range(-0.5..0.5),
                cy + s * dx + c * dy + ty + rng.random_range(-0.5..0.5),
            )
        })
        .collect();
    Landmarks68::new(pts).expect("finite")
}

/// Smooth random colour texture: a few random plane waves plus mild noise.
pub fn textured_image(width: u32, height: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<[f64; 5]> = (0..4)
        .map(|_| {
            [
                rng.random_range(0.05..0.6),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(20.0..45.0),
                rng.random_range(0.0..3.0),
            ]
        })
        .collect();
    RgbImage::from_fn(width, height, |x, y| {
        let mut ch = [128.0f64; 3];
        for (k, w) in waves.iter().enumerate() {
            let phase = w[0] * (w[1].cos() * x as f64 + w[1].sin() * y as f64) + w[2];
            for (c, v) in ch.iter_mut().enumerate() {
                *v += w[3] * (phase + w[4] * c as f64 + k as f64).sin() * 0.5;
            }
        }
        let noise: f64 = rng.random_range(-12.0..12.0);
        Rgb(ch.map(|v| (v + noise).round().clamp(0.0, 255.0) as u8))
    })
}

/// Replaces the pixels under `region` with independent random bytes.
pub fn plant_noise(real: &RgbImage, region: &BinaryMask, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fake = real.clone();
    for (x, y) in region.iter_ones() {
        fake.put_pixel(x, y, Rgb([rng.random(), rng.random(), rng.random()]));
    }
    fake
}

/// Axis-aligned `size`x`size` block with top-left corner `(x0, y0)`.
pub fn block_mask(width: u32, height: u32, x0: u32, y0: u32, size: u32) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| {
        (x0..x0 + size).contains(&x) && (y0..y0 + size).contains(&y)
    })
}

/// A small manipulated patch around one random landmark of the inner face
/// (eyes, nose or mouth), as an ellipse-ish polygon.
pub fn planted_diff<R: Rng + ?Sized>(landmarks: &Landmarks68, width: u32, height: u32, rng: &mut R) -> BinaryMask {
    let centre = landmarks.get(rng.random_range(27..68));
    let side = width.min(height) as f64;
    let (rx, ry) = (rng.random_range(0.04..0.12) * side, rng.random_range(0.04..0.12) * side);
    let verts = (0..12)
        .map(|k| {
            let t = k as f64 * PI / 6.0;
            Point2::new(centre.x + rx * t.cos(), centre.y + ry * t.sin())
        })
        .collect();
    let poly = Polygon::new(verts).expect("ellipse polygon");
    rasterize_polygon(&poly, width, height).unwrap_or_else(|_| {
        let mut m = BinaryMask::new(width, height);
        m.set(width / 2, height / 2, true);
        m
    })
}

/// Raster of the face outline polygon.
pub fn face_raster(landmarks: &Landmarks68, width: u32, height: u32) -> BinaryMask {
    let poly = Polygon::new(landmarks.face_outline()).expect("outline polygon");
    rasterize_polygon(&poly, width, height).expect("face inside frame")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::polygon_area;

    #[test]
    fn template_regions_are_where_expected() {
        let lm = frontal_landmarks(100, 100);
        // eyes on one horizontal line, mouth below nose below eyes
        assert!((lm.get(36).y - lm.get(45).y).abs() < 1e-9);
        assert!(lm.get(36).x < lm.get(39).x && lm.get(42).x < lm.get(45).x);
        assert!(lm.get(33).y > lm.get(27).y);
        assert!(lm.get(51).y > lm.get(33).y);
        assert!(lm.get(48).x < lm.get(54).x);
        let outline = Polygon::new(lm.face_outline()).unwrap();
        assert!(polygon_area(&outline) > 0.3 * 100.0 * 100.0);
    }

    #[test]
    fn textures_are_deterministic() {
        assert_eq!(textured_image(16, 16, 4), textured_image(16, 16, 4));
        assert_ne!(textured_image(16, 16, 4), textured_image(16, 16, 5));
    }
}
