//! Landmark geometry: points, polygons, convex hulls, rasterization, line
//! drawing and binary dilation.
//!
//! Pixel `(x, y)` is sampled at the integer coordinate `(x, y)`. A pixel is a
//! member of a polygon raster when that sample point lies inside the polygon
//! (even-odd rule) or on its boundary.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need at least three points, got {0}")]
    FewerThanThreePoints(usize),
    #[error("all points are collinear")]
    AllCollinear,
    #[error("polygon has zero area")]
    DegenerateZeroArea,
    #[error("polygon covers no pixel of the {width}x{height} image")]
    EmptyAfterClamp { width: u32, height: u32 },
    #[error("line endpoints coincide")]
    DegenerateLine,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("expected 68 landmarks, got {0}")]
    LandmarkCount(usize),
    #[error("image dimensions must be positive")]
    EmptyImage,
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimMismatch(u32, u32, u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

/// z-component of `(a - o) x (b - o)`; positive when `o, a, b` turn counter-clockwise.
pub fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// The 68-point facial landmark layout.
///
/// Index ranges: jaw `0..17`, eyebrows `17..27`, nose `27..36`,
/// eyes `36..48` (left `36..42`, right `42..48`), mouth `48..68`.
#[derive(Debug, Clone, PartialEq)]
pub struct Landmarks68 {
    points: [Point2; 68],
}

impl Landmarks68 {
    pub const COUNT: usize = 68;
    /// Jaw line plus both eyebrows: the outer face boundary.
    pub const BOUNDARY: Range<usize> = 0..27;
    pub const JAW: Range<usize> = 0..17;
    pub const EYEBROWS: Range<usize> = 17..27;
    pub const NOSE: Range<usize> = 27..36;
    pub const EYES: Range<usize> = 36..48;
    pub const MOUTH: Range<usize> = 48..68;

    pub fn new(points: Vec<Point2>) -> Result<Self, GeometryError> {
        let points: [Point2; 68] = points
            .try_into()
            .map_err(|v: Vec<Point2>| GeometryError::LandmarkCount(v.len()))?;
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn get(&self, index: usize) -> Point2 {
        self.points[index]
    }

    pub fn range(&self, range: Range<usize>) -> &[Point2] {
        &self.points[range]
    }

    pub fn boundary(&self) -> &[Point2] {
        self.range(Self::BOUNDARY)
    }

    /// Closed face outline: jaw left to right, then the eyebrows right to left.
    pub fn face_outline(&self) -> Vec<Point2> {
        let mut outline: Vec<Point2> = self.range(Self::JAW).to_vec();
        outline.extend(self.range(Self::EYEBROWS).iter().rev());
        outline
    }

    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> Result<Self, GeometryError> {
        Self::new(self.points.iter().map(|&p| f(p)).collect())
    }
}

/// A closed polygon with at least three vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl Polygon {
    /// Builds a polygon, dropping consecutive duplicate vertices (including a
    /// repeated closing vertex).
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let mut dedup: Vec<Point2> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if dedup.last() != Some(&v) {
                dedup.push(v);
            }
        }
        while dedup.len() > 1 && dedup.first() == dedup.last() {
            dedup.pop();
        }
        if dedup.len() < 3 {
            return Err(GeometryError::FewerThanThreePoints(dedup.len()));
        }
        Ok(Self { vertices: dedup })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(&b)).sum()
    }

    /// Shoelace sum halved; positive for counter-clockwise vertex order.
    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.x * b.y - b.x * a.y).sum::<f64>()
    }
}

/// Per-pixel membership raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn filled(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![true; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<bool>) -> Option<Self> {
        (data.len() == width as usize * height as usize).then_some(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let mut mask = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                mask.data[(y * width + x) as usize] = f(x, y);
            }
        }
        mask
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.index(x, y);
        self.data[i] = value;
    }

    /// Like [`get`](Self::get) but `false` outside the raster.
    pub fn get_checked(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && x < self.width as i64
            && y < self.height as i64
            && self.get(x as u32, y as u32)
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    fn check_dims(&self, other: &BinaryMask) -> Result<(), GeometryError> {
        if self.dims() != other.dims() {
            return Err(GeometryError::DimMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Number of pixels set in both masks.
    pub fn intersection_count(&self, other: &BinaryMask) -> Result<usize, GeometryError> {
        self.check_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a && b)
            .count())
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask, GeometryError> {
        self.check_dims(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a || b).collect();
        Ok(BinaryMask { width: self.width, height: self.height, data })
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask, GeometryError> {
        self.check_dims(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a && b).collect();
        Ok(BinaryMask { width: self.width, height: self.height, data })
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// Coordinates of set pixels in row-major order.
    pub fn iter_ones(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    /// Set pixels that have a 4-neighbour outside the mask or touch the raster edge.
    pub fn outline(&self) -> BinaryMask {
        let mut out = BinaryMask::new(self.width, self.height);
        for (x, y) in self.iter_ones() {
            let (x, y) = (x as i64, y as i64);
            let interior = [(-1, 0), (1, 0), (0, -1), (0, 1)]
                .iter()
                .all(|(dx, dy)| self.get_checked(x + dx, y + dy));
            if !interior {
                out.set(x as u32, y as u32, true);
            }
        }
        out
    }

    /// 0/255 grayscale raster.
    pub fn to_luma8(&self) -> image::GrayImage {
        image::GrayImage::from_fn(self.width, self.height, |x, y| {
            image::Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }

    /// Pixels brighter than mid-gray become members.
    pub fn from_luma8(img: &image::GrayImage) -> Self {
        Self::from_fn(img.width(), img.height(), |x, y| img.get_pixel(x, y)[0] > 127)
    }
}

/// The 3x3 all-true (8-connected) structuring element used by [`binary_dilate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StructuringElement;

impl StructuringElement {
    pub const RADIUS: u32 = 1;

    pub fn offsets(&self) -> impl Iterator<Item = (i64, i64)> {
        (-1..=1).flat_map(|dy| (-1..=1).map(move |dx| (dx, dy)))
    }
}

/// Convex hull by Andrew's monotone chain.
///
/// Vertices come back counter-clockwise (positive signed area) starting at
/// the lexicographically smallest point; collinear boundary points are dropped.
pub fn convex_hull(points: &[Point2]) -> Result<Polygon, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::FewerThanThreePoints(points.len()));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(GeometryError::FewerThanThreePoints(pts.len()));
    }

    let mut lower: Vec<Point2> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(GeometryError::AllCollinear);
    }
    Polygon::new(lower)
}

/// Absolute shoelace area.
pub fn polygon_area(poly: &Polygon) -> f64 {
    poly.signed_area().abs()
}

/// Area-weighted centroid.
pub fn polygon_centroid(poly: &Polygon) -> Result<Point2, GeometryError> {
    let a = poly.signed_area();
    if a.abs() < 1e-12 {
        return Err(GeometryError::DegenerateZeroArea);
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for (p, q) in poly.edges() {
        let w = p.x * q.y - q.x * p.y;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    Ok(Point2::new(cx / (6.0 * a), cy / (6.0 * a)))
}

const ON_EDGE_EPS: f64 = 1e-9;

/// Scanline fill of `poly` after clamping its vertices into the image.
///
/// Interior pixels follow the even-odd rule; pixels whose sample point lies on
/// an edge are included as well.
pub fn rasterize_polygon(poly: &Polygon, width: u32, height: u32) -> Result<BinaryMask, GeometryError> {
    if width == 0 || height == 0 {
        return Err(GeometryError::EmptyImage);
    }
    let (xmax, ymax) = ((width - 1) as f64, (height - 1) as f64);
    if !touches_rect(poly, xmax, ymax) {
        return Err(GeometryError::EmptyAfterClamp { width, height });
    }
    let clamped: Vec<Point2> = poly
        .vertices()
        .iter()
        .map(|p| Point2::new(p.x.clamp(0.0, xmax), p.y.clamp(0.0, ymax)))
        .collect();
    let n = clamped.len();
    let edges: Vec<(Point2, Point2)> = (0..n).map(|i| (clamped[i], clamped[(i + 1) % n])).collect();

    let mut mask = BinaryMask::new(width, height);
    let mut crossings: Vec<f64> = Vec::with_capacity(n);
    for row in 0..height {
        let y = row as f64;
        crossings.clear();
        for &(a, b) in &edges {
            // half-open in y so shared vertices are counted once
            let (lo, hi) = if a.y <= b.y { (a, b) } else { (b, a) };
            if lo.y <= y && y < hi.y {
                crossings.push(lo.x + (y - lo.y) * (hi.x - lo.x) / (hi.y - lo.y));
            }
        }
        crossings.sort_by(f64::total_cmp);
        for span in crossings.chunks_exact(2) {
            let start = (span[0] - ON_EDGE_EPS).ceil().max(0.0) as u32;
            let end = (span[1] + ON_EDGE_EPS).floor().min(xmax);
            if end < 0.0 {
                continue;
            }
            for x in start..=end as u32 {
                mask.set(x, row, true);
            }
        }
    }

    for &(a, b) in &edges {
        mark_edge_samples(&mut mask, a, b);
    }

    if mask.is_empty() {
        return Err(GeometryError::EmptyAfterClamp { width, height });
    }
    Ok(mask)
}

/// Whether `poly` (edges or interior) meets the closed rectangle `[0, xmax] x [0, ymax]`.
fn touches_rect(poly: &Polygon, xmax: f64, ymax: f64) -> bool {
    let clips = |a: Point2, b: Point2| {
        // Liang-Barsky: shrink [t0, t1] to the part of a..b inside the rectangle
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for (p, q) in [(-dx, a.x), (dx, xmax - a.x), (-dy, a.y), (dy, ymax - a.y)] {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let t = q / p;
                if p < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
            }
        }
        t0 <= t1
    };
    if poly.edges().any(|(a, b)| clips(a, b)) {
        return true;
    }
    // no edge reaches the rectangle: it is either fully inside the polygon or disjoint
    let mut inside = false;
    for (a, b) in poly.edges() {
        if (a.y > 0.0) != (b.y > 0.0) && 0.0 < a.x + (0.0 - a.y) * (b.x - a.x) / (b.y - a.y) {
            inside = !inside;
        }
    }
    inside
}

/// Marks integer sample points lying on segment `a..b` (already inside the raster).
fn mark_edge_samples(mask: &mut BinaryMask, a: Point2, b: Point2) {
    let y0 = (a.y.min(b.y) - ON_EDGE_EPS).ceil() as i64;
    let y1 = (a.y.max(b.y) + ON_EDGE_EPS).floor() as i64;
    for y in y0..=y1 {
        let yf = y as f64;
        if (b.y - a.y).abs() < ON_EDGE_EPS {
            let x0 = (a.x.min(b.x) - ON_EDGE_EPS).ceil() as i64;
            let x1 = (a.x.max(b.x) + ON_EDGE_EPS).floor() as i64;
            for x in x0..=x1 {
                set_checked(mask, x, y);
            }
        } else {
            let x = a.x + (yf - a.y) * (b.x - a.x) / (b.y - a.y);
            let rounded = x.round();
            if (x - rounded).abs() < ON_EDGE_EPS {
                set_checked(mask, rounded as i64, y);
            }
        }
    }
}

fn set_checked(mask: &mut BinaryMask, x: i64, y: i64) {
    if x >= 0 && y >= 0 && x < mask.width() as i64 && y < mask.height() as i64 {
        mask.set(x as u32, y as u32, true);
    }
}

/// One-pixel Bresenham segment between the rounded endpoints, clipped to the image.
pub fn draw_line(a: Point2, b: Point2, width: u32, height: u32) -> Result<BinaryMask, GeometryError> {
    if width == 0 || height == 0 {
        return Err(GeometryError::EmptyImage);
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    let (mut x0, mut y0) = (a.x.round() as i64, a.y.round() as i64);
    let (x1, y1) = (b.x.round() as i64, b.y.round() as i64);
    if (x0, y0) == (x1, y1) {
        return Err(GeometryError::DegenerateLine);
    }
    let mut mask = BinaryMask::new(width, height);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        set_checked(&mut mask, x0, y0);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
    Ok(mask)
}

/// `iterations` rounds of dilation by the 3x3 square, clipped to the raster.
///
/// Repeated square dilation equals a single Chebyshev-radius dilation, so the
/// work is done as two separable running-window passes.
pub fn binary_dilate(mask: &BinaryMask, iterations: u32) -> BinaryMask {
    if iterations == 0 || mask.is_empty() {
        return mask.clone();
    }
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let r = iterations as usize * StructuringElement::RADIUS as usize;

    let mut horizontal = vec![false; w * h];
    let mut prefix = vec![0u32; w.max(h) + 1];
    for y in 0..h {
        let row = &mask.data()[y * w..(y + 1) * w];
        for x in 0..w {
            prefix[x + 1] = prefix[x] + row[x] as u32;
        }
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r + 1).min(w);
            horizontal[y * w + x] = prefix[hi] > prefix[lo];
        }
    }

    let mut out = vec![false; w * h];
    for x in 0..w {
        for y in 0..h {
            prefix[y + 1] = prefix[y] + horizontal[y * w + x] as u32;
        }
        for y in 0..h {
            let lo = y.saturating_sub(r);
            let hi = (y + r + 1).min(h);
            out[y * w + x] = prefix[hi] > prefix[lo];
        }
    }
    BinaryMask::from_vec(mask.width(), mask.height(), out).expect("dims preserved")
}

/// Rasterizes `poly` and splits its pixels into four quadrants around the
/// polygon centroid, in row-major order: top-left, top-right, bottom-left,
/// bottom-right. A pixel with `x <= cx` is "left", with `y <= cy` is "top".
pub fn centroid_quadrants(poly: &Polygon, width: u32, height: u32) -> Result<[BinaryMask; 4], GeometryError> {
    let c = polygon_centroid(poly)?;
    let raster = rasterize_polygon(poly, width, height)?;
    let mut quads: [BinaryMask; 4] = std::array::from_fn(|_| BinaryMask::new(width, height));
    for (x, y) in raster.iter_ones() {
        let right = x as f64 > c.x;
        let bottom = y as f64 > c.y;
        quads[(bottom as usize) * 2 + right as usize].set(x, y, true);
    }
    Ok(quads)
}
