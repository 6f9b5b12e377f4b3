use image::{Rgb, RgbImage};

use super::PipelineError;

pub const MODEL_INPUT_SIZE: u32 = 224;

/// Scales `image` to fit a `target`x`target` square keeping its aspect
/// ratio, with bilinear sampling, and centres it on a black canvas.
pub fn resize_pad(image: &RgbImage, target: u32) -> Result<RgbImage, PipelineError> {
    let (w, h) = image.dimensions();
    if w == 0 || h == 0 || target == 0 {
        return Err(PipelineError::EmptyImage);
    }
    let scale = (target as f64 / w as f64).min(target as f64 / h as f64);
    let nw = ((w as f64 * scale).round() as u32).clamp(1, target);
    let nh = ((h as f64 * scale).round() as u32).clamp(1, target);
    let (ox, oy) = ((target - nw) / 2, (target - nh) / 2);
    // per-axis factors so the content exactly spans nw x nh
    let (sx, sy) = (w as f64 / nw as f64, h as f64 / nh as f64);

    let mut out = RgbImage::new(target, target);
    for y in 0..nh {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let (y0, ty) = (fy.floor() as u32, fy - fy.floor());
        let y1 = (y0 + 1).min(h - 1);
        for x in 0..nw {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let (x0, tx) = (fx.floor() as u32, fx - fx.floor());
            let x1 = (x0 + 1).min(w - 1);
            let (a, b, c, d) = (
                image.get_pixel(x0, y0).0,
                image.get_pixel(x1, y0).0,
                image.get_pixel(x0, y1).0,
                image.get_pixel(x1, y1).0,
            );
            let px = std::array::from_fn(|k| {
                let top = a[k] as f64 * (1.0 - tx) + b[k] as f64 * tx;
                let bottom = c[k] as f64 * (1.0 - tx) + d[k] as f64 * tx;
                (top * (1.0 - ty) + bottom * ty).round().clamp(0.0, 255.0) as u8
            });
            out.put_pixel(ox + x, oy + y, Rgb(px));
        }
    }
    Ok(out)
}
