//! Bicubic and nearest-neighbor resampling.
//!
//! Bicubic uses the Keys kernel (a = -0.5) with pixel-center alignment and
//! edge replication. When shrinking, the kernel is stretched by the scale
//! factor (the usual anti-alias treatment), and weights are renormalized so
//! constants map to constants exactly.

use crate::error::CoreError;
use crate::raster::{ImageGray, ImageRgb};
use crate::Result;

/// Keys cubic, a = -0.5.
#[inline]
fn cubic(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        (1.5 * t - 2.5) * t * t + 1.0
    } else if t < 2.0 {
        ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0
    } else {
        0.0
    }
}

/// Precomputed sample positions and weights for one output axis. Taps that
/// fall outside the image are folded onto the nearest edge sample
/// (replication), and each tap row is normalized to sum 1.
fn axis_weights(n_in: usize, n_out: usize) -> Vec<(usize, Vec<f64>)> {
    let ratio = n_in as f64 / n_out as f64;
    let scale = ratio.max(1.0);
    let support = 2.0 * scale;
    let max_i = n_in as isize - 1;
    let mut rows = Vec::with_capacity(n_out);
    for o in 0..n_out {
        let center = (o as f64 + 0.5) * ratio - 0.5;
        let lo = (center - support).ceil() as isize;
        let hi = (center + support).floor() as isize;
        let start = lo.clamp(0, max_i) as usize;
        let end = hi.clamp(0, max_i) as usize;
        let mut folded = vec![0.0f64; end - start + 1];
        let mut sum = 0.0;
        for i in lo..=hi {
            let w = cubic((i as f64 - center) / scale) / scale;
            folded[(i.clamp(0, max_i) as usize) - start] += w;
            sum += w;
        }
        for w in &mut folded {
            *w /= sum;
        }
        rows.push((start, folded));
    }
    rows
}

pub fn resize_bicubic(img: &ImageGray, out_w: usize, out_h: usize) -> Result<ImageGray> {
    if out_w == 0 || out_h == 0 {
        return Err(CoreError::Parameter("resize target must be non-empty".into()));
    }
    let wx = axis_weights(img.width(), out_w);
    let wy = axis_weights(img.height(), out_h);

    // Horizontal pass.
    let mut tmp = vec![0.0f64; out_w * img.height()];
    for y in 0..img.height() {
        let row = img.row(y);
        for (ox, (start, ws)) in wx.iter().enumerate() {
            let mut acc = 0.0;
            for (i, w) in ws.iter().enumerate() {
                acc += w * row[start + i] as f64;
            }
            tmp[y * out_w + ox] = acc;
        }
    }
    // Vertical pass.
    let mut out = ImageGray::zeros(out_w, out_h);
    for (oy, (start, ws)) in wy.iter().enumerate() {
        for ox in 0..out_w {
            let mut acc = 0.0;
            for (i, w) in ws.iter().enumerate() {
                acc += w * tmp[(start + i) * out_w + ox];
            }
            out.set(ox, oy, acc as f32);
        }
    }
    Ok(out)
}

pub fn resize_bicubic_rgb(img: &ImageRgb, out_w: usize, out_h: usize) -> Result<ImageRgb> {
    img.map_planes(|p| resize_bicubic(p, out_w, out_h))
}

pub fn upsample_nearest(img: &ImageGray, factor: usize) -> Result<ImageGray> {
    if factor == 0 {
        return Err(CoreError::Parameter("upsample factor must be positive".into()));
    }
    let (w, h) = (img.width() * factor, img.height() * factor);
    let mut out = ImageGray::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, img.get(x / factor, y / factor));
        }
    }
    Ok(out)
}

pub fn upsample_nearest_rgb(img: &ImageRgb, factor: usize) -> Result<ImageRgb> {
    img.map_planes(|p| upsample_nearest(p, factor))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_map_to_constants() {
        let img = ImageGray::filled(13, 9, 0.37);
        for (w, h) in [(26, 18), (7, 5), (13, 9), (52, 36)] {
            let out = resize_bicubic(&img, w, h).unwrap();
            for &v in out.data() {
                assert!((v - 0.37).abs() < 1e-6, "{w}x{h}");
            }
        }
    }

    #[test]
    fn identity_resize_is_exact_within_rounding() {
        let img = crate::synth::texture(4, 16, 12).to_grayscale();
        let out = resize_bicubic(&img, 16, 12).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn nearest_blocks_replicate_pixels() {
        let img = ImageGray::new(2, 1, vec![0.0, 1.0]).unwrap();
        let out = upsample_nearest(&img, 3).unwrap();
        assert_eq!((out.width(), out.height()), (6, 3));
        assert_eq!(out.get(2, 1), 0.0);
        assert_eq!(out.get(3, 1), 1.0);
    }

    #[test]
    fn downscale_averages_rather_than_aliases() {
        // A 1px checkerboard downscaled 4x must land near the mean, not on
        // one of the two extremes (the anti-alias kernel must be scaled).
        let mut img = ImageGray::zeros(32, 32);
        for y in 0..32 {
            for x in 0..32 {
                img.set(x, y, ((x + y) % 2) as f32);
            }
        }
        let out = resize_bicubic(&img, 8, 8).unwrap();
        for y in 2..6 {
            for x in 2..6 {
                assert!(
                    (out.get(x, y) - 0.5).abs() < 0.05,
                    "aliased value {} at {x},{y}",
                    out.get(x, y)
                );
            }
        }
    }
}
