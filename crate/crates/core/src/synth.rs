//! Deterministic synthetic imagery for tests, fixtures and calibration.
//!
//! Real photographs cannot be shipped with the repository, so the test corpus
//! is generated: layered low-frequency gradients, band-limited noise at
//! several scales, occasional hard-edged patches and a touch of fine grain.
//! The mix is tuned to have natural-image-like statistics (heavy-tailed
//! bandpass responses, correlated channels) rather than to look pretty.
//! Everything is seeded; the same seed always yields the same pixels.

use crate::raster::{ImageGray, ImageRgb};
use crate::resize::resize_bicubic;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Band-limited noise: white noise on a coarse grid, bicubically upsampled.
fn noise_layer(rng: &mut ChaCha8Rng, w: usize, h: usize, grid: usize, amp: f32) -> ImageGray {
    let gw = (w / grid).max(2);
    let gh = (h / grid).max(2);
    let normal = Normal::new(0.0f64, 1.0).unwrap();
    let mut coarse = ImageGray::zeros(gw, gh);
    for v in coarse.data_mut() {
        *v = (normal.sample(rng) * amp as f64) as f32;
    }
    resize_bicubic(&coarse, w, h).expect("non-empty resize")
}

/// Textured color image with pixel values safely inside `[0, 1]`.
pub fn texture(seed: u64, w: usize, h: usize) -> ImageRgb {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut luma = ImageGray::filled(w, h, 0.5);

    // Two low-frequency plane waves with random orientation.
    for _ in 0..2 {
        let fx = rng.random_range(0.3..1.6) / w as f64;
        let fy = rng.random_range(0.3..1.6) / h as f64;
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let amp = rng.random_range(0.05..0.15);
        for y in 0..h {
            for x in 0..w {
                let v = (std::f64::consts::TAU * (fx * x as f64 + fy * y as f64) + phase).sin();
                let old = luma.get(x, y);
                luma.set(x, y, old + (amp * v) as f32);
            }
        }
    }

    // Band-limited noise at three scales.
    for (grid, amp) in [(16, 0.10), (6, 0.07), (2, 0.05)] {
        let layer = noise_layer(&mut rng, w, h, grid, amp);
        for (dst, src) in luma.data_mut().iter_mut().zip(layer.data()) {
            *dst += *src;
        }
    }

    // A few hard-edged rectangles for step content.
    let n_rects = rng.random_range(2..5);
    for _ in 0..n_rects {
        let rw = rng.random_range(w / 8..w / 2 + 1);
        let rh = rng.random_range(h / 8..h / 2 + 1);
        let x0 = rng.random_range(0..w - rw + 1);
        let y0 = rng.random_range(0..h - rh + 1);
        let dv = rng.random_range(-0.18..0.18f32);
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                let old = luma.get(x, y);
                luma.set(x, y, old + dv);
            }
        }
    }

    // Fine grain.
    let normal = Normal::new(0.0f64, 0.008).unwrap();
    for v in luma.data_mut() {
        *v += normal.sample(&mut rng) as f32;
    }

    // Mild per-channel tints and independent chroma wobble keep channels
    // correlated but not identical.
    let tint: [f32; 3] = [
        rng.random_range(-0.04..0.04),
        rng.random_range(-0.04..0.04),
        rng.random_range(-0.04..0.04),
    ];
    let mut planes: [Vec<f32>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (c, plane) in planes.iter_mut().enumerate() {
        let wobble = noise_layer(&mut rng, w, h, 12, 0.03);
        let mut data = Vec::with_capacity(w * h);
        for (i, &v) in luma.data().iter().enumerate() {
            data.push((v + tint[c] + wobble.data()[i]).clamp(0.02, 0.98));
        }
        *plane = data;
    }
    ImageRgb::new(w, h, planes).expect("generated planes are consistent")
}

/// Gray plane with step edges and a line pattern: the PSNR test card.
/// Smooth regions expose ringing, the steps expose blur, the line pattern
/// exposes aliasing.
pub fn test_card(w: usize, h: usize) -> ImageRgb {
    let mut g = ImageGray::filled(w, h, 0.5);
    // Vertical and horizontal step edges at one and two thirds.
    for y in 0..h {
        for x in 0..w {
            let mut v = 0.45f32;
            if x >= w / 3 {
                v += 0.25;
            }
            if y >= 2 * h / 3 {
                v -= 0.35;
            }
            if x >= 2 * w / 3 && y < h / 3 {
                v = 0.15;
            }
            g.set(x, y, v);
        }
    }
    // Line pattern block (period 4 px so it survives a x4 round trip).
    for y in h / 2..(h / 2 + h / 4).min(h) {
        for x in w / 8..(3 * w / 8).min(w) {
            if (x / 2) % 2 == 0 {
                g.set(x, y, 0.85);
            }
        }
    }
    ImageRgb::from_gray(&g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texture_is_deterministic_per_seed() {
        let a = texture(9, 40, 30);
        let b = texture(9, 40, 30);
        assert_eq!(a, b);
        let c = texture(10, 40, 30);
        assert_ne!(a, c);
    }

    #[test]
    fn texture_stays_inside_unit_range() {
        let img = texture(3, 64, 64);
        for c in 0..3 {
            for &v in img.plane(c) {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn texture_has_spread() {
        let img = texture(5, 64, 64).to_grayscale();
        let mean = img.mean();
        let var = img
            .data()
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / img.data().len() as f64;
        assert!(var > 1e-3, "texture too flat: var {var}");
    }

    #[test]
    fn test_card_has_both_edges_and_flats() {
        let img = test_card(64, 64).to_grayscale();
        let mut max_step = 0.0f32;
        for y in 0..64 {
            for x in 1..64 {
                max_step = max_step.max((img.get(x, y) - img.get(x - 1, y)).abs());
            }
        }
        assert!(max_step > 0.2, "no hard edges");
        assert_eq!(img.get(1, 1), img.get(2, 2), "flat region is flat");
    }
}
