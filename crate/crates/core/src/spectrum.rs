//! Exact-size centered 2-D DFT magnitudes.
//!
//! The transform is taken at the image's own dimensions (no padding to a
//! power of two; rustfft handles arbitrary sizes exactly via mixed-radix and
//! Bluestein plans), normalized by `1/(M*N)`, then shifted so DC sits at
//! `(floor(M/2), floor(N/2))` where `M` is the width and `N` the height.
//! Computation is f64 end to end: analytics tolerances downstream are 1e-9.

use crate::raster::ImageGray;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Magnitudes of the centered, normalized spectrum. Row-major, `u` along the
/// width axis, `v` along the height axis, DC at `(floor(M/2), floor(N/2))`.
#[derive(Debug, Clone)]
pub struct MagnitudeSpectrum {
    width: usize,
    height: usize,
    mag: Vec<f64>,
}

impl MagnitudeSpectrum {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.mag[v * self.width + u]
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.mag
    }

    /// DC bin position `(floor(M/2), floor(N/2))`.
    pub fn dc_position(&self) -> (usize, usize) {
        (self.width / 2, self.height / 2)
    }

    /// Sum of all magnitudes (the total-energy term of the sharpness score).
    pub fn total(&self) -> f64 {
        self.mag.iter().sum()
    }
}

/// Centered, `1/(M*N)`-normalized DFT magnitude of a single plane.
pub fn dft2_centered_magnitude(img: &ImageGray) -> MagnitudeSpectrum {
    let (w, h) = (img.width(), img.height());
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);

    // Row pass (transform along x for every y).
    let mut grid: Vec<Complex<f64>> = img
        .data()
        .iter()
        .map(|&v| Complex::new(v as f64, 0.0))
        .collect();
    for row in grid.chunks_exact_mut(w) {
        row_fft.process(row);
    }

    // Column pass via transpose, transform, transpose back.
    let mut t: Vec<Complex<f64>> = vec![Complex::default(); w * h];
    for y in 0..h {
        for x in 0..w {
            t[x * h + y] = grid[y * w + x];
        }
    }
    for col in t.chunks_exact_mut(h) {
        col_fft.process(col);
    }

    let norm = 1.0 / (w as f64 * h as f64);
    let (sx, sy) = (w / 2, h / 2);
    let mut mag = vec![0.0f64; w * h];
    for v in 0..h {
        for u in 0..w {
            let su = (u + sx) % w;
            let sv = (v + sy) % h;
            mag[sv * w + su] = t[u * h + v].norm() * norm;
        }
    }
    MagnitudeSpectrum {
        width: w,
        height: h,
        mag,
    }
}
