//! Small fidelity metrics used by the SR evaluation paths.

use crate::error::CoreError;
use crate::raster::ImageRgb;
use crate::Result;

/// Mean squared error over all three planes.
pub fn mse(a: &ImageRgb, b: &ImageRgb) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(CoreError::Dimension(format!(
            "mse size mismatch {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let mut acc = 0.0f64;
    for c in 0..3 {
        for (x, y) in a.plane(c).iter().zip(b.plane(c)) {
            acc += (*x as f64 - *y as f64).powi(2);
        }
    }
    Ok(acc / (3 * a.width() * a.height()) as f64)
}

/// PSNR in dB for unit-range images. Identical images yield infinity.
pub fn psnr(a: &ImageRgb, b: &ImageRgb) -> Result<f64> {
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * e.log10())
}
