//! Explicit 2-D convolution kernels and the `P-KERN 1` text format.
//!
//! The text format is deliberately dull: a header line, a dimensions line,
//! then one row of weights per line, space separated, written with nine
//! significant digits so that every `f32` survives a round trip exactly.
//!
//! ```text
//! P-KERN 1
//! 3 3
//! 0.00000000e0 2.50000000e-1 0.00000000e0
//! 2.50000000e-1 0.00000000e0 2.50000000e-1
//! 0.00000000e0 2.50000000e-1 0.00000000e0
//! ```

use crate::error::CoreError;
use crate::Result;

const HEADER: &str = "P-KERN 1";

/// Dense 2-D kernel, row-major.
///
/// `normalized` is a bookkeeping flag set by [`Kernel2d::normalize`] (and by
/// readers that verify the sum); when set, the weights sum to 1 within 1e-6.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2d {
    height: usize,
    width: usize,
    weights: Vec<f32>,
    normalized: bool,
}

impl Kernel2d {
    pub fn new(height: usize, width: usize, weights: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(CoreError::Dimension("empty kernel".into()));
        }
        if weights.len() != height * width {
            return Err(CoreError::Dimension(format!(
                "kernel weight count {} does not match {height}x{width}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(CoreError::Numeric("non-finite kernel weight".into()));
        }
        Ok(Kernel2d {
            height,
            width,
            weights,
            normalized: false,
        })
    }

    /// Centered unit impulse. Odd dimensions.
    pub fn delta(height: usize, width: usize) -> Result<Self> {
        if height % 2 == 0 || width % 2 == 0 {
            return Err(CoreError::Parameter(
                "delta kernel needs odd dimensions".into(),
            ));
        }
        let mut weights = vec![0.0; height * width];
        weights[(height / 2) * width + width / 2] = 1.0;
        let mut k = Kernel2d::new(height, width, weights)?;
        k.normalized = true;
        Ok(k)
    }

    /// Sampled isotropic Gaussian, normalized to sum 1.
    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        if size % 2 == 0 {
            return Err(CoreError::Parameter("gaussian kernel size must be odd".into()));
        }
        if sigma <= 0.0 {
            return Err(CoreError::Parameter("gaussian sigma must be positive".into()));
        }
        let c = (size / 2) as f64;
        let mut weights = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                let d2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2);
                weights.push((-d2 / (2.0 * sigma * sigma)).exp() as f32);
            }
        }
        let mut k = Kernel2d::new(size, size, weights)?;
        k.normalize();
        Ok(k)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.weights[y * self.width + x]
    }

    #[inline]
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().map(|&w| w as f64).sum()
    }

    /// Rescales the weights to sum 1 and sets the `normalized` flag.
    ///
    /// A kernel whose weights sum to zero cannot be normalized; that is a
    /// numeric failure, not a silent no-op.
    pub fn normalize(&mut self) {
        let s = self.sum();
        assert!(
            s.abs() > f64::EPSILON,
            "cannot normalize a zero-sum kernel"
        );
        for w in &mut self.weights {
            *w = (*w as f64 / s) as f32;
        }
        self.normalized = true;
    }

    /// Marks a kernel as normalized after verifying the sum. Errors if the
    /// weights do not actually sum to 1 within `1e-6`.
    pub fn assert_normalized(mut self) -> Result<Self> {
        let s = self.sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(CoreError::Numeric(format!(
                "kernel flagged normalized but sums to {s}"
            )));
        }
        self.normalized = true;
        Ok(self)
    }

    /// Center of mass in kernel pixel coordinates `(x, y)`.
    pub fn center_of_mass(&self) -> (f64, f64) {
        let mut sx = 0.0f64;
        let mut sy = 0.0f64;
        let mut s = 0.0f64;
        for y in 0..self.height {
            for x in 0..self.width {
                let w = self.get(x, y) as f64;
                sx += x as f64 * w;
                sy += y as f64 * w;
                s += w;
            }
        }
        (sx / s, sy / s)
    }

    /// Geometric center `((width-1)/2, (height-1)/2)`.
    pub fn geometric_center(&self) -> (f64, f64) {
        (
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        )
    }

    /// 180-degree rotation: converts between the cross-correlation and true
    /// convolution conventions.
    pub fn flipped(&self) -> Kernel2d {
        let mut weights = self.weights.clone();
        weights.reverse();
        Kernel2d {
            height: self.height,
            width: self.width,
            weights,
            normalized: self.normalized,
        }
    }

    /// Serializes to the `P-KERN 1` text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(HEADER);
        out.push('\n');
        out.push_str(&format!("{} {}\n", self.height, self.width));
        for y in 0..self.height {
            let row: Vec<String> = (0..self.width)
                .map(|x| format_f32(self.get(x, y)))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parses the `P-KERN 1` text format.
    pub fn from_text(text: &str) -> Result<Kernel2d> {
        let mut lines = text.lines();
        parse_kern_header(lines.next(), 1)?;
        let dims = lines
            .next()
            .ok_or_else(|| CoreError::parse("P-KERN", 2, "missing dimensions line"))?;
        let (height, width) = parse_dims(dims, 2)?;
        if height.saturating_mul(width) > MAX_KERNEL_CELLS {
            return Err(CoreError::parse(
                "P-KERN",
                2,
                format!("kernel {height}x{width} exceeds the size limit"),
            ));
        }
        let mut weights = Vec::with_capacity(height * width);
        for (i, line) in lines.by_ref().take(height).enumerate() {
            let row = parse_float_row(line, 3 + i, width, "P-KERN")?;
            weights.extend_from_slice(&row);
        }
        if weights.len() != height * width {
            return Err(CoreError::parse(
                "P-KERN",
                2 + height,
                format!("expected {height} weight rows"),
            ));
        }
        if let Some(extra) = lines.find(|l| !l.trim().is_empty()) {
            return Err(CoreError::parse(
                "P-KERN",
                0,
                format!("trailing content: {extra:?}"),
            ));
        }
        Kernel2d::new(height, width, weights)
    }
}

/// Upper bound on parsed kernel cells; kernels here are blur estimates a few
/// dozen pixels across, so anything enormous is a malformed or hostile file.
pub const MAX_KERNEL_CELLS: usize = 1 << 20;

/// Nine significant digits: exact round trip for every finite `f32`.
pub fn format_f32(v: f32) -> String {
    format!("{v:.8e}")
}

pub(crate) fn parse_kern_header(line: Option<&str>, lineno: usize) -> Result<()> {
    match line {
        Some(HEADER) => Ok(()),
        Some(other) => Err(CoreError::parse(
            "P-KERN",
            lineno,
            format!("bad header {other:?}, expected {HEADER:?}"),
        )),
        None => Err(CoreError::parse("P-KERN", lineno, "missing header")),
    }
}

pub(crate) fn parse_dims(line: &str, lineno: usize) -> Result<(usize, usize)> {
    let what = "P-KERN";
    let mut it = line.split_ascii_whitespace();
    let h = it
        .next()
        .and_then(|t| t.parse::<usize>().ok())
        .ok_or_else(|| CoreError::parse(what, lineno, "bad height"))?;
    let w = it
        .next()
        .and_then(|t| t.parse::<usize>().ok())
        .ok_or_else(|| CoreError::parse(what, lineno, "bad width"))?;
    if it.next().is_some() {
        return Err(CoreError::parse(what, lineno, "trailing tokens on dimensions line"));
    }
    if h == 0 || w == 0 {
        return Err(CoreError::parse(what, lineno, "zero kernel dimension"));
    }
    Ok((h, w))
}

pub(crate) fn parse_float_row(
    line: &str,
    lineno: usize,
    expected: usize,
    what: &'static str,
) -> Result<Vec<f32>> {
    let mut row = Vec::with_capacity(expected);
    for tok in line.split_ascii_whitespace() {
        let v: f32 = tok
            .parse()
            .map_err(|_| CoreError::parse(what, lineno, format!("bad float {tok:?}")))?;
        if !v.is_finite() {
            return Err(CoreError::parse(what, lineno, format!("non-finite value {tok:?}")));
        }
        row.push(v);
    }
    if row.len() != expected {
        return Err(CoreError::parse(
            what,
            lineno,
            format!("expected {expected} values, found {}", row.len()),
        ));
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn delta_is_centered_and_normalized() {
        let k = Kernel2d::delta(5, 5).unwrap();
        assert_eq!(k.get(2, 2), 1.0);
        assert!((k.sum() - 1.0).abs() < 1e-12);
        assert_eq!(k.center_of_mass(), (2.0, 2.0));
        assert!(k.is_normalized());
    }

    #[test]
    fn gaussian_is_symmetric_and_normalized() {
        let k = Kernel2d::gaussian(13, 1.5).unwrap();
        assert!((k.sum() - 1.0).abs() < 1e-6);
        for y in 0..13 {
            for x in 0..13 {
                let a = k.get(x, y);
                let b = k.get(12 - x, 12 - y);
                assert!((a - b).abs() < 1e-7);
            }
        }
        let (cx, cy) = k.center_of_mass();
        assert!((cx - 6.0).abs() < 1e-5 && (cy - 6.0).abs() < 1e-5);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let k = Kernel2d::gaussian(7, 0.9).unwrap();
        let text = k.to_text();
        let back = Kernel2d::from_text(&text).unwrap();
        assert_eq!(k.weights(), back.weights());
        assert_eq!(text, back.to_text(), "serialization is canonical");
    }

    #[test]
    fn rejects_malformed_headers_and_rows() {
        assert!(Kernel2d::from_text("").is_err());
        assert!(Kernel2d::from_text("P-KERN 2\n1 1\n0.0\n").is_err());
        assert!(Kernel2d::from_text("P-KERN 1\n2 2\n0 0\n0\n").is_err());
        assert!(Kernel2d::from_text("P-KERN 1\n1 1\nnan\n").is_err());
        assert!(Kernel2d::from_text("P-KERN 1\n1 1\n0.0\nextra\n").is_err());
        assert!(Kernel2d::from_text("P-KERN 1\n999999 999999\n").is_err());
    }

    #[test]
    fn flip_is_involutive() {
        let k = Kernel2d::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let f = k.flipped();
        assert_eq!(f.get(0, 0), 6.0);
        assert_eq!(f.flipped(), k);
    }

    #[test]
    fn normalize_rescales_to_unit_sum() {
        let mut k = Kernel2d::new(1, 4, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        k.normalize();
        assert!(k.is_normalized());
        assert!((k.sum() - 1.0).abs() < 1e-7);
        assert!((k.get(0, 0) - 0.25).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn prop_text_round_trip(w in 1usize..8, h in 1usize..8,
                                seed in 0u64..1000) {
            // Pseudo-random but finite weights; exact round trip required.
            let mut vals = Vec::with_capacity(w * h);
            let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
            for _ in 0..w * h {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let v = ((state >> 40) as f32 / (1u32 << 24) as f32) * 2.0 - 1.0;
                vals.push(v);
            }
            let k = Kernel2d::new(h, w, vals).unwrap();
            let back = Kernel2d::from_text(&k.to_text()).unwrap();
            prop_assert_eq!(k.weights(), back.weights());
        }
    }
}
