//! True 2-D convolution, strided downsampling and kernel composition.
//!
//! `convolve2d` is genuine convolution (the kernel is flipped relative to
//! cross-correlation). Border handling is explicit at every call site:
//!
//! * `Reflect` mirrors with the edge pixel included (`-1 -> 0`, `-2 -> 1`),
//!   used by the analytics stack;
//! * `Zero` pads with zeros, same-size output;
//! * `Valid` keeps only fully supported positions, used by the synthesizer so
//!   no fabricated pixels ever enter a training pair.
//!
//! Accumulation is f64 even though rasters are f32; at the image sizes this
//! pipeline handles the cost is irrelevant and it keeps the cascade
//! equivalence identity tight.

use crate::error::CoreError;
use crate::kernel::Kernel2d;
use crate::raster::{ImageGray, ImageRgb};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Border {
    Reflect,
    Zero,
    Valid,
}

/// Mirrors an out-of-range index back into `0..n` (edge pixel included).
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    // A couple of iterations suffice unless the kernel dwarfs the image.
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// True convolution of a single plane with `kernel` under `border`.
///
/// For odd-sized kernels the output of `Reflect`/`Zero` is pixel-aligned with
/// the input. `Valid` output has size `(W - kw + 1, H - kh + 1)`, and its
/// `(0, 0)` pixel corresponds to input position `(kw/2, kh/2)` of the
/// same-size variants. Even-sized kernels are rejected: every kernel in this
/// pipeline has a well-defined center.
pub fn convolve2d(img: &ImageGray, kernel: &Kernel2d, border: Border) -> Result<ImageGray> {
    let (kw, kh) = (kernel.width(), kernel.height());
    if kw % 2 == 0 || kh % 2 == 0 {
        return Err(CoreError::Parameter(format!(
            "convolve2d requires odd kernel dimensions, got {kw}x{kh}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let (rx, ry) = (kw / 2, kh / 2);

    match border {
        Border::Valid => {
            if w < kw || h < kh {
                return Err(CoreError::Dimension(format!(
                    "image {w}x{h} smaller than kernel {kw}x{kh}"
                )));
            }
            let (ow, oh) = (w - kw + 1, h - kh + 1);
            let mut out = ImageGray::zeros(ow, oh);
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0f64;
                    for ky in 0..kh {
                        let iy = oy + kh - 1 - ky;
                        let row = img.row(iy);
                        let krow = &kernel.weights()[ky * kw..(ky + 1) * kw];
                        for (kx, &kv) in krow.iter().enumerate() {
                            let ix = ox + kw - 1 - kx;
                            acc += kv as f64 * row[ix] as f64;
                        }
                    }
                    out.set(ox, oy, acc as f32);
                }
            }
            Ok(out)
        }
        Border::Zero | Border::Reflect => {
            let mut out = ImageGray::zeros(w, h);
            for oy in 0..h {
                for ox in 0..w {
                    let mut acc = 0.0f64;
                    for ky in 0..kh {
                        let iy = oy as isize + ry as isize - ky as isize;
                        for kx in 0..kw {
                            let ix = ox as isize + rx as isize - kx as isize;
                            let v = match border {
                                Border::Zero => {
                                    if ix < 0 || iy < 0 || ix >= w as isize || iy >= h as isize {
                                        0.0
                                    } else {
                                        img.get(ix as usize, iy as usize)
                                    }
                                }
                                Border::Reflect => img.get(reflect(ix, w), reflect(iy, h)),
                                Border::Valid => unreachable!(),
                            };
                            acc += kernel.get(kx, ky) as f64 * v as f64;
                        }
                    }
                    out.set(ox, oy, acc as f32);
                }
            }
            Ok(out)
        }
    }
}

/// Per-channel convolution of an RGB raster.
pub fn convolve2d_rgb(img: &ImageRgb, kernel: &Kernel2d, border: Border) -> Result<ImageRgb> {
    img.map_planes(|p| convolve2d(p, kernel, border))
}

/// Keeps every `stride`-th sample starting at `offset`:
/// `out(i, j) = in(offset + stride*i, offset + stride*j)`.
pub fn downsample(img: &ImageGray, stride: usize, offset: usize) -> Result<ImageGray> {
    if stride == 0 {
        return Err(CoreError::Parameter("stride must be positive".into()));
    }
    if offset >= stride {
        return Err(CoreError::Parameter(format!(
            "offset {offset} must be smaller than stride {stride}"
        )));
    }
    if offset >= img.width() || offset >= img.height() {
        return Err(CoreError::Dimension(format!(
            "offset {offset} outside {}x{}",
            img.width(),
            img.height()
        )));
    }
    let ow = (img.width() - offset).div_ceil(stride);
    let oh = (img.height() - offset).div_ceil(stride);
    let mut out = ImageGray::zeros(ow, oh);
    for y in 0..oh {
        for x in 0..ow {
            out.set(x, y, img.get(offset + x * stride, offset + y * stride));
        }
    }
    Ok(out)
}

pub fn downsample_rgb(img: &ImageRgb, stride: usize, offset: usize) -> Result<ImageRgb> {
    img.map_planes(|p| downsample(p, stride, offset))
}

/// Zero-insertion dilation: weight `(x, y)` moves to `(f*x, f*y)` on a grid of
/// size `f*(n-1)+1` per axis. `dilate_kernel(k, 1) == k`.
pub fn dilate_kernel(kernel: &Kernel2d, factor: usize) -> Result<Kernel2d> {
    if factor == 0 {
        return Err(CoreError::Parameter("dilation factor must be positive".into()));
    }
    let (kw, kh) = (kernel.width(), kernel.height());
    let (ow, oh) = (factor * (kw - 1) + 1, factor * (kh - 1) + 1);
    let mut weights = vec![0.0f32; ow * oh];
    for y in 0..kh {
        for x in 0..kw {
            weights[(y * factor) * ow + x * factor] = kernel.get(x, y);
        }
    }
    Kernel2d::new(oh, ow, weights)
}

/// Full convolution of two kernels: support sizes add (`n + m - 1` per axis).
/// This is the composition law for applying `a` then `b` as image filters.
pub fn compose_full(a: &Kernel2d, b: &Kernel2d) -> Result<Kernel2d> {
    let (aw, ah) = (a.width(), a.height());
    let (bw, bh) = (b.width(), b.height());
    let (ow, oh) = (aw + bw - 1, ah + bh - 1);
    let mut weights = vec![0.0f64; ow * oh];
    for ay in 0..ah {
        for ax in 0..aw {
            let av = a.get(ax, ay) as f64;
            if av == 0.0 {
                continue;
            }
            for by in 0..bh {
                for bx in 0..bw {
                    weights[(ay + by) * ow + (ax + bx)] += av * b.get(bx, by) as f64;
                }
            }
        }
    }
    Kernel2d::new(oh, ow, weights.into_iter().map(|w| w as f32).collect())
}

/// Circular (wrap-around) shift by `(dx, dy)`; used by spectrum tests and the
/// kernel recentring code.
pub fn circular_shift(img: &ImageGray, dx: isize, dy: isize) -> ImageGray {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut out = ImageGray::zeros(img.width(), img.height());
    for y in 0..h {
        for x in 0..w {
            let sx = (x - dx).rem_euclid(w) as usize;
            let sy = (y - dy).rem_euclid(h) as usize;
            out.set(x as usize, y as usize, img.get(sx, sy));
        }
    }
    out
}
