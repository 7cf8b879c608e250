//! Planar float rasters.
//!
//! Pixels are `f32` in `[0, 1]`, row-major within each plane. Color images
//! keep three separate planes (R, G, B) rather than interleaving; every
//! numeric stage in the pipeline works on whole planes, so the planar layout
//! avoids a deinterleave at each call site.

use crate::error::CoreError;
use crate::Result;

/// Single-plane raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGray {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

/// Three-plane RGB raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    planes: [Vec<f32>; 3],
}

impl ImageGray {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CoreError::Dimension(format!(
                "empty raster {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(CoreError::Dimension(format!(
                "plane length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(ImageGray {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        ImageGray {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        ImageGray {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Rectangular copy. `x + w` and `y + h` must stay inside the raster.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<ImageGray> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(CoreError::Dimension(format!(
                "crop {w}x{h}+{x}+{y} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for yy in y..y + h {
            data.extend_from_slice(&self.data[yy * self.width + x..yy * self.width + x + w]);
        }
        Ok(ImageGray {
            width: w,
            height: h,
            data,
        })
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, planes: [Vec<f32>; 3]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CoreError::Dimension(format!(
                "empty raster {width}x{height}"
            )));
        }
        for p in &planes {
            if p.len() != width * height {
                return Err(CoreError::Dimension(format!(
                    "plane length {} does not match {width}x{height}",
                    p.len()
                )));
            }
        }
        Ok(ImageRgb {
            width,
            height,
            planes,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        let plane = vec![0.0; width * height];
        ImageRgb {
            width,
            height,
            planes: [plane.clone(), plane.clone(), plane],
        }
    }

    /// Replicates one plane into all three channels.
    pub fn from_gray(gray: &ImageGray) -> Self {
        let plane = gray.data().to_vec();
        ImageRgb {
            width: gray.width(),
            height: gray.height(),
            planes: [plane.clone(), plane.clone(), plane],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[f32] {
        &self.planes[c]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        &mut self.planes[c]
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f32 {
        self.planes[c][y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f32) {
        self.planes[c][y * self.width + x] = v;
    }

    pub fn plane_image(&self, c: usize) -> ImageGray {
        ImageGray {
            width: self.width,
            height: self.height,
            data: self.planes[c].clone(),
        }
    }

    pub fn from_planes(planes: [ImageGray; 3]) -> Result<Self> {
        let (w, h) = (planes[0].width(), planes[0].height());
        if planes.iter().any(|p| p.width() != w || p.height() != h) {
            return Err(CoreError::Dimension("plane size mismatch".into()));
        }
        let [r, g, b] = planes;
        Ok(ImageRgb {
            width: w,
            height: h,
            planes: [r.data, g.data, b.data],
        })
    }

    /// BT.601 luma: `0.299 R + 0.587 G + 0.114 B`.
    pub fn to_grayscale(&self) -> ImageGray {
        let n = self.width * self.height;
        let mut data = Vec::with_capacity(n);
        let (r, g, b) = (&self.planes[0], &self.planes[1], &self.planes[2]);
        for i in 0..n {
            data.push(0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i]);
        }
        ImageGray {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<ImageRgb> {
        let r = self.plane_image(0).crop(x, y, w, h)?;
        let g = self.plane_image(1).crop(x, y, w, h)?;
        let b = self.plane_image(2).crop(x, y, w, h)?;
        ImageRgb::from_planes([r, g, b])
    }

    pub fn clamp_unit(&mut self) {
        for p in &mut self.planes {
            for v in p.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
        }
    }

    /// Applies `f` to each plane independently.
    pub fn map_planes(&self, mut f: impl FnMut(&ImageGray) -> Result<ImageGray>) -> Result<ImageRgb> {
        let r = f(&self.plane_image(0))?;
        let g = f(&self.plane_image(1))?;
        let b = f(&self.plane_image(2))?;
        ImageRgb::from_planes([r, g, b])
    }
}
