//! PNG decode/encode to and from planar `[0, 1]` rasters.
//!
//! Accepted inputs: 8- or 16-bit grayscale or RGB (palette images are
//! expanded to RGB first). Grayscale is replicated into three equal planes so
//! the rest of the pipeline only ever sees [`ImageRgb`]. Alpha of any kind is
//! an unsupported-format error rather than a silent drop: a transparent
//! training image is a data problem the user should see.
//!
//! Encoding quantizes to 8 bits with round-half-up; values decoded from an
//! 8-bit file re-encode bit-identically.

use crate::error::CoreError;
use crate::raster::{ImageGray, ImageRgb};
use crate::Result;
use std::io::Cursor;
use std::path::Path;

/// Decoded images are capped at this many pixels; a hostile header must not
/// turn into a multi-gigabyte allocation.
pub const MAX_PIXELS: u64 = 64 * 1024 * 1024;

/// Decodes a PNG byte stream into a planar RGB raster.
pub fn decode_png(bytes: &[u8]) -> Result<ImageRgb> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| CoreError::Decode(e.to_string()))?;

    let info = reader.info();
    let (w, h) = (info.width as u64, info.height as u64);
    if w == 0 || h == 0 || w * h > MAX_PIXELS {
        return Err(CoreError::Decode(format!("implausible dimensions {w}x{h}")));
    }

    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| {
        CoreError::Decode("output buffer size overflow".into())
    })?];
    let out = reader
        .next_frame(&mut buf)
        .map_err(|e| CoreError::Decode(e.to_string()))?;
    let (w, h) = (out.width as usize, out.height as usize);
    let data = &buf[..out.buffer_size()];

    match (out.color_type, out.bit_depth) {
        (png::ColorType::Grayscale, depth) => {
            let plane = scale_plane(data, w * h, depth)?;
            Ok(ImageRgb::new(w, h, [plane.clone(), plane.clone(), plane])?)
        }
        (png::ColorType::Rgb, depth) => {
            let flat = scale_plane(data, w * h * 3, depth)?;
            let mut planes = [
                Vec::with_capacity(w * h),
                Vec::with_capacity(w * h),
                Vec::with_capacity(w * h),
            ];
            for px in flat.chunks_exact(3) {
                planes[0].push(px[0]);
                planes[1].push(px[1]);
                planes[2].push(px[2]);
            }
            Ok(ImageRgb::new(w, h, planes)?)
        }
        (ct, _) => Err(CoreError::UnsupportedFormat(format!(
            "color type {ct:?} (alpha or unexpandable palette) is not supported"
        ))),
    }
}

/// Scales raw samples to `[0, 1]`: 8-bit by 1/255, 16-bit (big endian on the
/// wire) by 1/65535.
fn scale_plane(data: &[u8], samples: usize, depth: png::BitDepth) -> Result<Vec<f32>> {
    match depth {
        png::BitDepth::Eight => {
            if data.len() < samples {
                return Err(CoreError::Decode("truncated sample buffer".into()));
            }
            Ok(data[..samples].iter().map(|&b| b as f32 / 255.0).collect())
        }
        png::BitDepth::Sixteen => {
            if data.len() < samples * 2 {
                return Err(CoreError::Decode("truncated sample buffer".into()));
            }
            Ok(data[..samples * 2]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 / 65535.0)
                .collect())
        }
        other => Err(CoreError::UnsupportedFormat(format!(
            "bit depth {other:?} after expansion"
        ))),
    }
}

/// Encodes to an 8-bit RGB PNG.
pub fn encode_png(img: &ImageRgb) -> Result<Vec<u8>> {
    let mut raw = Vec::with_capacity(img.width() * img.height() * 3);
    for i in 0..img.width() * img.height() {
        for c in 0..3 {
            raw.push(quantize8(img.plane(c)[i]));
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| CoreError::Decode(format!("png encode: {e}")))?;
        writer
            .write_image_data(&raw)
            .map_err(|e| CoreError::Decode(format!("png encode: {e}")))?;
    }
    Ok(out)
}

#[inline]
fn quantize8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn read_png(path: &Path) -> Result<ImageRgb> {
    let bytes = std::fs::read(path).map_err(|e| CoreError::io(path, e))?;
    decode_png(&bytes)
}

pub fn write_png(path: &Path, img: &ImageRgb) -> Result<()> {
    let bytes = encode_png(img)?;
    std::fs::write(path, bytes).map_err(|e| CoreError::io(path, e))
}

/// Grayscale convenience wrapper: luma of the decoded image.
pub fn read_png_gray(path: &Path) -> Result<ImageGray> {
    Ok(read_png(path)?.to_grayscale())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn quantized_random_image(seed: u64, w: usize, h: usize) -> ImageRgb {
        // Values on the exact k/255 lattice so the 8-bit round trip is exact.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut planes = [vec![], vec![], vec![]];
        for p in planes.iter_mut() {
            *p = (0..w * h)
                .map(|_| rng.random_range(0..=255u32) as f32 / 255.0)
                .collect();
        }
        ImageRgb::new(w, h, planes).unwrap()
    }

    #[test]
    fn decode_encode_round_trip_is_exact_for_8bit() {
        let img = quantized_random_image(5, 23, 17);
        let bytes = encode_png(&img).unwrap();
        let back = decode_png(&bytes).unwrap();
        assert_eq!(img, back);
        // And re-encoding produces identical bytes (determinism).
        assert_eq!(bytes, encode_png(&back).unwrap());
    }

    #[test]
    fn sixteen_bit_grayscale_decodes_with_full_scale() {
        let mut bytes = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut bytes, 2, 1);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Sixteen);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[0x00, 0x00, 0xff, 0xff]).unwrap();
        }
        let img = decode_png(&bytes).unwrap();
        assert_eq!(img.get(0, 0, 0), 0.0);
        assert_eq!(img.get(0, 1, 0), 1.0);
        assert_eq!(img.get(1, 1, 0), 1.0, "gray replicated into all planes");
    }

    #[test]
    fn grayscale_replicates_to_three_planes() {
        let mut bytes = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut bytes, 1, 1);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[128]).unwrap();
        }
        let img = decode_png(&bytes).unwrap();
        let v = 128.0 / 255.0;
        for c in 0..3 {
            assert!((img.get(c, 0, 0) - v).abs() < 1e-7);
        }
    }

    #[test]
    fn alpha_is_an_unsupported_format_error() {
        let mut bytes = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut bytes, 1, 1);
            enc.set_color(png::ColorType::Rgba);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[1, 2, 3, 4]).unwrap();
        }
        match decode_png(&bytes) {
            Err(CoreError::UnsupportedFormat(_)) => {}
            other => panic!("expected UnsupportedFormat, got {other:?}"),
        }
    }

    #[test]
    fn truncated_stream_is_a_decode_error() {
        let img = quantized_random_image(1, 8, 8);
        let bytes = encode_png(&img).unwrap();
        for cut in [0, 4, 16, bytes.len() / 2] {
            match decode_png(&bytes[..cut]) {
                Err(CoreError::Decode(_)) => {}
                other => panic!("cut at {cut}: expected Decode error, got {other:?}"),
            }
        }
    }

    #[test]
    fn garbage_bytes_do_not_panic() {
        let junk: Vec<u8> = (0..512u32).map(|i| (i * 97 % 251) as u8).collect();
        assert!(decode_png(&junk).is_err());
    }
}
