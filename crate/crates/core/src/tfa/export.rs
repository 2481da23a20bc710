//! Image files: 8-bit PNG for inspection and the `TFA1` float32 tensor
//! format used for training and test data.
//!
//! `TFA1` layout (little-endian): magic `b"TFA1"`, `u32` height, `u32` width,
//! `u32` channels, then `height·width·channels` row-major `f32` values.

use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::Path;

use super::RgbImage;
use crate::error::{Error, Result};

pub const TFA_MAGIC: &[u8; 4] = b"TFA1";
const HEADER_LEN: usize = 16;

pub fn write_tfa(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(HEADER_LEN + img.data.len() * 4);
    bytes.extend_from_slice(TFA_MAGIC);
    for dim in [img.height, img.width, img.channels] {
        let dim = u32::try_from(dim).map_err(|_| Error::data("image dimension exceeds u32"))?;
        bytes.extend_from_slice(&dim.to_le_bytes());
    }
    for v in &img.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_tfa(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let malformed = |offset: usize, message: &str| Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.to_string(),
    };
    if bytes.len() < HEADER_LEN {
        return Err(malformed(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != TFA_MAGIC {
        return Err(malformed(0, "bad magic, expected TFA1"));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (height, width, channels) = (dim(0), dim(1), dim(2));
    let count = height
        .checked_mul(width)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| malformed(4, "dimensions overflow"))?;
    let expected = HEADER_LEN + count * 4;
    if bytes.len() < expected {
        return Err(malformed(bytes.len(), "truncated pixel data"));
    }
    if bytes.len() > expected {
        return Err(malformed(expected, "trailing bytes after pixel data"));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RgbImage::new(height, width, channels, data)
}

/// Writes an 8-bit PNG (RGB for 3 channels, grayscale for 1).
pub fn write_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let color = match img.channels {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => return Err(Error::data(format!("cannot encode {c}-channel image as PNG"))),
    };
    let pixels: Vec<u8> = img
        .data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), img.width as u32, img.height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    let mut writer = encoder.write_header().map_err(to_io)?;
    writer.write_image_data(&pixels).map_err(to_io)?;
    writer.finish().map_err(to_io)?;
    Ok(())
}

/// Encodes raw 8-bit RGB rows, used by the report plots.
pub(crate) fn write_rgb8_png(width: usize, height: usize, pixels: &[u8], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    let mut writer = encoder.write_header().map_err(to_io)?;
    writer.write_image_data(pixels).map_err(to_io)?;
    writer.finish().map_err(to_io)?;
    Ok(())
}
