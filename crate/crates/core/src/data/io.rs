//! PPM (P6) and 8-bit PNG reading and writing.

use std::fs;
use std::path::Path;

use super::ImageRGB;
use crate::error::{Error, Result};

fn quantise(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Decodes a binary PPM with maxval ≤ 255.
pub fn decode_ppm(bytes: &[u8]) -> Result<ImageRGB> {
    let mut pos = 0usize;
    let mut fields: Vec<usize> = Vec::with_capacity(3);
    if bytes.get(..2) != Some(b"P6") {
        return Err(Error::format(0, "missing P6 magic"));
    }
    pos += 2;
    while fields.len() < 3 {
        match bytes.get(pos) {
            None => return Err(Error::format(pos as u64, "truncated PPM header")),
            Some(b'#') => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            Some(c) if c.is_ascii_whitespace() => pos += 1,
            Some(c) if c.is_ascii_digit() => {
                let start = pos;
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
                let s = std::str::from_utf8(&bytes[start..pos]).unwrap();
                let v = s.parse().map_err(|_| Error::format(start as u64, "header number out of range"))?;
                fields.push(v);
            }
            Some(_) => return Err(Error::format(pos as u64, "unexpected byte in PPM header")),
        }
    }
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::format(pos as u64, "missing whitespace after PPM header")),
    }
    let (w, h, maxval) = (fields[0], fields[1], fields[2]);
    if w == 0 || h == 0 {
        return Err(Error::format(pos as u64, "zero image dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(pos as u64, format!("unsupported maxval {maxval}")));
    }
    let n = w * h;
    let payload = bytes
        .get(pos..pos + 3 * n)
        .ok_or_else(|| Error::format(bytes.len() as u64, format!("pixel payload truncated, expected {} bytes", 3 * n)))?;
    let mut data = vec![0.0f32; 3 * n];
    let scale = maxval as f32;
    for (i, px) in payload.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * n + i] = (px[c] as f32 / scale).min(1.0);
        }
    }
    ImageRGB::new(h, w, data)
}

pub fn encode_ppm(img: &ImageRGB) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    let n = img.height * img.width;
    out.reserve(3 * n);
    for i in 0..n {
        for c in 0..3 {
            out.push(quantise(img.data[c * n + i]));
        }
    }
    out
}

fn decode_png(bytes: &[u8]) -> Result<ImageRGB> {
    let bad = |e: png::DecodingError| Error::format(0, format!("PNG: {e}"));
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(bad)?;
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| Error::format(0, "PNG too large"))?];
    let info = reader.next_frame(&mut buf).map_err(bad)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(0, "only 8-bit PNG is supported"));
    }
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => return Err(Error::format(0, format!("unsupported PNG colour type {other:?}"))),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let n = w * h;
    let mut data = vec![0.0f32; 3 * n];
    for y in 0..h {
        let row = &buf[y * info.line_size..][..w * channels];
        for x in 0..w {
            let px = &row[x * channels..][..channels];
            for c in 0..3 {
                let v = if channels < 3 { px[0] } else { px[c] };
                data[c * n + y * w + x] = v as f32 / 255.0;
            }
        }
    }
    ImageRGB::new(h, w, data)
}

fn encode_png(img: &ImageRGB) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::Data(format!("PNG: {e}")))?;
        let n = img.height * img.width;
        let mut raw = Vec::with_capacity(3 * n);
        for i in 0..n {
            for c in 0..3 {
                raw.push(quantise(img.data[c * n + i]));
            }
        }
        writer.write_image_data(&raw).map_err(|e| Error::Data(format!("PNG: {e}")))?;
    }
    Ok(out)
}

fn is_png(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Loads a PPM or PNG image, chosen by content.
pub fn load_image(path: &Path) -> Result<ImageRGB> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes)
    } else {
        decode_ppm(&bytes)
    }
}

/// Saves as PNG when the extension is `.png`, otherwise as PPM.
pub fn save_image(img: &ImageRGB, path: &Path) -> Result<()> {
    let bytes = if is_png(path) { encode_png(img)? } else { encode_ppm(img) };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
