//! Binary Netpbm I/O: P5 (PGM) and P6 (PPM), 8-bit samples.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{to_grayscale, GrayImage, RgbImage};

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    data_offset: usize,
}

fn parse_header(data: &[u8]) -> Result<Header> {
    if data.len() < 2 {
        return Err(Error::Format("file too short for a Netpbm header".into()));
    }
    let magic = [data[0], data[1]];
    if &magic != b"P5" && &magic != b"P6" {
        return Err(Error::Format(format!(
            "unsupported magic {:?}, expected P5 or P6",
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match data.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while data.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::Format("truncated header".into())),
            }
        }
        let start = pos;
        while data.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("expected a decimal header field".into()));
        }
        *field = std::str::from_utf8(&data[start..pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::Format("header field out of range".into()))?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    match data.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Format("missing whitespace after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!("zero-sized image {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("maxval {maxval} unsupported, expected 1..=255")));
    }
    Ok(Header { magic, width: width as usize, height: height as usize, maxval, data_offset: pos })
}

fn scale_sample(v: u8, maxval: u32) -> u8 {
    if maxval == 255 {
        v
    } else {
        ((v.min(maxval as u8) as u32 * 255 + maxval / 2) / maxval) as u8
    }
}

/// Decodes a P5 or P6 image; colour input is converted to luminance.
pub fn decode_gray(data: &[u8]) -> Result<GrayImage> {
    let h = parse_header(data)?;
    let channels = if &h.magic == b"P6" { 3 } else { 1 };
    let need = h.width * h.height * channels;
    let raster = &data[h.data_offset..];
    if raster.len() < need {
        return Err(Error::Format(format!(
            "raster truncated: {} of {need} bytes",
            raster.len()
        )));
    }
    let raster = &raster[..need];
    if channels == 1 {
        let px = raster.iter().map(|&v| scale_sample(v, h.maxval)).collect();
        GrayImage::new(h.width, h.height, px)
    } else {
        let px = raster
            .chunks_exact(3)
            .map(|c| {
                [
                    scale_sample(c[0], h.maxval),
                    scale_sample(c[1], h.maxval),
                    scale_sample(c[2], h.maxval),
                ]
            })
            .collect();
        to_grayscale(&RgbImage::new(h.width, h.height, px)?)
    }
}

/// Decodes a P6 image without conversion.
pub fn decode_rgb(data: &[u8]) -> Result<RgbImage> {
    let h = parse_header(data)?;
    if &h.magic != b"P6" {
        return Err(Error::Format("expected P6".into()));
    }
    let need = h.width * h.height * 3;
    let raster = data
        .get(h.data_offset..h.data_offset + need)
        .ok_or_else(|| Error::Format("raster truncated".into()))?;
    let px = raster
        .chunks_exact(3)
        .map(|c| {
            [
                scale_sample(c[0], h.maxval),
                scale_sample(c[1], h.maxval),
                scale_sample(c[2], h.maxval),
            ]
        })
        .collect();
    RgbImage::new(h.width, h.height, px)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    for p in img.pixels() {
        out.extend_from_slice(p);
    }
    out
}

pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    decode_gray(&data)
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_pgm(img))?;
    Ok(())
}
