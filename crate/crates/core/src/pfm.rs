//! Portable FloatMap (PFM) reading and writing.
//!
//! `PF` = 3-channel color, `Pf` = single-channel grayscale. Header is three
//! whitespace-terminated tokens (magic, `width height`, scale), followed by
//! raw little- or big-endian `f32` scanlines stored bottom-to-top. Written
//! files use little-endian (negative scale). Parse failures report the byte
//! offset of the offending token.

use crate::{Error, Result};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Floating-point image; `channels` is 1 or 3, data row-major top-to-bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl PfmImage {
    pub fn new_gray(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            channels: 1,
            data: vec![0.0; width * height],
        }
    }

    pub fn new_color(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            channels: 3,
            data: vec![0.0; width * height * 3],
        }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }
}

fn parse_err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        what: "pfm".into(),
        offset,
        msg: msg.into(),
    }
}

/// Read one header token starting at `*pos`, skipping leading whitespace.
fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(parse_err(start, "unexpected end of header"));
    }
    Ok(&bytes[start..*pos])
}

pub fn read(path: &Path) -> Result<PfmImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn decode(bytes: &[u8]) -> Result<PfmImage> {
    let mut pos = 0usize;
    let magic = token(bytes, &mut pos)?;
    let channels = match magic {
        b"PF" => 3,
        b"Pf" => 1,
        _ => return Err(parse_err(0, "bad magic, expected PF or Pf")),
    };
    let tok_at = pos;
    let width: usize = std::str::from_utf8(token(bytes, &mut pos)?)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(tok_at, "bad width"))?;
    let tok_at = pos;
    let height: usize = std::str::from_utf8(token(bytes, &mut pos)?)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(tok_at, "bad height"))?;
    let tok_at = pos;
    let scale: f32 = std::str::from_utf8(token(bytes, &mut pos)?)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(tok_at, "bad scale"))?;
    if width == 0 || height == 0 {
        return Err(parse_err(tok_at, "zero dimension"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() {
        return Err(parse_err(pos, "missing raster"));
    }
    pos += 1;

    let count = width * height * channels;
    let need = count * 4;
    if bytes.len() < pos + need {
        return Err(parse_err(
            bytes.len(),
            format!("raster truncated: need {} bytes, have {}", need, bytes.len() - pos),
        ));
    }
    let little_endian = scale < 0.0;
    let mut data = vec![0.0f32; count];
    // Scanlines are stored bottom-to-top; flip to top-to-bottom rows.
    let row_floats = width * channels;
    for file_row in 0..height {
        let out_row = height - 1 - file_row;
        for i in 0..row_floats {
            let o = pos + (file_row * row_floats + i) * 4;
            let raw = [bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]];
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            data[out_row * row_floats + i] = v;
        }
    }
    Ok(PfmImage {
        width,
        height,
        channels,
        data,
    })
}

pub fn write(path: &Path, img: &PfmImage) -> Result<()> {
    let bytes = encode(img)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn encode(img: &PfmImage) -> Result<Vec<u8>> {
    let magic = match img.channels {
        1 => "Pf",
        3 => "PF",
        c => return Err(Error::InvalidParam(format!("pfm channels must be 1 or 3, got {c}"))),
    };
    let mut out = Vec::with_capacity(img.data.len() * 4 + 32);
    out.extend_from_slice(format!("{}\n{} {}\n-1.0\n", magic, img.width, img.height).as_bytes());
    let row_floats = img.width * img.channels;
    for file_row in 0..img.height {
        let src_row = img.height - 1 - file_row;
        for i in 0..row_floats {
            out.extend_from_slice(&img.data[src_row * row_floats + i].to_le_bytes());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_color() {
        let mut img = PfmImage::new_color(3, 2);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = i as f32 * 0.25 - 1.0;
        }
        let back = decode(&encode(&img).unwrap()).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn roundtrip_gray() {
        let mut img = PfmImage::new_gray(2, 3);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = (i as f32).sin();
        }
        let back = decode(&encode(&img).unwrap()).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn truncated_raster_reports_offset() {
        let img = PfmImage::new_gray(4, 4);
        let mut bytes = encode(&img).unwrap();
        bytes.truncate(bytes.len() - 8);
        match decode(&bytes) {
            Err(Error::Parse { offset, .. }) => assert!(offset > 0),
            other => panic!("expected parse error, got {:?}", other),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(decode(b"P6\n2 2\n-1.0\n").is_err());
    }
}
