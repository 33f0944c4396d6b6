//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{Mask, ScalarField, VectorImage};

/// A decoded image: PGM gives one channel, PPM three.
#[derive(Debug, Clone, PartialEq)]
pub enum Image {
    Gray(ScalarField),
    Color(VectorImage),
}

impl Image {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Image::Gray(f) => f.dims(),
            Image::Color(v) => v.dims(),
        }
    }

    pub fn into_vector(self) -> VectorImage {
        match self {
            Image::Gray(f) => VectorImage::from(f),
            Image::Color(v) => v,
        }
    }
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(Error::CorruptHeader("file too short".into()));
    }
    let magic = [bytes[0], bytes[1]];
    match &magic {
        b"P5" | b"P6" => {}
        b"P1" | b"P2" | b"P3" | b"P4" | b"P7" => {
            return Err(Error::UnsupportedFormat(format!(
                "{} (only binary P5/P6 are read)",
                String::from_utf8_lossy(&magic)
            )))
        }
        _ => return Err(Error::UnsupportedFormat("not a netpbm file".into())),
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, slot) in fields.iter_mut().enumerate() {
        // Whitespace and comments before each field.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            let what = ["width", "height", "maxval"][i];
            return Err(Error::CorruptHeader(format!("missing {what}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *slot = text
            .parse()
            .map_err(|_| Error::CorruptHeader(format!("number `{text}` out of range")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::CorruptHeader("no whitespace after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::CorruptHeader("zero image dimension".into()));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!("maxval {maxval} (only 255 is supported)")));
    }
    Ok(Header {
        magic,
        width,
        height,
        offset: pos,
    })
}

/// Decode P5/P6 bytes.
pub fn decode(bytes: &[u8]) -> Result<Image> {
    let h = parse_header(bytes)?;
    let channels = if &h.magic == b"P5" { 1 } else { 3 };
    let expected = h
        .width
        .checked_mul(h.height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::CorruptHeader("dimensions overflow".into()))?;
    let body = &bytes[h.offset..];
    if body.len() < expected {
        return Err(Error::TruncatedData {
            expected,
            found: body.len(),
        });
    }
    let data: Vec<f64> = body[..expected].iter().map(|&b| b as f64).collect();
    Ok(if channels == 1 {
        Image::Gray(ScalarField::from_vec(h.width, h.height, data)?)
    } else {
        Image::Color(VectorImage::from_vec(h.width, h.height, 3, data)?)
    })
}

fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Encode a one- or three-channel image, rounding and clamping to 0..=255.
pub fn encode(image: &VectorImage) -> Result<Vec<u8>> {
    let magic = match image.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::UnsupportedFormat(format!("{c}-channel image"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|&v| to_byte(v)));
    Ok(out)
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(|e| io_err(path, e))?)
}

pub fn write_image(path: impl AsRef<Path>, image: &VectorImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(image)?).map_err(|e| io_err(path, e))
}

pub fn write_pgm(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    write_image(path, &VectorImage::from(field))
}

/// Foreground 255, background 0.
pub fn write_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    write_pgm(path, &mask.to_indicator().map(|v| 255.0 * v))
}

/// Nonzero pixels are foreground. Colour images use any nonzero channel.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let v = read_image(path)?.into_vector();
    let data = (0..v.pixel_count()).map(|i| v.pixel(i).iter().any(|&x| x != 0.0)).collect();
    Mask::from_vec(v.width(), v.height(), data)
}
