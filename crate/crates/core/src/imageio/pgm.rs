//! Binary PGM (P5) with 8- or 16-bit samples; 16-bit samples are big-endian.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use super::{ImageError, ImagePlane, MaskPlane};

const MAX_PIXELS: u64 = 1 << 30;

/// Raw decoded PGM raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::Header(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::Header(format!("{what} out of range")))
    }
}

/// Decodes a P5 byte stream.
pub fn read_pgm(bytes: &[u8]) -> Result<Pgm, ImageError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let shown = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(ImageError::BadMagic(shown));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::Header(format!("zero extent {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(ImageError::Header(format!("maxval {maxval} outside 1..=65535")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(ImageError::Header("missing raster separator".into())),
    }
    let pixels = width
        .checked_mul(height)
        .filter(|&p| p <= MAX_PIXELS)
        .ok_or(ImageError::DimensionOverflow { width, height })?;
    let sample_bytes = if maxval > 255 { 2 } else { 1 };
    let expected = pixels as usize * sample_bytes;
    let raster = &bytes[cur.pos..];
    if raster.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            found: raster.len(),
        });
    }
    let samples = if sample_bytes == 1 {
        raster[..expected].iter().map(|&b| b as u16).collect()
    } else {
        raster[..expected]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok(Pgm {
        width: width as usize,
        height: height as usize,
        maxval: maxval as u16,
        samples,
    })
}

/// Encodes a P5 byte stream.
pub fn write_pgm(pgm: &Pgm) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", pgm.width, pgm.height, pgm.maxval).into_bytes();
    if pgm.maxval > 255 {
        for s in &pgm.samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    } else {
        out.extend(pgm.samples.iter().map(|&s| s as u8));
    }
    out
}

/// Loads a grayscale image normalized by the file's maxval.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImagePlane, ImageError> {
    let pgm = read_pgm(&std::fs::read(path)?)?;
    let max = pgm.maxval as f32;
    let pixels = pgm.samples.iter().map(|&s| (s as f32 / max).min(1.0)).collect();
    ImagePlane::new(pgm.height, pgm.width, pixels)
}

/// Loads a mask; any nonzero sample becomes 1.
pub fn load_mask(path: impl AsRef<Path>) -> Result<MaskPlane, ImageError> {
    let pgm = read_pgm(&std::fs::read(path)?)?;
    let values = pgm.samples.iter().map(|&s| if s != 0 { 1.0 } else { 0.0 }).collect();
    MaskPlane::binary(pgm.height, pgm.width, values)
}

fn quantize(plane: &[f32], maxval: u16) -> Vec<u16> {
    plane
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * maxval as f32).round() as u16)
        .collect()
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = path.with_file_name(format!(".{name}.{}.{n}.tmp", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Saves as 8-bit PGM, rounding to the nearest level.
pub fn save_image(plane: &ImagePlane, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let pgm = Pgm {
        width: plane.width(),
        height: plane.height(),
        maxval: 255,
        samples: quantize(plane.pixels(), 255),
    };
    Ok(write_atomic(path.as_ref(), &write_pgm(&pgm))?)
}

/// Saves as 16-bit PGM.
pub fn save_image_16(plane: &ImagePlane, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let pgm = Pgm {
        width: plane.width(),
        height: plane.height(),
        maxval: 65535,
        samples: quantize(plane.pixels(), 65535),
    };
    Ok(write_atomic(path.as_ref(), &write_pgm(&pgm))?)
}
