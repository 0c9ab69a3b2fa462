//! Grayscale planes, PGM I/O, coordinate grids and synthetic phantoms.

mod grid;
mod phantom;
mod pgm;

pub use grid::{make_coordinate_grid, CoordinateGrid};
pub use phantom::synth_phantom;
pub use pgm::{load_image, load_mask, read_pgm, save_image, save_image_16, write_atomic, write_pgm, Pgm};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a binary PGM (expected magic P5, found {0:?})")]
    BadMagic(String),
    #[error("malformed PGM header: {0}")]
    Header(String),
    #[error("image dimensions {width}x{height} overflow")]
    DimensionOverflow { width: u64, height: u64 },
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("pixel {index} has value {value}, outside [0, 1]")]
    OutOfRange { index: usize, value: f32 },
    #[error("mask value {value} at {index} is not binary")]
    NotBinary { index: usize, value: f32 },
    #[error("expected {expected} pixels for {width}x{height}, got {found}")]
    Size {
        width: usize,
        height: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid extent: {0}")]
    Extent(String),
}

fn check_len(height: usize, width: usize, found: usize) -> Result<(), ImageError> {
    if height == 0 || width == 0 {
        return Err(ImageError::Extent(format!("{width}x{height}")));
    }
    let expected = height * width;
    if expected != found {
        return Err(ImageError::Size {
            width,
            height,
            expected,
            found,
        });
    }
    Ok(())
}

/// Normalized `H×W` grayscale image, row-major, every pixel in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePlane {
    height: usize,
    width: usize,
    pixels: Vec<f32>,
}

impl ImagePlane {
    pub fn new(height: usize, width: usize, pixels: Vec<f32>) -> Result<Self, ImageError> {
        check_len(height, width, pixels.len())?;
        if let Some((index, &value)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    /// Builds a plane after clamping every value into `[0, 1]`.
    pub fn from_clamped(height: usize, width: usize, pixels: Vec<f32>) -> Result<Self, ImageError> {
        let pixels = pixels
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Self::new(height, width, pixels)
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Result<Self, ImageError> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }
}

/// Segmentation mask: binary `{0, 1}` for groundtruth, soft `[0, 1]` for predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskPlane {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl MaskPlane {
    /// Soft mask; values must lie in `[0, 1]`.
    pub fn soft(height: usize, width: usize, values: Vec<f32>) -> Result<Self, ImageError> {
        let plane = ImagePlane::new(height, width, values)?;
        Ok(Self {
            height,
            width,
            values: plane.pixels,
        })
    }

    /// Groundtruth mask; values must be exactly 0 or 1.
    pub fn binary(height: usize, width: usize, values: Vec<f32>) -> Result<Self, ImageError> {
        check_len(height, width, values.len())?;
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
            return Err(ImageError::NotBinary { index, value });
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Number of pixels at or above `threshold`.
    pub fn area(&self, threshold: f32) -> usize {
        self.values.iter().filter(|&&v| v >= threshold).count()
    }
}
