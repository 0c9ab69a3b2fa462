//! Bit budgeting, model sizing, fp16 quantization and the `.sinco` container.

mod checkpoint;
mod container;
mod quant;

pub use checkpoint::{read_segmenter, write_segmenter, SEGMENTER_TAG};
pub use container::{decompress, CompressedContainer, FORMAT_VERSION, HEADER_LEN, MAGIC};
pub use quant::{dequantize_fp16, quantize_fp16, quantize_model, FP16_MAX};

use thiserror::Error;

use crate::imageio::ImageError;
use crate::nets::{CoordinateNet, InrConfig, NetError};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("header declares {declared} weights but the architecture has {expected}")]
    WeightCount { declared: usize, expected: usize },
    #[error("header field {field} = {value} does not fit its width")]
    HeaderRange { field: &'static str, value: usize },
    #[error("tag {0} is a segmenter checkpoint, not an image container")]
    SegmenterTag(u8),
    #[error("expected a segmenter checkpoint, found tag {0}")]
    NotSegmenter(u8),
    #[error("parameter {param} element {index}: {value} is not representable in fp16")]
    Quantization { param: usize, index: usize, value: f32 },
    #[error("invalid budget: {0}")]
    Budget(String),
    #[error("no network fits {max_params} parameters")]
    Infeasible { max_params: usize },
}

pub type Result<T, E = CodecError> = std::result::Result<T, E>;

/// Search bounds for [`size_model_for_budget`].
pub const DEPTH_RANGE: std::ops::RangeInclusive<usize> = 2..=6;
pub const WIDTH_RANGE: std::ops::RangeInclusive<usize> = 4..=512;

/// `bits_per_param · param_count / (H·W)`.
pub fn compute_bpp(param_count: usize, bits_per_param: u32, height: usize, width: usize) -> Result<f64> {
    let pixels = height * width;
    if pixels == 0 {
        return Err(CodecError::Budget("pixel count is zero".into()));
    }
    Ok(bits_per_param as f64 * param_count as f64 / pixels as f64)
}

/// Compressed size relative to an uncompressed image of `raw_bits_per_pixel`.
pub fn compression_ratio(param_count: usize, bits_per_param: u32, raw_bits_per_pixel: u32, pixels: usize) -> f64 {
    (bits_per_param as f64 * param_count as f64) / (raw_bits_per_pixel as f64 * pixels as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodecBudget {
    pub target_bpp: f64,
    pub bits_per_param: u32,
    pub pixel_count: usize,
}

impl CodecBudget {
    pub fn new(target_bpp: f64, bits_per_param: u32, height: usize, width: usize) -> Result<Self> {
        if !(target_bpp > 0.0 && target_bpp.is_finite()) {
            return Err(CodecError::Budget(format!("target bpp must be positive, got {target_bpp}")));
        }
        if bits_per_param == 0 {
            return Err(CodecError::Budget("bits per parameter must be positive".into()));
        }
        if height * width == 0 {
            return Err(CodecError::Budget("pixel count is zero".into()));
        }
        Ok(Self {
            target_bpp,
            bits_per_param,
            pixel_count: height * width,
        })
    }

    /// `floor(target_bpp · pixels / bits_per_param)`.
    pub fn max_params(&self) -> usize {
        // Exact products such as 1.2·57600/16 = 4320 can land just below the
        // integer in binary; the nudge keeps them from flooring one short.
        let exact = self.target_bpp * self.pixel_count as f64 / self.bits_per_param as f64;
        (exact * (1.0 + 4.0 * f64::EPSILON)).floor() as usize
    }
}

/// Largest network of `arch` within the budget.
pub fn size_model_for_budget(
    arch: &dyn CoordinateNet,
    frequencies: usize,
    omega0: f32,
    budget: &CodecBudget,
) -> Result<(InrConfig, usize)> {
    let max = budget.max_params();
    let mut best: Option<(InrConfig, usize)> = None;
    for depth in DEPTH_RANGE {
        // Counts grow with width, so the widest fitting net is this depth's best.
        let fit = WIDTH_RANGE.rev().find_map(|width| {
            let cfg = InrConfig {
                depth,
                width,
                frequencies,
                omega0,
            };
            let n = arch.param_count(&cfg);
            (n <= max).then_some((cfg, n))
        });
        if let Some((cfg, n)) = fit {
            arch.validate(&cfg)?;
            if best.map_or(true, |(_, b)| n > b) {
                best = Some((cfg, n));
            }
        }
    }
    best.ok_or(CodecError::Infeasible { max_params: max })
}
