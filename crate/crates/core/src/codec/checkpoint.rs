use super::{CodecError, Result, FORMAT_VERSION, MAGIC};
use crate::nets::{SegNet, SegNetConfig};
use crate::tensor::Tensor;

/// Container tag reserved for segmenter checkpoints.
pub const SEGMENTER_TAG: u8 = 2;
const HEADER: usize = 4 + 1 + 1 + 1 + 2 + 4;

/// Full-precision segmenter checkpoint: magic, version, tag, levels u8,
/// base channels u16, weight count u32, then f32 little-endian weights.
pub fn write_segmenter(g: &SegNet) -> Result<Vec<u8>> {
    let cfg = g.config();
    let levels = u8::try_from(cfg.levels).map_err(|_| CodecError::HeaderRange {
        field: "levels",
        value: cfg.levels,
    })?;
    let base = u16::try_from(cfg.base_channels).map_err(|_| CodecError::HeaderRange {
        field: "base_channels",
        value: cfg.base_channels,
    })?;
    let count: usize = g.params().iter().map(Tensor::numel).sum();
    let mut out = Vec::with_capacity(HEADER + 4 * count);
    out.extend_from_slice(&MAGIC);
    out.push(FORMAT_VERSION);
    out.push(SEGMENTER_TAG);
    out.push(levels);
    out.extend_from_slice(&base.to_le_bytes());
    out.extend_from_slice(&(count as u32).to_le_bytes());
    for p in g.params() {
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Reads a checkpoint; the network comes back frozen.
pub fn read_segmenter(bytes: &[u8]) -> Result<SegNet> {
    if bytes.len() < 4 {
        return Err(CodecError::Truncated {
            expected: HEADER,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(CodecError::BadMagic(magic));
    }
    if bytes.len() < HEADER {
        return Err(CodecError::Truncated {
            expected: HEADER,
            found: bytes.len(),
        });
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(CodecError::UnsupportedVersion(bytes[4]));
    }
    if bytes[5] != SEGMENTER_TAG {
        return Err(CodecError::NotSegmenter(bytes[5]));
    }
    let cfg = SegNetConfig {
        levels: bytes[6] as usize,
        base_channels: u16::from_le_bytes([bytes[7], bytes[8]]) as usize,
    };
    let count = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let expected = HEADER + 4 * count;
    if bytes.len() < expected {
        return Err(CodecError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(CodecError::TrailingBytes(bytes.len() - expected));
    }
    let want = cfg.param_count();
    if want != count {
        return Err(CodecError::WeightCount {
            declared: count,
            expected: want,
        });
    }
    let mut values = bytes[HEADER..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()));
    let mut params = Vec::new();
    for shape in cfg.param_shapes() {
        let n = shape.iter().product();
        let data: Vec<f32> = values.by_ref().take(n).collect();
        params.push(Tensor::new(shape, data).map_err(crate::nets::NetError::from)?);
    }
    Ok(SegNet::from_params(cfg, params, true)?)
}
