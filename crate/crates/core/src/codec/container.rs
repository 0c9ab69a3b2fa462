use super::{compute_bpp, dequantize_fp16, quantize_fp16, CodecError, Result, SEGMENTER_TAG};
use crate::imageio::{make_coordinate_grid, ImagePlane};
use crate::nets::{registry, InrConfig, InrModel};

pub const MAGIC: [u8; 4] = *b"SNCO";
pub const FORMAT_VERSION: u8 = 1;
/// magic 4, version 1, tag 1, depth 1, width 2, L_f 1, ω0 4, H 2, W 2, count 4.
pub const HEADER_LEN: usize = 22;

/// A quantized coordinate network plus the image extent it encodes.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedContainer {
    pub arch_tag: u8,
    pub depth: u8,
    pub width: u16,
    pub frequencies: u8,
    pub omega0: f32,
    pub height: u16,
    pub image_width: u16,
    /// fp16 bit patterns in canonical parameter order.
    pub payload: Vec<u16>,
}

fn narrow<T: TryFrom<usize>>(field: &'static str, value: usize) -> Result<T> {
    T::try_from(value).map_err(|_| CodecError::HeaderRange { field, value })
}

impl CompressedContainer {
    /// Quantizes `m` for an `height × width` image.
    pub fn from_model(m: &InrModel, height: usize, width: usize) -> Result<Self> {
        let cfg = m.config();
        let payload = quantize_fp16(m.params())?;
        narrow::<u32>("weight_count", payload.len())?;
        if height == 0 || width == 0 {
            return Err(CodecError::HeaderRange {
                field: "height/width",
                value: 0,
            });
        }
        Ok(Self {
            arch_tag: m.arch().tag(),
            depth: narrow("depth", cfg.depth)?,
            width: narrow("width", cfg.width)?,
            frequencies: narrow("frequencies", cfg.frequencies)?,
            omega0: cfg.omega0,
            height: narrow("height", height)?,
            image_width: narrow("width", width)?,
            payload,
        })
    }

    pub fn config(&self) -> InrConfig {
        InrConfig {
            depth: self.depth as usize,
            width: self.width as usize,
            frequencies: self.frequencies as usize,
            omega0: self.omega0,
        }
    }

    pub fn weight_count(&self) -> usize {
        self.payload.len()
    }

    /// Payload bits per pixel; the header is not counted.
    pub fn bpp(&self) -> Result<f64> {
        compute_bpp(self.weight_count(), 16, self.height as usize, self.image_width as usize)
    }

    pub fn byte_len(&self) -> usize {
        HEADER_LEN + 2 * self.payload.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.byte_len());
        out.extend_from_slice(&MAGIC);
        out.push(FORMAT_VERSION);
        out.push(self.arch_tag);
        out.push(self.depth);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.push(self.frequencies);
        out.extend_from_slice(&self.omega0.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.image_width.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        for w in &self.payload {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    /// Parses and validates a container against the architecture registry.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(CodecError::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(CodecError::BadMagic(magic));
        }
        if bytes.len() < HEADER_LEN {
            return Err(CodecError::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(CodecError::UnsupportedVersion(bytes[4]));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let arch_tag = bytes[5];
        if arch_tag == SEGMENTER_TAG {
            return Err(CodecError::SegmenterTag(arch_tag));
        }
        let c = Self {
            arch_tag,
            depth: bytes[6],
            width: u16_at(7),
            frequencies: bytes[9],
            omega0: f32::from_le_bytes(bytes[10..14].try_into().unwrap()),
            height: u16_at(14),
            image_width: u16_at(16),
            payload: Vec::new(),
        };
        let count = u32::from_le_bytes(bytes[18..22].try_into().unwrap()) as usize;
        let expected = HEADER_LEN + 2 * count;
        if bytes.len() < expected {
            return Err(CodecError::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(CodecError::TrailingBytes(bytes.len() - expected));
        }
        if c.height == 0 || c.image_width == 0 {
            return Err(CodecError::HeaderRange {
                field: "height/width",
                value: 0,
            });
        }
        let arch = registry().by_tag(arch_tag)?;
        let cfg = c.config();
        arch.validate(&cfg)?;
        let want = arch.param_count(&cfg);
        if want != count {
            return Err(CodecError::WeightCount {
                declared: count,
                expected: want,
            });
        }
        let payload = bytes[HEADER_LEN..]
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .collect();
        Ok(Self { payload, ..c })
    }

    /// Rebuilds the network with dequantized weights.
    pub fn model(&self) -> Result<InrModel> {
        let arch = registry().by_tag(self.arch_tag)?;
        let cfg = self.config();
        let params = dequantize_fp16(&self.payload, &arch.param_shapes(&cfg))?;
        Ok(InrModel::from_params(arch, cfg, params)?)
    }
}

/// Evaluates the stored network on the canonical grid of the stored extent.
pub fn decompress(c: &CompressedContainer) -> Result<ImagePlane> {
    let model = c.model()?;
    let grid = make_coordinate_grid(c.height as usize, c.image_width as usize);
    Ok(model.render(&grid)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::registry;

    fn model(arch: &str, cfg: InrConfig, seed: u64) -> InrModel {
        InrModel::init(registry().get(arch).unwrap(), cfg, seed).unwrap()
    }

    #[test]
    fn header_layout_is_fixed() {
        let m = model("siren", InrConfig::siren(2, 4), 0);
        let c = CompressedContainer::from_model(&m, 16, 20).unwrap();
        let b = c.to_bytes();
        assert_eq!(b.len(), HEADER_LEN + 2 * m.param_count());
        assert_eq!(&b[..6], b"SNCO\x01\x00");
        assert_eq!(b[6], 2);
        assert_eq!(&b[7..10], &[4, 0, 0]);
        assert_eq!(&b[10..14], &30f32.to_le_bytes());
        assert_eq!(&b[14..18], &[16, 0, 20, 0]);
        assert_eq!(&b[18..22], &(m.param_count() as u32).to_le_bytes());
    }

    #[test]
    fn round_trip_is_identity_on_bytes() {
        let m = model("pemlp", InrConfig::pemlp(3, 7, 5), 9);
        let c = CompressedContainer::from_model(&m, 32, 32).unwrap();
        let bytes = c.to_bytes();
        let back = CompressedContainer::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn distinct_errors() {
        let m = model("siren", InrConfig::siren(2, 4), 0);
        let bytes = CompressedContainer::from_model(&m, 8, 8).unwrap().to_bytes();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(CompressedContainer::from_bytes(&bad), Err(CodecError::BadMagic(_))));

        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            CompressedContainer::from_bytes(&bad),
            Err(CodecError::UnsupportedVersion(2))
        ));

        assert!(matches!(
            CompressedContainer::from_bytes(&bytes[..bytes.len() - 1]),
            Err(CodecError::Truncated { .. })
        ));
        assert!(matches!(
            CompressedContainer::from_bytes(&bytes[..10]),
            Err(CodecError::Truncated { .. })
        ));

        let mut bad = bytes.clone();
        bad[5] = 9;
        assert!(CompressedContainer::from_bytes(&bad).is_err());

        let mut bad = bytes;
        bad.push(0);
        assert!(matches!(CompressedContainer::from_bytes(&bad), Err(CodecError::TrailingBytes(1))));
    }

    #[test]
    fn zero_weights_decompress_to_half() {
        let m = model("siren", InrConfig::siren(2, 4), 0);
        let mut c = CompressedContainer::from_model(&m, 5, 3).unwrap();
        c.payload.iter_mut().for_each(|w| *w = 0);
        let img = decompress(&c).unwrap();
        assert_eq!((img.height(), img.width()), (5, 3));
        assert!(img.pixels().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn decompress_matches_quantized_forward() {
        let m = model("siren", InrConfig::siren(2, 8), 3);
        let c = CompressedContainer::from_model(&m, 6, 7).unwrap();
        let q = super::super::quantize_model(&m).unwrap();
        let direct = q.render(&make_coordinate_grid(6, 7)).unwrap();
        assert_eq!(decompress(&c).unwrap(), direct);
    }
}
