use half::f16;

use super::{CodecError, Result};
use crate::nets::InrModel;
use crate::tensor::Tensor;

/// Largest finite binary16 magnitude.
pub const FP16_MAX: f32 = 65504.0;

/// Round-to-nearest-even fp16 bit patterns in canonical parameter order.
pub fn quantize_fp16(params: &[Tensor<f32>]) -> Result<Vec<u16>> {
    let mut out = Vec::with_capacity(params.iter().map(Tensor::numel).sum());
    for (param, t) in params.iter().enumerate() {
        for (index, &value) in t.data().iter().enumerate() {
            if !value.is_finite() || value.abs() > FP16_MAX {
                return Err(CodecError::Quantization { param, index, value });
            }
            out.push(f16::from_f32(value).to_bits());
        }
    }
    Ok(out)
}

/// Splits `bits` back into tensors of the given shapes.
pub fn dequantize_fp16(bits: &[u16], shapes: &[Vec<usize>]) -> Result<Vec<Tensor<f32>>> {
    let expected: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    if expected != bits.len() {
        return Err(CodecError::WeightCount {
            declared: bits.len(),
            expected,
        });
    }
    let mut rest = bits;
    let mut out = Vec::with_capacity(shapes.len());
    for shape in shapes {
        let (head, tail) = rest.split_at(shape.iter().product());
        rest = tail;
        let data = head.iter().map(|&b| f16::from_bits(b).to_f32()).collect();
        out.push(Tensor::new(shape.clone(), data).map_err(crate::nets::NetError::from)?);
    }
    Ok(out)
}

/// The model with every weight rounded through fp16.
pub fn quantize_model(m: &InrModel) -> Result<InrModel> {
    let bits = quantize_fp16(m.params())?;
    let shapes: Vec<Vec<usize>> = m.params().iter().map(|p| p.shape().to_vec()).collect();
    let params = dequantize_fp16(&bits, &shapes)?;
    Ok(InrModel::from_params(m.arch().clone(), *m.config(), params)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f32) -> u16 {
        quantize_fp16(&[Tensor::new(vec![1], vec![v]).unwrap()]).unwrap()[0]
    }

    #[test]
    fn constants() {
        assert_eq!(q(0.0), 0x0000);
        assert_eq!(q(1.0), 0x3C00);
        assert_eq!(q(-2.0), 0xC000);
        assert_eq!(q(65504.0), 0x7BFF);
        // 1 + 2^-11 is exactly halfway between 1 and the next fp16; ties go to even.
        assert_eq!(q(1.0 + 2f32.powi(-11)), 0x3C00);
        assert_eq!(q(1.0 + 3.0 * 2f32.powi(-11)), 0x3C02);
    }

    #[test]
    fn rejects_unrepresentable_values() {
        let params = vec![
            Tensor::new(vec![2], vec![0.0, 1.0]).unwrap(),
            Tensor::new(vec![3], vec![0.0, 7e4, 0.0]).unwrap(),
        ];
        match quantize_fp16(&params) {
            Err(CodecError::Quantization { param: 1, index: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(quantize_fp16(&[Tensor::new(vec![1], vec![f32::NAN]).unwrap()]).is_err());
        assert!(quantize_fp16(&[Tensor::new(vec![1], vec![f32::INFINITY]).unwrap()]).is_err());
    }

    #[test]
    fn dequantize_checks_length() {
        assert!(dequantize_fp16(&[0, 0], &[vec![3]]).is_err());
        let t = dequantize_fp16(&[0x3C00, 0xC000, 0], &[vec![1, 2], vec![1]]).unwrap();
        assert_eq!(t[0].data(), &[1.0, -2.0]);
        assert_eq!(t[1].data(), &[0.0]);
    }
}
