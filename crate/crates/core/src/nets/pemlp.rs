//! ReLU MLP over positionally encoded coordinates, with a learned projection
//! of the encoding added into every hidden layer.

use rand_chacha::ChaCha8Rng;

use super::{init::he_uniform, linear, CoordinateNet, InrConfig, InrModel, NetError, Result};
use crate::imageio::CoordinateGrid;
use crate::tensor::{Scalar, Tape, Tensor, Var};

/// Encodes `[N×2]` coordinates into `[N × 4·frequencies]` features.
///
/// Per row the layout is, for each frequency `2^j·π` (`j = 0..frequencies`),
/// for each coordinate component `u`: `sin(2^j·π·u), cos(2^j·π·u)`.
fn encode<T: Scalar>(coords: &Tensor<T>, frequencies: usize) -> Result<Tensor<T>> {
    if frequencies < 1 {
        return Err(NetError::Config("positional encoding needs at least one frequency".into()));
    }
    if coords.shape().len() != 2 || coords.shape()[1] != 2 {
        return Err(NetError::Config(format!(
            "coordinates must be N×2, got {:?}",
            coords.shape()
        )));
    }
    let rows = coords.shape()[0];
    let width = 4 * frequencies;
    let mut out = Vec::with_capacity(rows * width);
    for c in coords.data().chunks(2) {
        for j in 0..frequencies {
            let k = (2f64).powi(j as i32) * std::f64::consts::PI;
            for &u in c {
                let (s, co) = (k * u.as_f64()).sin_cos();
                out.push(T::of_f64(s));
                out.push(T::of_f64(co));
            }
        }
    }
    Ok(Tensor::new(vec![rows, width], out)?)
}

/// Positional encoding of the full grid, `[H·W × 4·frequencies]`.
pub fn positional_encode(grid: &CoordinateGrid, frequencies: usize) -> Result<Tensor<f32>> {
    encode(grid.coords(), frequencies)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PeMlp;

fn forward<T: Scalar>(tape: &mut Tape<T>, cfg: &InrConfig, params: &[Var], coords: &Tensor<T>) -> Result<Var> {
    let expected = 3 * cfg.depth + 2;
    if params.len() != expected {
        return Err(NetError::ParamCount {
            expected,
            found: params.len(),
        });
    }
    let enc = tape.constant(encode(coords, cfg.frequencies)?);
    let mut h = enc;
    for layer in params[..3 * cfg.depth].chunks(3) {
        let z = linear(tape, h, layer[0], layer[1])?;
        let skip = tape.matmul(enc, layer[2])?;
        let z = tape.add(z, skip)?;
        h = tape.relu(z);
    }
    let out = linear(tape, h, params[3 * cfg.depth], params[3 * cfg.depth + 1])?;
    Ok(tape.sigmoid(out))
}

impl CoordinateNet for PeMlp {
    fn name(&self) -> &'static str {
        "pemlp"
    }

    fn tag(&self) -> u8 {
        1
    }

    fn validate(&self, cfg: &InrConfig) -> Result<()> {
        if cfg.depth == 0 || cfg.width == 0 || cfg.frequencies == 0 {
            return Err(NetError::Config(format!(
                "pemlp needs depth, width and frequencies >= 1, got {}x{} with {} frequencies",
                cfg.depth, cfg.width, cfg.frequencies
            )));
        }
        Ok(())
    }

    /// Per hidden layer: `W_k`, `b_k`, then the encoding projection `P_k`.
    fn param_shapes(&self, cfg: &InrConfig) -> Vec<Vec<usize>> {
        let (w, e) = (cfg.width, 4 * cfg.frequencies);
        let mut shapes = Vec::with_capacity(3 * cfg.depth + 2);
        for k in 0..cfg.depth {
            shapes.push(vec![if k == 0 { e } else { w }, w]);
            shapes.push(vec![w]);
            shapes.push(vec![e, w]);
        }
        shapes.push(vec![w, 1]);
        shapes.push(vec![1]);
        shapes
    }

    fn param_count(&self, cfg: &InrConfig) -> usize {
        let (w, e, d) = (cfg.width, 4 * cfg.frequencies, cfg.depth);
        (e * w + w) + (d - 1) * (w * w + w) + d * e * w + (w + 1)
    }

    fn init(&self, cfg: &InrConfig, rng: &mut ChaCha8Rng) -> Vec<Tensor<f32>> {
        self.param_shapes(cfg)
            .into_iter()
            .map(|shape| {
                if shape.len() == 1 {
                    Tensor::zeros(&shape)
                } else {
                    he_uniform(&shape, shape[0], rng)
                }
            })
            .collect()
    }

    fn forward(&self, tape: &mut Tape<f32>, cfg: &InrConfig, params: &[Var], coords: &Tensor<f32>) -> Result<Var> {
        forward(tape, cfg, params, coords)
    }

    fn forward_f64(
        &self,
        tape: &mut Tape<f64>,
        cfg: &InrConfig,
        params: &[Var],
        coords: &Tensor<f64>,
    ) -> Result<Var> {
        forward(tape, cfg, params, coords)
    }
}

/// Evaluates a PE-MLP model on the full grid, `[H·W × 1]`.
pub fn pemlp_forward(m: &InrModel, grid: &CoordinateGrid) -> Result<Tensor<f32>> {
    if m.arch().name() != PeMlp.name() {
        return Err(NetError::ArchMismatch {
            expected: PeMlp.name(),
            found: m.arch().name(),
        });
    }
    let values = m.evaluate(grid.coords())?;
    Ok(Tensor::new(vec![grid.len(), 1], values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageio::make_coordinate_grid;
    use std::sync::Arc;

    #[test]
    fn origin_encodes_to_alternating_zero_one() {
        let grid = make_coordinate_grid(1, 1);
        let enc = positional_encode(&grid, 2).unwrap();
        assert_eq!(enc.shape(), &[1, 8]);
        assert_eq!(enc.data(), &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn unit_coordinate_lowest_frequency() {
        let c = Tensor::new(vec![1, 2], vec![1.0f64, 0.25]).unwrap();
        let enc = encode(&c, 3).unwrap();
        assert!(enc.data()[0].abs() < 1e-12);
        assert!((enc.data()[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_frequency_count_gives_width_48() {
        let enc = positional_encode(&make_coordinate_grid(3, 4), 12).unwrap();
        assert_eq!(enc.shape(), &[12, 48]);
        assert!(enc.data().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn zero_frequencies_rejected() {
        assert!(positional_encode(&make_coordinate_grid(2, 2), 0).is_err());
    }

    #[test]
    fn param_count_formula_and_projection_cost() {
        for depth in 1..6 {
            for width in [4, 9, 32] {
                for freqs in [1, 4, 12] {
                    let cfg = InrConfig::pemlp(depth, width, freqs);
                    let enumerated: usize = PeMlp.param_shapes(&cfg).iter().map(|s| s.iter().product::<usize>()).sum();
                    assert_eq!(PeMlp.param_count(&cfg), enumerated);
                    let plain = (4 * freqs * width + width) + (depth - 1) * (width * width + width) + width + 1;
                    assert_eq!(enumerated - plain, depth * 4 * freqs * width);
                }
            }
        }
    }

    #[test]
    fn zero_weights_give_half() {
        let cfg = InrConfig::pemlp(2, 6, 3);
        let params = PeMlp.param_shapes(&cfg).iter().map(|s| Tensor::zeros(s)).collect();
        let m = InrModel::from_params(Arc::new(PeMlp), cfg, params).unwrap();
        let out = pemlp_forward(&m, &make_coordinate_grid(3, 3)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.5));
    }
}
