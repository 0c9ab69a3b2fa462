//! Sine-activated coordinate MLP.

use rand_chacha::ChaCha8Rng;

use super::{init::uniform, linear, CoordinateNet, InrConfig, InrModel, NetError, Result};
use crate::imageio::CoordinateGrid;
use crate::tensor::{Scalar, Tape, Tensor, Var};

pub const DEFAULT_OMEGA0: f32 = 30.0;

/// `sigmoid(W_out · sin(ω0(W_{d−1} · … sin(ω0(W_0 c + b_0)) …)) + b_out)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Siren;

fn forward<T: Scalar>(tape: &mut Tape<T>, cfg: &InrConfig, params: &[Var], coords: &Tensor<T>) -> Result<Var> {
    let expected = 2 * (cfg.depth + 1);
    if params.len() != expected {
        return Err(NetError::ParamCount {
            expected,
            found: params.len(),
        });
    }
    let mut h = tape.constant(coords.clone());
    for layer in params[..2 * cfg.depth].chunks(2) {
        let z = linear(tape, h, layer[0], layer[1])?;
        let z = tape.scale(z, cfg.omega0 as f64);
        h = tape.sin(z);
    }
    let out = linear(tape, h, params[2 * cfg.depth], params[2 * cfg.depth + 1])?;
    Ok(tape.sigmoid(out))
}

impl CoordinateNet for Siren {
    fn name(&self) -> &'static str {
        "siren"
    }

    fn tag(&self) -> u8 {
        0
    }

    fn validate(&self, cfg: &InrConfig) -> Result<()> {
        if cfg.depth == 0 || cfg.width == 0 {
            return Err(NetError::Config(format!(
                "siren needs depth and width >= 1, got {}x{}",
                cfg.depth, cfg.width
            )));
        }
        if !(cfg.omega0.is_finite() && cfg.omega0 > 0.0) {
            return Err(NetError::Config(format!("omega0 must be positive, got {}", cfg.omega0)));
        }
        Ok(())
    }

    fn param_shapes(&self, cfg: &InrConfig) -> Vec<Vec<usize>> {
        let w = cfg.width;
        let mut shapes = vec![vec![2, w], vec![w]];
        for _ in 1..cfg.depth {
            shapes.push(vec![w, w]);
            shapes.push(vec![w]);
        }
        shapes.push(vec![w, 1]);
        shapes.push(vec![1]);
        shapes
    }

    fn param_count(&self, cfg: &InrConfig) -> usize {
        let w = cfg.width;
        (2 * w + w) + (cfg.depth - 1) * (w * w + w) + (w + 1)
    }

    /// First layer `U(±1/fan_in)`, later layers `U(±√(6/fan_in)/ω0)`, zero biases.
    fn init(&self, cfg: &InrConfig, rng: &mut ChaCha8Rng) -> Vec<Tensor<f32>> {
        self.param_shapes(cfg)
            .into_iter()
            .enumerate()
            .map(|(i, shape)| {
                if shape.len() == 1 {
                    return Tensor::zeros(&shape);
                }
                let fan_in = shape[0] as f64;
                let bound = if i == 0 {
                    1.0 / fan_in
                } else {
                    (6.0 / fan_in).sqrt() / cfg.omega0 as f64
                };
                uniform(&shape, bound, rng)
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

/// Evaluates a SIREN model on the full grid, `[H·W × 1]`.
pub fn siren_forward(m: &InrModel, grid: &CoordinateGrid) -> Result<Tensor<f32>> {
    if m.arch().name() != Siren.name() {
        return Err(NetError::ArchMismatch {
            expected: Siren.name(),
            found: m.arch().name(),
        });
    }
    let values = m.evaluate(grid.coords())?;
    Ok(Tensor::new(vec![grid.len(), 1], values)?)
}
