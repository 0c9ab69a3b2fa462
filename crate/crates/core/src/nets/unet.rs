//! Small U-Net segmenter `g_φ`: `1×H×W` image to `1×H×W` soft mask.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_shapes, init::he_uniform, NetError, Result};
use crate::imageio::{ImagePlane, MaskPlane};
use crate::tensor::{Scalar, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegNetConfig {
    /// Number of encoder (and decoder) levels.
    pub levels: usize,
    /// Channels at level 0; level `l` uses `base_channels · 2^l`.
    pub base_channels: usize,
}

impl Default for SegNetConfig {
    fn default() -> Self {
        Self {
            levels: 2,
            base_channels: 16,
        }
    }
}

impl SegNetConfig {
    fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }

    /// Parameter shapes in canonical order.
    ///
    /// Encoder level `l`: two 3×3 convs then a stride-2 3×3 downsampling
    /// conv; bottleneck: two 3×3 convs; decoder level `l` (deepest first):
    /// two 3×3 convs over `[upsampled ‖ skip]`; head: 1×1 conv. Every conv
    /// is followed by its bias.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::new();
        let mut conv = |out: usize, inp: usize, k: usize| {
            shapes.push(vec![out, inp, k, k]);
            shapes.push(vec![out]);
        };
        let mut c_in = 1;
        for l in 0..self.levels {
            let c = self.channels(l);
            conv(c, c_in, 3);
            conv(c, c, 3);
            conv(c, c, 3);
            c_in = c;
        }
        let cb = self.channels(self.levels);
        conv(cb, c_in, 3);
        conv(cb, cb, 3);
        let mut below = cb;
        for l in (0..self.levels).rev() {
            let c = self.channels(l);
            conv(c, below + c, 3);
            conv(c, c, 3);
            below = c;
        }
        conv(1, below, 1);
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(|s| s.iter().product::<usize>()).sum()
    }

    pub fn multiple(&self) -> usize {
        1 << self.levels
    }
}

/// Segmentation network with parameters φ.
///
/// A frozen network binds φ as non-differentiable leaves, so gradients still
/// reach its input but never its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SegNet {
    config: SegNetConfig,
    params: Vec<Tensor<f32>>,
    frozen: bool,
}

impl SegNet {
    /// He-uniform weights, zero biases; deterministic in `seed`. Starts unfrozen.
    pub fn init(config: SegNetConfig, seed: u64) -> Result<Self> {
        validate(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = config
            .param_shapes()
            .into_iter()
            .map(|s| {
                if s.len() == 1 {
                    Tensor::zeros(&s)
                } else {
                    let fan_in = s[1] * s[2] * s[3];
                    he_uniform(&s, fan_in, &mut rng)
                }
            })
            .collect();
        Ok(Self {
            config,
            params,
            frozen: false,
        })
    }

    pub fn from_params(config: SegNetConfig, params: Vec<Tensor<f32>>, frozen: bool) -> Result<Self> {
        validate(&config)?;
        check_shapes(&config.param_shapes(), &params)?;
        Ok(Self { config, params, frozen })
    }

    pub fn config(&self) -> &SegNetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor<f32>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<f32>] {
        &mut self.params
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn unfreeze(mut self) -> Self {
        self.frozen = false;
        self
    }

    /// Binds φ on the tape; trainable only when not frozen.
    pub fn bind<T: Scalar>(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.cast(), !self.frozen)).collect()
    }

    /// Records the forward pass for `x: [1×H×W]` with already-bound parameters.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, params: &[Var], x: Var) -> Result<Var> {
        let s = tape.shape(x).to_vec();
        if s.len() != 3 || s[0] != 1 {
            return Err(NetError::Config(format!("segmenter input must be 1×H×W, got {s:?}")));
        }
        let m = self.config.multiple();
        if s[1] % m != 0 || s[2] % m != 0 {
            return Err(NetError::Divisibility {
                height: s[1],
                width: s[2],
                multiple: m,
            });
        }
        if params.len() != self.params.len() {
            return Err(NetError::ParamCount {
                expected: self.params.len(),
                found: params.len(),
            });
        }
        let mut p = params.chunks(2);
        let mut conv = |tape: &mut Tape<T>, h: Var, stride: usize, relu: bool| -> Result<Var> {
            let wb = p.next().expect("parameter list length checked");
            let k = tape.shape(wb[0])[2];
            let y = tape.conv2d(h, wb[0], stride, k / 2)?;
            let y = tape.add_channel_bias(y, wb[1])?;
            Ok(if relu { tape.relu(y) } else { y })
        };

        let mut h = x;
        let mut skips = Vec::with_capacity(self.config.levels);
        for _ in 0..self.config.levels {
            h = conv(tape, h, 1, true)?;
            h = conv(tape, h, 1, true)?;
            skips.push(h);
            h = conv(tape, h, 2, true)?;
        }
        h = conv(tape, h, 1, true)?;
        h = conv(tape, h, 1, true)?;
        for skip in skips.into_iter().rev() {
            let up = tape.upsample2x(h)?;
            let cat = tape.concat_channels(up, skip)?;
            h = conv(tape, cat, 1, true)?;
            h = conv(tape, h, 1, true)?;
        }
        let logits = conv(tape, h, 1, false)?;
        Ok(tape.sigmoid(logits))
    }

    /// Runs the network on a plain `H×W` plane without recording gradients.
    pub fn predict(&self, height: usize, width: usize, pixels: &[f32]) -> Result<Vec<f32>> {
        let mut tape = Tape::<f32>::new();
        let params: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.clone(), false)).collect();
        let x = tape.constant(Tensor::new(vec![1, height, width], pixels.to_vec())?);
        let y = self.forward(&mut tape, &params, x)?;
        Ok(tape.value(y).data().to_vec())
    }
}

fn validate(config: &SegNetConfig) -> Result<()> {
    if config.base_channels == 0 || config.levels > 6 {
        return Err(NetError::Config(format!(
            "segmenter needs base_channels >= 1 and at most 6 levels, got {config:?}"
        )));
    }
    Ok(())
}

/// Segments an image plane into a soft mask with values in `(0, 1)`.
pub fn unet_forward(g: &SegNet, x: &ImagePlane) -> Result<MaskPlane> {
    let values = g.predict(x.height(), x.width(), x.pixels())?;
    MaskPlane::soft(x.height(), x.width(), values)
        .map_err(|e| NetError::Config(format!("segmenter output invalid: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SegNetConfig {
        SegNetConfig {
            levels: 2,
            base_channels: 4,
        }
    }

    #[test]
    fn output_matches_input_shape() {
        let g = SegNet::init(
            SegNetConfig {
                levels: 2,
                base_channels: 16,
            },
            0,
        )
        .unwrap();
        let x = ImagePlane::filled(64, 64, 0.3).unwrap();
        let y = unet_forward(&g, &x).unwrap();
        assert_eq!((y.height(), y.width()), (64, 64));
        assert!(y.values().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn zero_head_outputs_half() {
        let mut g = SegNet::init(small(), 1).unwrap();
        let n = g.params().len();
        for p in &mut g.params_mut()[n - 2..] {
            p.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let x = ImagePlane::filled(16, 16, 0.7).unwrap();
        let y = unet_forward(&g, &x).unwrap();
        assert!(y.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn divisibility_is_enforced() {
        let g = SegNet::init(small(), 0).unwrap();
        let x = ImagePlane::filled(18, 16, 0.0).unwrap();
        assert!(matches!(
            unet_forward(&g, &x),
            Err(NetError::Divisibility { multiple: 4, .. })
        ));
    }

    #[test]
    fn frozen_net_passes_gradient_to_input_only() {
        let g = SegNet::init(small(), 5).unwrap().freeze();
        let mut tape = Tape::<f32>::new();
        let params = g.bind(&mut tape);
        let data: Vec<f32> = (0..256).map(|i| ((i * 37 % 101) as f32) / 101.0).collect();
        let x = tape.leaf(Tensor::new(vec![1, 16, 16], data).unwrap(), true);
        let y = g.forward(&mut tape, &params, x).unwrap();
        let yy = tape.square(y);
        let loss = tape.sum(yy);
        let grads = tape.backward(loss).unwrap();
        assert!(params.iter().all(|&p| grads.get(p).is_none()));
        let gx = grads.get(x).unwrap();
        assert!(gx.data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn init_is_deterministic() {
        assert_eq!(SegNet::init(small(), 9).unwrap(), SegNet::init(small(), 9).unwrap());
        assert_ne!(SegNet::init(small(), 9).unwrap(), SegNet::init(small(), 10).unwrap());
    }
}
