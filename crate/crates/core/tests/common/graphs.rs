// Loss graphs checked against 64-bit central differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sinco::imageio::{make_coordinate_grid, synth_phantom, MaskPlane};
use sinco::nets::{registry, InrConfig, InrModel, SegNet, SegNetConfig};
use sinco::tensor::{finite_difference_check, GradCheck, LossGraph, Scalar, Tape, Tensor, TensorError, Var};
use sinco::training::{bce_loss, compress_loss, sinco_loss, soft_dice_loss, StructuralPrior};

// Balances round-off (ε·|f|/h) against truncation and ReLU kink crossings.
pub const FD_STEP: f64 = 1e-5;

fn lift<E: std::fmt::Display>(e: E) -> TensorError {
    TensorError::InvalidShape {
        op: "graph",
        reason: e.to_string(),
    }
}

pub fn random_tensor(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn f64_params(ts: &[Tensor<f32>]) -> Vec<Tensor<f64>> {
    ts.iter().map(|t| t.cast()).collect()
}

/// MSE between a coordinate network's output and a random target.
pub struct InrGraph {
    pub model: InrModel,
    pub coords: Tensor<f64>,
    pub target: Tensor<f64>,
}

impl LossGraph for InrGraph {
    fn build<T: Scalar>(&self, tape: &mut Tape<T>, params: &[Var]) -> Result<Var, TensorError> {
        let xhat = self.model.forward_on(tape, params, &self.coords.cast()).map_err(lift)?;
        let target = tape.constant(self.target.cast());
        compress_loss(tape, xhat, target).map_err(lift)
    }
}

impl InrGraph {
    pub fn new(arch: &str, cfg: InrConfig, side: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = InrModel::init(registry().get(arch).unwrap(), cfg, seed).unwrap();
        let grid = make_coordinate_grid(side, side);
        Self {
            model,
            coords: grid.coords().cast(),
            target: random_tensor(&[side * side, 1], 0.0, 1.0, &mut rng),
        }
    }

    pub fn check(&self) -> GradCheck {
        finite_difference_check(self, &f64_params(self.model.params()), FD_STEP).unwrap()
    }
}

/// BCE plus soft Dice of the segmenter's prediction, differentiated in its weights.
pub struct SegGraph {
    pub net: SegNet,
    pub image: Tensor<f64>,
    pub mask: Tensor<f64>,
}

impl LossGraph for SegGraph {
    fn build<T: Scalar>(&self, tape: &mut Tape<T>, params: &[Var]) -> Result<Var, TensorError> {
        let x = tape.constant(self.image.cast());
        let s = tape.constant(self.mask.cast());
        let p = self.net.forward(tape, params, x).map_err(lift)?;
        let a = bce_loss(tape, p, s).map_err(lift)?;
        let b = soft_dice_loss(tape, p, s).map_err(lift)?;
        tape.add(a, b)
    }
}

impl SegGraph {
    pub fn new(cfg: SegNetConfig, side: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask: Vec<f64> = (0..side * side).map(|i| ((i / side + i % side) % 3 == 0) as u8 as f64).collect();
        Self {
            net: SegNet::init(cfg, seed).unwrap(),
            image: random_tensor(&[1, side, side], 0.0, 1.0, &mut rng),
            mask: Tensor::new(vec![1, side, side], mask).unwrap(),
        }
    }

    pub fn check(&self) -> GradCheck {
        finite_difference_check(self, &f64_params(self.net.params()), FD_STEP).unwrap()
    }
}

/// The full objective, differentiated in θ through a frozen segmenter.
pub struct SincoGraph {
    pub inr: InrGraph,
    pub segmenter: SegNet,
    pub mask: MaskPlane,
    pub lambda: f64,
}

impl LossGraph for SincoGraph {
    fn build<T: Scalar>(&self, tape: &mut Tape<T>, params: &[Var]) -> Result<Var, TensorError> {
        let xhat = self.inr.model.forward_on(tape, params, &self.inr.coords.cast()).map_err(lift)?;
        let x = tape.constant(self.inr.target.cast());
        let prior = StructuralPrior {
            segmenter: &self.segmenter,
            mask: &self.mask,
        };
        let terms = sinco_loss(tape, xhat, x, Some(&prior), self.lambda).map_err(lift)?;
        Ok(terms.total)
    }
}

impl SincoGraph {
    /// SIREN(2, 8) on a 16×16 phantom with a frozen SegNet(2, 4).
    pub fn new(seed: u64) -> Self {
        let (image, mask) = synth_phantom(seed, 32, 32).unwrap();
        // Downsample to 16×16 so the check stays fast.
        let side = 16;
        let pick = |v: &[f32], r: usize, c: usize| v[(2 * r) * 32 + 2 * c];
        let target: Vec<f64> = (0..side * side)
            .map(|i| pick(image.pixels(), i / side, i % side) as f64)
            .collect();
        let mask_vals: Vec<f32> = (0..side * side).map(|i| pick(mask.values(), i / side, i % side)).collect();
        let mut inr = InrGraph::new("siren", InrConfig::siren(2, 8), side, seed);
        inr.target = Tensor::new(vec![side * side, 1], target).unwrap();
        let segmenter = SegNet::init(
            SegNetConfig {
                levels: 2,
                base_channels: 4,
            },
            seed + 1,
        )
        .unwrap()
        .freeze();
        Self {
            inr,
            segmenter,
            mask: MaskPlane::binary(side, side, mask_vals).unwrap(),
            lambda: 1.0,
        }
    }

    pub fn check(&self) -> GradCheck {
        finite_difference_check(self, &f64_params(self.inr.model.params()), FD_STEP).unwrap()
    }
}

/// The named gradient suite: SIREN, PE-MLP, SegNet and the full objective.
pub fn gradient_suite() -> Vec<(&'static str, GradCheck)> {
    vec![
        ("siren d2 w8", InrGraph::new("siren", InrConfig::siren(2, 8), 6, 11).check()),
        ("pemlp L4 d2 w8", InrGraph::new("pemlp", InrConfig::pemlp(2, 8, 4), 6, 12).check()),
        (
            "segnet l2 b4",
            SegGraph::new(
                SegNetConfig {
                    levels: 2,
                    base_channels: 4,
                },
                8,
                13,
            )
            .check(),
        ),
        ("sinco_loss", SincoGraph::new(14).check()),
    ]
}
