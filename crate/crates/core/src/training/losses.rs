//! Pixel-consistency, soft-Dice, BCE and the combined structural objective.

use super::{Result, TrainError};
use crate::imageio::MaskPlane;
use crate::nets::{NetError, SegNet};
use crate::tensor::{Scalar, Tape, Tensor, TensorError, Var};

/// Smoothing added to both sides of the soft-Dice ratio.
pub const DICE_EPS: f64 = 1e-6;
/// Probabilities are clamped into `[BCE_CLAMP, 1 − BCE_CLAMP]` before the log.
pub const BCE_CLAMP: f64 = 1e-7;

fn same_shape<T: Scalar>(tape: &Tape<T>, op: &'static str, a: Var, b: Var) -> Result<()> {
    if tape.shape(a) != tape.shape(b) {
        return Err(TensorError::ShapeMismatch {
            op,
            left: tape.shape(a).to_vec(),
            right: tape.shape(b).to_vec(),
        }
        .into());
    }
    Ok(())
}

/// Mean squared error over all pixels.
pub fn compress_loss<T: Scalar>(tape: &mut Tape<T>, xhat: Var, x: Var) -> Result<Var> {
    same_shape(tape, "compress_loss", xhat, x)?;
    let diff = tape.sub(xhat, x)?;
    let sq = tape.square(diff);
    Ok(tape.mean(sq))
}

/// `1 − (2·Σŝs + ε) / (Σŝ + Σs + ε)`.
pub fn soft_dice_loss<T: Scalar>(tape: &mut Tape<T>, shat: Var, s: Var) -> Result<Var> {
    same_shape(tape, "soft_dice_loss", shat, s)?;
    let overlap = tape.mul(shat, s)?;
    let inter = tape.sum(overlap);
    let num = tape.scale(inter, 2.0);
    let num = tape.add_scalar(num, DICE_EPS);
    let sum_pred = tape.sum(shat);
    let sum_true = tape.sum(s);
    let den = tape.add(sum_pred, sum_true)?;
    let den = tape.add_scalar(den, DICE_EPS);
    let dice = tape.div(num, den)?;
    let neg = tape.scale(dice, -1.0);
    Ok(tape.add_scalar(neg, 1.0))
}

/// Mean binary cross-entropy `−[s·ln p + (1−s)·ln(1−p)]` with clamped `p`.
pub fn bce_loss<T: Scalar>(tape: &mut Tape<T>, p: Var, s: Var) -> Result<Var> {
    same_shape(tape, "bce_loss", p, s)?;
    let p = tape.clamp(p, BCE_CLAMP, 1.0 - BCE_CLAMP);
    let log_p = tape.ln(p);
    let neg_p = tape.scale(p, -1.0);
    let q = tape.add_scalar(neg_p, 1.0);
    let log_q = tape.ln(q);
    let neg_s = tape.scale(s, -1.0);
    let s_bar = tape.add_scalar(neg_s, 1.0);
    let a = tape.mul(s, log_p)?;
    let b = tape.mul(s_bar, log_q)?;
    let ll = tape.add(a, b)?;
    let m = tape.mean(ll);
    Ok(tape.scale(m, -1.0))
}

/// Groundtruth mask plus the frozen segmenter that judges reconstructions.
#[derive(Clone, Copy, Debug)]
pub struct StructuralPrior<'a> {
    pub segmenter: &'a SegNet,
    pub mask: &'a MaskPlane,
}

/// Handles to the recorded terms of the combined objective.
#[derive(Clone, Copy, Debug)]
pub struct SincoTerms {
    pub total: Var,
    pub compress: Var,
    /// Soft-Dice term, present whenever a prior was supplied.
    pub regularize: Option<Var>,
}

/// Records `compress_loss(x̂, x) + λ·soft_dice_loss(g(x̂), s)`.
///
/// `xhat` and `x` may be `[H·W × 1]` or `[1×H×W]`; the reconstruction is
/// reshaped to `[1×H×W]` for the segmenter. With `λ = 0` the returned
/// `total` is the compress term itself.
pub fn sinco_loss<T: Scalar>(
    tape: &mut Tape<T>,
    xhat: Var,
    x: Var,
    prior: Option<&StructuralPrior<'_>>,
    lambda: f64,
) -> Result<SincoTerms> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(TrainError::Config(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let compress = compress_loss(tape, xhat, x)?;
    let regularize = match prior {
        Some(p) => Some(structural_term(tape, xhat, p)?),
        None if lambda > 0.0 => {
            return Err(TrainError::Config("lambda > 0 requires a mask and a segmenter".into()));
        }
        None => None,
    };
    let total = match regularize {
        Some(reg) if lambda > 0.0 => {
            let weighted = tape.scale(reg, lambda);
            tape.add(compress, weighted)?
        }
        _ => compress,
    };
    Ok(SincoTerms {
        total,
        compress,
        regularize,
    })
}

/// `1 − Dice(g(x̂), s)` with `g` frozen.
pub fn structural_term<T: Scalar>(tape: &mut Tape<T>, xhat: Var, prior: &StructuralPrior<'_>) -> Result<Var> {
    let g = prior.segmenter;
    if !g.is_frozen() {
        return Err(NetError::NotFrozen.into());
    }
    let (h, w) = (prior.mask.height(), prior.mask.width());
    let image = tape.reshape(xhat, vec![1, h, w])?;
    let params = g.bind(tape);
    let shat = g.forward(tape, &params, image)?;
    let mask = Tensor::new(
        vec![1, h, w],
        prior.mask.values().iter().map(|&v| T::of_f64(v as f64)).collect(),
    )?;
    let s = tape.constant(mask);
    soft_dice_loss(tape, shat, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::SegNetConfig;

    fn leaf(tape: &mut Tape<f64>, data: &[f64], grad: bool) -> Var {
        tape.leaf(Tensor::new(vec![data.len()], data.to_vec()).unwrap(), grad)
    }

    #[test]
    fn compress_loss_values_and_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = leaf(&mut tape, &[0.2, 0.4, 0.6, 0.8], false);
        let same = leaf(&mut tape, &[0.2, 0.4, 0.6, 0.8], true);
        let l = compress_loss(&mut tape, same, x).unwrap();
        assert_eq!(tape.value(l).item(), 0.0);

        let shifted = leaf(&mut tape, &[0.3, 0.5, 0.7, 0.9], true);
        let l = compress_loss(&mut tape, shifted, x).unwrap();
        assert!((tape.value(l).item() - 0.01).abs() < 1e-12);
        let g = tape.backward(l).unwrap();
        // 2(x̂ − x)/N
        for v in g.get(shifted).unwrap().data() {
            assert!((v - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_dice_extremes_and_half() {
        let mut tape = Tape::<f64>::new();
        let s = leaf(&mut tape, &[1.0, 1.0, 0.0, 0.0], false);
        let l = soft_dice_loss(&mut tape, s, s).unwrap();
        assert!(tape.value(l).item().abs() < 1e-6);

        let disjoint = leaf(&mut tape, &[0.0, 0.0, 1.0, 1.0], true);
        let l = soft_dice_loss(&mut tape, disjoint, s).unwrap();
        assert!((tape.value(l).item() - 1.0).abs() < 1e-6);

        let half = leaf(&mut tape, &[0.5; 4], true);
        let l = soft_dice_loss(&mut tape, half, s).unwrap();
        // (2·0.25·N + ε)/(0.5N + 0.5N + ε) with N = 4
        let want = 1.0 - (2.0 * 0.25 * 4.0 + DICE_EPS) / (2.0 + 2.0 + DICE_EPS);
        assert!((tape.value(l).item() - want).abs() < 1e-12);
        assert!((tape.value(l).item() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn empty_masks_do_not_divide_by_zero() {
        let mut tape = Tape::<f64>::new();
        let z = leaf(&mut tape, &[0.0; 3], false);
        let l = soft_dice_loss(&mut tape, z, z).unwrap();
        assert_eq!(tape.value(l).item(), 0.0);
    }

    #[test]
    fn bce_reference_values() {
        let mut tape = Tape::<f64>::new();
        let s = leaf(&mut tape, &[1.0, 0.0, 1.0], false);
        let p = leaf(&mut tape, &[0.5; 3], true);
        let l = bce_loss(&mut tape, p, s).unwrap();
        assert!((tape.value(l).item() - std::f64::consts::LN_2).abs() < 1e-12);

        let exact = leaf(&mut tape, &[1.0, 0.0, 1.0], true);
        let l = bce_loss(&mut tape, exact, s).unwrap();
        let v = tape.value(l).item();
        assert!(v > 0.0 && v < 1e-6, "{v}");

        let one = leaf(&mut tape, &[1.0], false);
        let p9 = leaf(&mut tape, &[0.9], true);
        let l = bce_loss(&mut tape, p9, one).unwrap();
        assert!((tape.value(l).item() - 0.10536051565782628).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_total_is_compress_term() {
        let g = SegNet::init(
            SegNetConfig {
                levels: 1,
                base_channels: 2,
            },
            0,
        )
        .unwrap()
        .freeze();
        let mask = MaskPlane::binary(4, 4, vec![0.0; 16]).unwrap();
        let prior = StructuralPrior { segmenter: &g, mask: &mask };
        let mut tape = Tape::<f32>::new();
        let xhat = tape.leaf(Tensor::full(&[16, 1], 0.3), true);
        let x = tape.constant(Tensor::full(&[16, 1], 0.1));
        let terms = sinco_loss(&mut tape, xhat, x, Some(&prior), 0.0).unwrap();
        assert_eq!(terms.total, terms.compress);
        assert!(terms.regularize.is_some());

        let terms = sinco_loss(&mut tape, xhat, x, Some(&prior), 1.0).unwrap();
        let sum = tape.value(terms.compress).item() + tape.value(terms.regularize.unwrap()).item();
        assert_eq!(tape.value(terms.total).item(), sum);
    }

    #[test]
    fn misconfigured_objective_is_rejected() {
        let mut tape = Tape::<f32>::new();
        let xhat = tape.leaf(Tensor::full(&[16, 1], 0.3), true);
        let x = tape.constant(Tensor::full(&[16, 1], 0.1));
        assert!(matches!(sinco_loss(&mut tape, xhat, x, None, 1.0), Err(TrainError::Config(_))));
        assert!(sinco_loss(&mut tape, xhat, x, None, -1.0).is_err());

        let g = SegNet::init(
            SegNetConfig {
                levels: 1,
                base_channels: 2,
            },
            0,
        )
        .unwrap();
        let mask = MaskPlane::binary(4, 4, vec![0.0; 16]).unwrap();
        let prior = StructuralPrior { segmenter: &g, mask: &mask };
        assert!(matches!(
            sinco_loss(&mut tape, xhat, x, Some(&prior), 1.0),
            Err(TrainError::Net(NetError::NotFrozen))
        ));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut tape = Tape::<f64>::new();
        let a = leaf(&mut tape, &[0.0; 3], true);
        let b = leaf(&mut tape, &[0.0; 4], false);
        assert!(compress_loss(&mut tape, a, b).is_err());
        assert!(soft_dice_loss(&mut tape, a, b).is_err());
        assert!(bce_loss(&mut tape, a, b).is_err());
    }
}
