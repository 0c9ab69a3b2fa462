use log::debug;

use super::{adam_step, sinco_loss, AdamState, LossTrace, Result, StructuralPrior, TraceRow, TrainConfig, TrainError};
use crate::imageio::{make_coordinate_grid, ImagePlane, MaskPlane};
use crate::nets::{InrModel, SegNet};
use crate::tensor::{Tape, Tensor};

/// Fits `model` to `x` by full-grid Adam steps on the combined objective.
///
/// Every epoch evaluates all `H·W` pixels once. With `cfg.lambda > 0` both
/// `mask` and a frozen `segmenter` are required; with `λ = 0` they are
/// optional and, when given, only the logged regularize value uses them.
pub fn train_compress(
    x: &ImagePlane,
    mask: Option<&MaskPlane>,
    segmenter: Option<&SegNet>,
    mut model: InrModel,
    cfg: &TrainConfig,
) -> Result<(InrModel, LossTrace)> {
    cfg.validate()?;
    let prior = match (mask, segmenter) {
        (Some(mask), Some(segmenter)) => {
            if (mask.height(), mask.width()) != (x.height(), x.width()) {
                return Err(TrainError::Config(format!(
                    "mask is {}x{} but image is {}x{}",
                    mask.width(),
                    mask.height(),
                    x.width(),
                    x.height()
                )));
            }
            Some(StructuralPrior { segmenter, mask })
        }
        _ if cfg.lambda > 0.0 => {
            return Err(TrainError::Config("lambda > 0 requires both a mask and a segmenter".into()));
        }
        _ => None,
    };

    let grid = make_coordinate_grid(x.height(), x.width());
    let target = Tensor::new(vec![grid.len(), 1], x.pixels().to_vec())?;
    let mut state = AdamState::new(model.params());
    let mut trace = LossTrace::default();

    for epoch in 1..=cfg.epochs {
        let log = cfg.should_log(epoch);
        // The structural term is only recorded when it contributes or is logged.
        let step_prior = prior.filter(|_| cfg.lambda > 0.0 || log);

        let mut tape = Tape::new();
        let params = model.bind(&mut tape, true);
        let xhat = model.forward(&mut tape, &params, grid.coords())?;
        let xv = tape.constant(target.clone());
        let terms = sinco_loss(&mut tape, xhat, xv, step_prior.as_ref(), cfg.lambda)?;
        let mut grads = tape.backward(terms.total)?;

        if log {
            let row = TraceRow {
                epoch,
                total: tape.value(terms.total).item() as f64,
                compress: tape.value(terms.compress).item() as f64,
                regularize: terms.regularize.map(|r| tape.value(r).item() as f64),
            };
            debug!("epoch {epoch}: {row:?}");
            trace.push(row);
        }

        let grads: Vec<Tensor<f32>> = params
            .iter()
            .zip(model.params())
            .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect();
        adam_step(model.params_mut(), &grads, &mut state, cfg.lr, &cfg.adam);
    }
    Ok((model, trace))
}
