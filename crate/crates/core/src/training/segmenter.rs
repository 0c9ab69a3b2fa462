use log::debug;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{adam_step, bce_loss, AdamState, LossTrace, Result, TraceRow, TrainConfig, TrainError};
use crate::imageio::{synth_phantom, ImagePlane, MaskPlane};
use crate::nets::SegNet;
use crate::tensor::{Tape, Tensor};

/// Paired images and binary masks.
#[derive(Clone, Debug, Default)]
pub struct SegDataset {
    pairs: Vec<(ImagePlane, MaskPlane)>,
}

impl SegDataset {
    pub fn new(pairs: Vec<(ImagePlane, MaskPlane)>) -> Result<Self> {
        for (i, (x, s)) in pairs.iter().enumerate() {
            if (x.height(), x.width()) != (s.height(), s.width()) {
                return Err(TrainError::Config(format!("pair {i}: image and mask extents differ")));
            }
            if !s.is_binary() {
                return Err(TrainError::Config(format!("pair {i}: mask is not binary")));
            }
        }
        Ok(Self { pairs })
    }

    /// `count` phantoms whose seeds are drawn from a stream seeded by `seed`.
    pub fn synthetic(count: usize, seed: u64, height: usize, width: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seeds: Vec<u64> = (0..count).map(|_| rng.gen()).collect();
        let pairs = seeds
            .into_par_iter()
            .map(|s| synth_phantom(s, height, width))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(pairs)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(ImagePlane, MaskPlane)] {
        &self.pairs
    }
}

fn sample_grad(g: &SegNet, x: &ImagePlane, s: &MaskPlane) -> Result<(f64, Vec<Tensor<f32>>)> {
    let mut tape = Tape::<f32>::new();
    let params: Vec<_> = g.params().iter().map(|p| tape.leaf(p.clone(), true)).collect();
    let xv = tape.constant(Tensor::new(vec![1, x.height(), x.width()], x.pixels().to_vec())?);
    let sv = tape.constant(Tensor::new(vec![1, s.height(), s.width()], s.values().to_vec())?);
    let p = g.forward(&mut tape, &params, xv)?;
    let loss = bce_loss(&mut tape, p, sv)?;
    let mut grads = tape.backward(loss)?;
    let grads = params
        .iter()
        .zip(g.params())
        .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();
    Ok((tape.value(loss).item() as f64, grads))
}

/// Trains `g` by minibatch Adam on mean BCE.
///
/// Each epoch visits the dataset once in a seed-determined shuffled order.
/// Per-sample gradients in a batch are computed in parallel and averaged in
/// batch order, so results do not depend on thread scheduling. The returned
/// network is unfrozen; the trace's `total` column is the epoch's mean loss.
pub fn train_segmenter(ds: &SegDataset, g: SegNet, cfg: &TrainConfig) -> Result<(SegNet, LossTrace)> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if cfg.batch_size > ds.len() {
        return Err(TrainError::Config(format!(
            "batch size {} exceeds dataset size {}",
            cfg.batch_size,
            ds.len()
        )));
    }
    let mut g = g.unfreeze();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(g.params());
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut trace = LossTrace::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results = batch
                .par_iter()
                .map(|&i| {
                    let (x, s) = &ds.pairs[i];
                    sample_grad(&g, x, s)
                })
                .collect::<Result<Vec<_>>>()?;
            let scale = 1.0 / batch.len() as f32;
            let mut mean: Vec<Tensor<f32>> = g.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
            for (loss, grads) in &results {
                epoch_loss += loss;
                for (acc, gr) in mean.iter_mut().zip(grads) {
                    for (a, b) in acc.data_mut().iter_mut().zip(gr.data()) {
                        *a += *b * scale;
                    }
                }
            }
            adam_step(g.params_mut(), &mean, &mut state, cfg.lr, &cfg.adam);
        }
        if cfg.should_log(epoch) {
            let mean_loss = epoch_loss / ds.len() as f64;
            debug!("segmenter epoch {epoch}: bce {mean_loss:.5}");
            trace.push(TraceRow {
                epoch,
                total: mean_loss,
                compress: mean_loss,
                regularize: None,
            });
        }
    }
    Ok((g, trace))
}
