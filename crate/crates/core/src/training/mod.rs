//! Objectives, Adam, and the segmenter / compression training loops.

mod adam;
mod fit;
mod losses;
mod segmenter;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use fit::train_compress;
pub use losses::{
    bce_loss, compress_loss, sinco_loss, soft_dice_loss, structural_term, SincoTerms, StructuralPrior, BCE_CLAMP,
    DICE_EPS,
};
pub use segmenter::{train_segmenter, SegDataset};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imageio::ImageError;
use crate::nets::NetError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dataset is empty")]
    EmptyDataset,
}

pub type Result<T, E = TrainError> = std::result::Result<T, E>;

/// Full-length compression fit.
pub const FULL_COMPRESS_EPOCHS: usize = 50_000;
/// Shortened fit used for desk-scale runs and tests.
pub const DESK_EPOCHS: usize = 2_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the structural term.
    pub lambda: f64,
    pub lr: f64,
    /// Compression: full-grid gradient steps. Segmenter: passes over the dataset.
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub log_every: usize,
    /// Segmenter minibatch size (ignored by the compression fit).
    pub batch_size: usize,
}

impl TrainConfig {
    /// λ = 1, lr = 1e-3, 50 000 epochs.
    pub fn compression() -> Self {
        Self {
            lambda: 1.0,
            lr: 1e-3,
            epochs: FULL_COMPRESS_EPOCHS,
            seed: 0,
            adam: AdamConfig::default(),
            log_every: 500,
            batch_size: 1,
        }
    }

    /// lr = 1e-4, 75 epochs, batch size 8.
    pub fn segmenter() -> Self {
        Self {
            lambda: 0.0,
            lr: 1e-4,
            epochs: 75,
            seed: 0,
            adam: AdamConfig::default(),
            log_every: 1,
            batch_size: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(TrainError::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }

    fn should_log(&self, epoch: usize) -> bool {
        epoch == 1 || epoch == self.epochs || (self.log_every > 0 && epoch % self.log_every == 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub total: f64,
    pub compress: f64,
    pub regularize: Option<f64>,
}

/// Loss values sampled during training, in increasing epoch order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    rows: Vec<TraceRow>,
}

impl LossTrace {
    pub fn push(&mut self, row: TraceRow) {
        debug_assert!(self.rows.last().map_or(true, |r| r.epoch < row.epoch));
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn first(&self) -> Option<&TraceRow> {
        self.rows.first()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// `epoch,total,compress,regularize`; the last column is empty without a regularizer.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,total,compress,regularize\n");
        for r in &self.rows {
            let reg = r.regularize.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", r.epoch, r.total, r.compress, reg);
        }
        out
    }
}
