//! Shared compress-and-score steps used by `compress`, `sweep` and `evaluate`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sinco::codec::{decompress, read_segmenter, size_model_for_budget, CodecBudget, CompressedContainer};
use sinco::imageio::{load_image, load_mask, make_coordinate_grid, ImagePlane, MaskPlane};
use sinco::metrics::{dice_score, psnr, ssim, EvalReport};
use sinco::nets::{registry, unet_forward, InrModel, SegNet};
use sinco::training::{train_compress, LossTrace, TrainConfig};

use crate::error::{read_input, CliError, Result};

/// Hyperparameters of one compression run.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmSpec {
    pub arch: String,
    pub frequencies: usize,
    pub omega0: f32,
    pub bpp: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

pub struct ArmOutcome {
    pub container: CompressedContainer,
    /// Trained weights before quantization.
    pub model: InrModel,
    pub trace: LossTrace,
    /// Decoded from the container.
    pub reconstruction: ImagePlane,
    /// Rendered from the unquantized weights.
    pub full_precision: ImagePlane,
}

/// Sizes, fits and quantizes a network for `x`.
pub fn compress_image(
    x: &ImagePlane,
    mask: Option<&MaskPlane>,
    segmenter: Option<&SegNet>,
    spec: &ArmSpec,
) -> Result<ArmOutcome> {
    if spec.lambda > 0.0 && (mask.is_none() || segmenter.is_none()) {
        return Err(CliError::Usage("lambda > 0 requires --mask and --seg".into()));
    }
    let arch = registry().get(&spec.arch)?;
    let budget = CodecBudget::new(spec.bpp, 16, x.height(), x.width())?;
    let (cfg, n) = size_model_for_budget(arch.as_ref(), spec.frequencies, spec.omega0, &budget)?;
    log::info!(
        "{} depth {} width {}: {n} params for {}x{} at {} bpp",
        arch.name(),
        cfg.depth,
        cfg.width,
        x.width(),
        x.height(),
        spec.bpp
    );
    let model = InrModel::init(arch, cfg, spec.seed)?;
    let train = TrainConfig {
        lambda: spec.lambda,
        lr: spec.lr,
        epochs: spec.epochs,
        seed: spec.seed,
        log_every: (spec.epochs / 100).max(1),
        ..TrainConfig::compression()
    };
    let (model, trace) = train_compress(x, mask, segmenter, model, &train)?;
    let container = CompressedContainer::from_model(&model, x.height(), x.width())?;
    let reconstruction = decompress(&container)?;
    let full_precision = model.render(&make_coordinate_grid(x.height(), x.width()))?;
    Ok(ArmOutcome {
        container,
        model,
        trace,
        reconstruction,
        full_precision,
    })
}

/// PSNR and SSIM of `xhat` against `x`, plus Dice of the segmenter on `xhat`.
pub fn score(
    x: &ImagePlane,
    xhat: &ImagePlane,
    prior: Option<(&MaskPlane, &SegNet)>,
    bpp: f64,
) -> Result<EvalReport> {
    let dice = match prior {
        Some((mask, g)) => Some(dice_score(&unet_forward(g, xhat)?, mask, 0.5)?),
        None => None,
    };
    Ok(EvalReport {
        psnr_db: psnr(x, xhat, 1.0)?,
        ssim: ssim(x, xhat)?,
        dice,
        bpp,
    })
}

pub fn load_segmenter(path: &Path) -> Result<SegNet> {
    Ok(read_segmenter(&read_input(path)?)?)
}

/// `img_K.pgm` / `mask_K.pgm` pairs in `dir`, sorted by `K`.
pub fn find_pairs(dir: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    let mut images = BTreeMap::new();
    let mut masks = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::Data(e.to_string()))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("pgm") {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        if let Some(key) = stem.strip_prefix("img_") {
            images.insert(key.to_string(), path);
        } else if let Some(key) = stem.strip_prefix("mask_") {
            masks.insert(key.to_string(), path);
        }
    }
    let unpaired: Vec<String> = images
        .keys()
        .filter(|k| !masks.contains_key(*k))
        .map(|k| format!("img_{k}.pgm"))
        .chain(masks.keys().filter(|k| !images.contains_key(*k)).map(|k| format!("mask_{k}.pgm")))
        .collect();
    if !unpaired.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: unpaired files: {}",
            dir.display(),
            unpaired.join(", ")
        )));
    }
    if images.is_empty() {
        return Err(CliError::Usage(format!("{}: no img_*.pgm / mask_*.pgm pairs", dir.display())));
    }
    Ok(images
        .into_iter()
        .map(|(k, img)| {
            let mask = masks.remove(&k).expect("paired above");
            (k, img, mask)
        })
        .collect())
}

pub fn load_pairs(dir: &Path) -> Result<Vec<(String, ImagePlane, MaskPlane)>> {
    find_pairs(dir)?
        .into_iter()
        .map(|(k, img, mask)| Ok((format!("img_{k}"), load_image(&img)?, load_mask(&mask)?)))
        .collect()
}
