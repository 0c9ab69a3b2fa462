//! PSNR, SSIM and hard Dice.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::imageio::{ImagePlane, MaskPlane};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: (usize, usize), right: (usize, usize) },
    #[error("image {height}x{width} is smaller than the {window}x{window} window")]
    TooSmall { height: usize, width: usize, window: usize },
    #[error("peak must be positive, got {0}")]
    Peak(f64),
}

pub type Result<T, E = MetricError> = std::result::Result<T, E>;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(MetricError::ShapeMismatch { left: a, right: b });
    }
    Ok(())
}

/// `10·log10(peak² / MSE)`, `+∞` for identical images.
pub fn psnr(x: &ImagePlane, y: &ImagePlane, peak: f64) -> Result<f64> {
    check((x.height(), x.width()), (y.height(), y.width()))?;
    if !(peak > 0.0) {
        return Err(MetricError::Peak(peak));
    }
    let sse: f64 = x
        .pixels()
        .iter()
        .zip(y.pixels())
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum();
    let mse = sse / x.pixels().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = g.iter().sum();
    g.into_iter().map(|v| v / total).collect()
}

/// Mean SSIM over all fully contained 11×11 Gaussian windows, dynamic range 1.
pub fn ssim(x: &ImagePlane, y: &ImagePlane) -> Result<f64> {
    let (h, w) = (x.height(), x.width());
    check((h, w), (y.height(), y.width()))?;
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(MetricError::TooSmall {
            height: h,
            width: w,
            window: SSIM_WINDOW,
        });
    }
    let g = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let (xp, yp) = (x.pixels(), y.pixels());
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut total = 0.0;
    for r in 0..oh {
        for c in 0..ow {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..SSIM_WINDOW {
                for j in 0..SSIM_WINDOW {
                    let wt = g[i] * g[j];
                    let a = xp[(r + i) * w + c + j] as f64;
                    let b = yp[(r + i) * w + c + j] as f64;
                    mx += wt * a;
                    my += wt * b;
                    xx += wt * (a * a);
                    yy += wt * (b * b);
                    xy += wt * (a * b);
                }
            }
            let vx = xx - mx * mx;
            let vy = yy - my * my;
            let cov = xy - mx * my;
            let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
            let den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += num / den;
        }
    }
    Ok(total / (oh * ow) as f64)
}

/// `2|A∩B| / (|A|+|B|)` after thresholding `shat`; 1 when both are empty.
pub fn dice_score(shat: &MaskPlane, s: &MaskPlane, threshold: f32) -> Result<f64> {
    check((shat.height(), shat.width()), (s.height(), s.width()))?;
    let (mut inter, mut a, mut b) = (0usize, 0usize, 0usize);
    for (&p, &t) in shat.values().iter().zip(s.values()) {
        let p = p >= threshold;
        let t = t >= 0.5;
        inter += (p && t) as usize;
        a += p as usize;
        b += t as usize;
    }
    if a + b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (a + b) as f64)
}

fn ser_psnr<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_psnr<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Psnr {
        Num(f64),
        Text(String),
    }
    match Psnr::deserialize(d)? {
        Psnr::Num(v) => Ok(v),
        Psnr::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Psnr::Text(t) => Err(serde::de::Error::custom(format!("bad psnr {t:?}"))),
    }
}

/// One evaluation row; `dice` is absent when no mask was supplied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(serialize_with = "ser_psnr", deserialize_with = "de_psnr")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub dice: Option<f64>,
    pub bpp: f64,
}

impl EvalReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    /// Field-wise mean; PSNR is averaged in dB and stays infinite if any row is.
    pub fn mean(rows: &[EvalReport]) -> Option<EvalReport> {
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let dice = if rows.iter().all(|r| r.dice.is_some()) {
            Some(rows.iter().filter_map(|r| r.dice).sum::<f64>() / n)
        } else {
            None
        };
        Some(EvalReport {
            psnr_db: rows.iter().map(|r| r.psnr_db).sum::<f64>() / n,
            ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
            dice,
            bpp: rows.iter().map(|r| r.bpp).sum::<f64>() / n,
        })
    }
}
