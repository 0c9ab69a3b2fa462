//! Synthetic brain-like phantoms with tumour masks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ImageError, ImagePlane, MaskPlane};

const MIN_AREA: f64 = 0.005;
const MAX_AREA: f64 = 0.10;

struct Blob {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    angle: f64,
    intensity: f64,
}

impl Blob {
    /// Normalized elliptical radius of `(x, y)`; 1 on the boundary.
    fn radius(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let (s, c) = self.angle.sin_cos();
        let u = (c * dx + s * dy) / self.rx;
        let v = (-s * dx + c * dy) / self.ry;
        (u * u + v * v).sqrt()
    }
}

fn smoothstep(edge0: f64, edge1: f64, x: f64) -> f64 {
    let t = ((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Generates a deterministic `(image, mask)` pair.
///
/// The image has a dark background, a bright elliptical skull ring around
/// smoothly textured tissue, and one to three bright tumour blobs; the mask
/// is the union of the blobs. Mask area is kept between 0.5% and 10% of the
/// pixels and strictly inside the head.
pub fn synth_phantom(seed: u64, height: usize, width: usize) -> Result<(ImagePlane, MaskPlane), ImageError> {
    if height < 32 || width < 32 {
        return Err(ImageError::Extent(format!(
            "phantoms need at least 32x32 pixels, got {width}x{height}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (height as f64, width as f64);
    let head = Blob {
        cx: w / 2.0 + rng.gen_range(-0.03..0.03) * w,
        cy: h / 2.0 + rng.gen_range(-0.03..0.03) * h,
        rx: w * rng.gen_range(0.36..0.43),
        ry: h * rng.gen_range(0.40..0.46),
        angle: rng.gen_range(-0.25..0.25),
        intensity: rng.gen_range(0.62..0.72),
    };
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(1.0..3.5) * std::f64::consts::TAU / w,
                rng.gen_range(1.0..3.5) * std::f64::consts::TAU / h,
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.3..1.0),
            )
        })
        .collect();
    let tissue_base = rng.gen_range(0.30..0.38);

    let min_side = h.min(w);
    let tumours = loop {
        let count = rng.gen_range(1..=3);
        let blobs: Vec<Blob> = (0..count)
            .map(|_| {
                let t = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = rng.gen_range(0.0..0.5);
                Blob {
                    cx: head.cx + r * head.rx * t.cos(),
                    cy: head.cy + r * head.ry * t.sin(),
                    rx: min_side * rng.gen_range(0.05..0.11),
                    ry: min_side * rng.gen_range(0.05..0.11),
                    angle: rng.gen_range(0.0..std::f64::consts::PI),
                    intensity: rng.gen_range(0.88..0.97),
                }
            })
            .collect();
        let mut area = 0usize;
        let mut inside = true;
        for row in 0..height {
            for col in 0..width {
                let (x, y) = (col as f64 + 0.5, row as f64 + 0.5);
                if blobs.iter().any(|b| b.radius(x, y) <= 1.0) {
                    area += 1;
                    inside &= head.radius(x, y) < 0.8;
                }
            }
        }
        let frac = area as f64 / (h * w);
        if inside && (MIN_AREA..=MAX_AREA).contains(&frac) {
            break blobs;
        }
    };

    let mut pixels = Vec::with_capacity(height * width);
    let mut mask = Vec::with_capacity(height * width);
    for row in 0..height {
        for col in 0..width {
            let (x, y) = (col as f64 + 0.5, row as f64 + 0.5);
            let rh = head.radius(x, y);
            let texture: f64 = waves
                .iter()
                .map(|&(fx, fy, phase, amp)| amp * (fx * x + fy * y + phase).sin())
                .sum::<f64>()
                / 3.0;
            let tissue = tissue_base + 0.12 * texture;
            // Skull ring between normalized radii 0.88 and 1.0, soft by ~1px.
            let px_r = 1.0 / head.rx.min(head.ry);
            let outer = 1.0 - smoothstep(1.0 - px_r, 1.0 + px_r, rh);
            let ring = smoothstep(0.88 - px_r, 0.88 + px_r, rh) * outer;
            let interior = 1.0 - smoothstep(0.88 - px_r, 0.88 + px_r, rh);
            let mut v = interior * tissue + ring * head.intensity;

            let mut in_mask = false;
            for b in &tumours {
                let rb = b.radius(x, y);
                in_mask |= rb <= 1.0;
                let edge = 1.0 / b.rx.min(b.ry);
                let weight = 1.0 - smoothstep(1.0 - edge, 1.0 + edge, rb);
                v = v * (1.0 - weight) + b.intensity * weight;
            }
            pixels.push(v.clamp(0.0, 1.0) as f32);
            mask.push(if in_mask { 1.0 } else { 0.0 });
        }
    }
    Ok((
        ImagePlane::new(height, width, pixels)?,
        MaskPlane::binary(height, width, mask)?,
    ))
}
