use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

/// Samples `U(−bound, bound)` into a tensor of the given shape.
pub fn uniform(shape: &[usize], bound: f64, rng: &mut ChaCha8Rng) -> Tensor<f32> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..=bound) as f32).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches sample count")
}

/// He-uniform: `U(±√(6/fan_in))`.
pub fn he_uniform(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<f32> {
    uniform(shape, (6.0 / fan_in as f64).sqrt(), rng)
}
