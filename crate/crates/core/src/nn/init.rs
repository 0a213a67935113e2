use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::nn::{Scalar, Tensor};

/// Uniform initialisation in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<S: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<S> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| S::from_f64_lossy(rng.random_range(-limit..limit))).collect();
    Tensor::new(shape, data).expect("shape and data agree")
}

/// HWIO convolution kernel; fans count the receptive field.
pub fn conv_kernel<S: Scalar>(rng: &mut ChaCha8Rng, kh: usize, kw: usize, cin: usize, cout: usize) -> Tensor<S> {
    glorot_uniform(rng, &[kh, kw, cin, cout], kh * kw * cin, kh * kw * cout)
}

/// `[in, out]` dense weight matrix.
pub fn dense_weights<S: Scalar>(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Tensor<S> {
    glorot_uniform(rng, &[fan_in, fan_out], fan_in, fan_out)
}
