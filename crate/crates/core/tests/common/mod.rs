#![allow(dead_code)]

pub mod qp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbr_core::nn::{Graph, Tensor, Var};
use sbr_core::Result;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_f64(shape, &data).unwrap()
}

/// Relative error with the denominator floored so that near-zero gradients
/// are compared absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Central finite-difference check of every input element of a scalar
/// function built on a fresh graph. Returns the worst relative error.
pub fn grad_check<F>(inputs: &[Tensor<f64>], h: f64, build: F) -> f64
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    grad_check_subset(inputs, h, usize::MAX, 0, build)
}

/// Like [`grad_check`] but probes at most `per_input` coordinates of each
/// input, chosen with a seeded generator.
pub fn grad_check_subset<F>(inputs: &[Tensor<f64>], h: f64, per_input: usize, seed: u64, build: F) -> f64
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let eval = |ins: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = ins.iter().map(|t| g.param(t.clone()).unwrap()).collect();
        let out = build(&mut g, &vars).unwrap();
        g.value(out).item()
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone()).unwrap()).collect();
    let loss = build(&mut g, &vars).unwrap();
    g.backward(loss).unwrap();
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| g.grad(v).map(|d| d.to_vec()).unwrap_or_else(|| vec![0.0; t.len()]))
        .collect();

    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for (i, t) in inputs.iter().enumerate() {
        let coords: Vec<usize> = if t.len() <= per_input {
            (0..t.len()).collect()
        } else {
            (0..per_input).map(|_| r.random_range(0..t.len())).collect()
        };
        for j in coords {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += h;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let e = rel_err(analytic[i][j], numeric);
            if e > worst {
                worst = e;
            }
        }
    }
    worst
}

/// Direct nested-loop NHWC/HWIO convolution with explicit padding offsets.
#[allow(clippy::too_many_arguments)]
pub fn naive_conv(
    x: &[f64],
    (n, h, w, c): (usize, usize, usize, usize),
    k: &[f64],
    (kh, kw, cout): (usize, usize, usize),
    stride: usize,
    (pad_top, pad_left): (usize, usize),
    (oh, ow): (usize, usize),
) -> Vec<f64> {
    let mut out = vec![0.0; n * oh * ow * cout];
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for co in 0..cout {
                    let mut acc = 0.0;
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride + ky) as isize - pad_top as isize;
                            let ix = (ox * stride + kx) as isize - pad_left as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            for ci in 0..c {
                                let xv = x[((b * h + iy as usize) * w + ix as usize) * c + ci];
                                let kv = k[((ky * kw + kx) * c + ci) * cout + co];
                                acc += xv * kv;
                            }
                        }
                    }
                    out[((b * oh + oy) * ow + ox) * cout + co] = acc;
                }
            }
        }
    }
    out
}

pub fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for t in 0..k {
                c[i * n + j] += a[i * k + t] * b[t * n + j];
            }
        }
    }
    c
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
