//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] is built fresh for every forward pass. Every op appends one
//! node holding its output value and whatever it needs for the backward
//! pass; [`Graph::backward`] then walks the tape in reverse. Every forward
//! value and every gradient is checked for NaN/Inf and reported as
//! [`Error::Numeric`] instead of propagating.

use crate::error::{Error, Result};
use crate::nn::conv::{col2im, im2col, ConvGeom, Padding};
use crate::nn::tensor::{Scalar, Tensor};
use crate::nn::Temperature;

/// Lower clamp applied to probabilities before taking logarithms.
pub const BCE_EPS: f64 = 1e-7;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<S> {
    Leaf,
    Conv2d { input: Var, kernel: Var, geom: ConvGeom, cols: Vec<S> },
    ConvTranspose2d { input: Var, kernel: Var, geom: ConvGeom },
    MatMul { a: Var, b: Var },
    AddBias { input: Var, bias: Var },
    Relu { input: Var },
    Sigmoid { input: Var, t: S },
    Softmax { input: Var, t: S },
    Exp { input: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { input: Var, factor: S },
    Reshape { input: Var },
    SliceCols { input: Var, start: usize },
    Sum { input: Var },
    Mean { input: Var },
    Bce { pred: Var, target: Vec<S>, per_sample: usize },
    SigmoidBce { logits: Var, target: Vec<S>, t: S },
    L1 { x: Var, y: Var, per_sample: usize },
    Kl { mu: Var, log_var: Var, per_sample: usize },
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    requires_grad: bool,
    grad: Option<Vec<S>>,
}

#[derive(Default)]
pub struct Graph<S: Scalar> {
    nodes: Vec<Node<S>>,
}

/// Elements per sample for a per-sample reduction: rank-1 tensors are a
/// single sample, otherwise the leading dimension is the batch.
fn sample_layout(shape: &[usize]) -> (usize, usize) {
    if shape.len() <= 1 {
        (1, shape.iter().product())
    } else {
        (shape[0], shape[1..].iter().product())
    }
}

fn check_binary<S: Scalar>(target: &Tensor<S>, what: &str) -> Result<()> {
    if target.data().iter().all(|&v| v == S::zero() || v == S::one()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} targets must be 0 or 1")))
    }
}

fn same_shape<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, op: &str) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::dim(format!("{op}: shapes {:?} and {:?} differ", a.shape(), b.shape())))
    }
}

fn grad_slot<'a, S: Scalar>(grads: &'a mut [Option<Vec<S>>], nodes: &[Node<S>], v: Var) -> &'a mut Vec<S> {
    grads[v.0].get_or_insert_with(|| vec![S::zero(); nodes[v.0].value.len()])
}

/// Numerically stable logistic function of `x / t`.
#[inline]
pub fn sigmoid_scalar<S: Scalar>(x: S, t: S) -> S {
    let u = x / t;
    if u >= S::zero() {
        S::one() / (S::one() + (-u).exp())
    } else {
        let e = u.exp();
        e / (S::one() + e)
    }
}

fn clamp_prob<S: Scalar>(p: S) -> S {
    let eps = S::from_f64_lossy(BCE_EPS);
    p.max(eps).min(S::one() - eps)
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, requires_grad: bool, name: &str) -> Result<Var> {
        value.ensure_finite(name)?;
        self.nodes.push(Node { value, op, requires_grad, grad: None });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor<S>, requires_grad: bool) -> Result<Var> {
        self.push(value, Op::Leaf, requires_grad, "leaf")
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<S>) -> Result<Var> {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor<S>) -> Result<Var> {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient of a leaf after [`Graph::backward`].
    pub fn grad(&self, v: Var) -> Option<&[S]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, stride: usize, padding: Padding) -> Result<Var> {
        let x = self.value(input);
        let k = self.value(kernel);
        let geom = ConvGeom::new(x.shape(), k.shape(), stride, padding)?;
        let cols = im2col(x.data(), &geom);
        let mut out = vec![S::zero(); geom.rows() * geom.out_c];
        S::gemm(
            geom.rows(),
            geom.patch_len(),
            geom.out_c,
            S::one(),
            &cols,
            geom.patch_len() as isize,
            1,
            k.data(),
            geom.out_c as isize,
            1,
            S::zero(),
            &mut out,
            geom.out_c as isize,
            1,
        );
        let value = Tensor::new(&geom.output_shape(), out)?;
        let rg = self.rg(&[input, kernel]);
        self.push(value, Op::Conv2d { input, kernel, geom, cols }, rg, "conv2d")
    }

    /// Transposed convolution (the adjoint of a "same"-padded strided
    /// convolution). `kernel` is `[kh, kw, out_c, in_c]`; the output has
    /// spatial size `out_hw`, which must satisfy `ceil(out / stride) == in`.
    pub fn conv_transpose2d(
        &mut self,
        input: Var,
        kernel: Var,
        stride: usize,
        out_hw: (usize, usize),
    ) -> Result<Var> {
        let x = self.value(input);
        let k = self.value(kernel);
        let [n, h, w, cx] = *x.shape() else {
            return Err(Error::dim(format!("conv_transpose input must be NHWC, got {:?}", x.shape())));
        };
        let [kh, kw, cy, kcx] = *k.shape() else {
            return Err(Error::dim(format!("conv_transpose kernel must be 4-D, got {:?}", k.shape())));
        };
        if kcx != cx {
            return Err(Error::dim(format!("kernel expects {kcx} input channels, input has {cx}")));
        }
        let geom = ConvGeom::new(&[n, out_hw.0, out_hw.1, cy], &[kh, kw, cy, cx], stride, Padding::Same)?;
        if geom.out_h != h || geom.out_w != w {
            return Err(Error::dim(format!(
                "conv_transpose: {h}x{w} input cannot produce {}x{} output at stride {stride}",
                out_hw.0, out_hw.1
            )));
        }
        let patch = geom.patch_len();
        let mut cols = vec![S::zero(); geom.rows() * patch];
        // cols[rows, patch] = X[rows, cx] * K^T, with K viewed as [patch, cx]
        S::gemm(
            geom.rows(),
            cx,
            patch,
            S::one(),
            x.data(),
            cx as isize,
            1,
            k.data(),
            1,
            cx as isize,
            S::zero(),
            &mut cols,
            patch as isize,
            1,
        );
        let mut out = vec![S::zero(); n * out_hw.0 * out_hw.1 * cy];
        col2im(&cols, &geom, &mut out);
        let value = Tensor::new(&geom.input_shape(), out)?;
        let rg = self.rg(&[input, kernel]);
        self.push(value, Op::ConvTranspose2d { input, kernel, geom }, rg, "conv_transpose2d")
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let av = self.value(a);
        let bv = self.value(b);
        let (&[m, k], &[k2, n]) = (av.shape(), bv.shape()) else {
            return Err(Error::dim(format!(
                "matmul needs 2-D operands, got {:?} and {:?}",
                av.shape(),
                bv.shape()
            )));
        };
        if k != k2 {
            return Err(Error::dim(format!("matmul inner dimensions {k} and {k2} differ")));
        }
        let mut out = vec![S::zero(); m * n];
        S::gemm(m, k, n, S::one(), av.data(), k as isize, 1, bv.data(), n as isize, 1, S::zero(), &mut out, n as isize, 1);
        let value = Tensor::new(&[m, n], out)?;
        let rg = self.rg(&[a, b]);
        self.push(value, Op::MatMul { a, b }, rg, "matmul")
    }

    /// Adds `bias` (length = last dimension) to every row.
    pub fn add_bias(&mut self, input: Var, bias: Var) -> Result<Var> {
        let x = self.value(input);
        let b = self.value(bias);
        let c = *x.shape().last().unwrap_or(&0);
        if b.len() != c {
            return Err(Error::dim(format!("bias of length {} for last dimension {c}", b.len())));
        }
        let mut out = x.data().to_vec();
        for row in out.chunks_exact_mut(c) {
            for (o, &bb) in row.iter_mut().zip(b.data()) {
                *o += bb;
            }
        }
        let value = Tensor::new(x.shape(), out)?;
        let rg = self.rg(&[input, bias]);
        self.push(value, Op::AddBias { input, bias }, rg, "add_bias")
    }

    /// Affine map `x·W + b` with `W` stored as `[in, out]`.
    pub fn dense(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let y = self.matmul(input, weights)?;
        self.add_bias(y, bias)
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        let value = self.value(input).map(|v| if v > S::zero() { v } else { S::zero() });
        let rg = self.rg(&[input]);
        self.push(value, Op::Relu { input }, rg, "relu")
    }

    /// Elementwise `1 / (1 + exp(-x / T))`.
    pub fn sigmoid(&mut self, input: Var, t: Temperature) -> Result<Var> {
        let t = S::from_f64_lossy(t.get());
        let value = self.value(input).map(|v| sigmoid_scalar(v, t));
        let rg = self.rg(&[input]);
        self.push(value, Op::Sigmoid { input, t }, rg, "sigmoid")
    }

    /// Softmax of `logits / T` along the last dimension.
    pub fn softmax(&mut self, input: Var, t: Temperature) -> Result<Var> {
        let x = self.value(input);
        let c = *x.shape().last().unwrap_or(&0);
        if x.is_empty() || c == 0 {
            return Err(Error::dim("softmax of an empty tensor"));
        }
        let tt = S::from_f64_lossy(t.get());
        let mut out = x.data().to_vec();
        for row in out.chunks_exact_mut(c) {
            let max = row.iter().copied().fold(S::neg_infinity(), S::max);
            let mut total = S::zero();
            for v in row.iter_mut() {
                *v = ((*v - max) / tt).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v = *v / total;
            }
        }
        let value = Tensor::new(x.shape(), out)?;
        let rg = self.rg(&[input]);
        self.push(value, Op::Softmax { input, t: tt }, rg, "softmax")
    }

    pub fn exp(&mut self, input: Var) -> Result<Var> {
        let value = self.value(input).map(|v| v.exp());
        let rg = self.rg(&[input]);
        self.push(value, Op::Exp { input }, rg, "exp")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "add")?;
        let av = self.value(a);
        let data = av.data().iter().zip(self.value(b).data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::new(av.shape(), data)?;
        let rg = self.rg(&[a, b]);
        self.push(value, Op::Add { a, b }, rg, "add")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "mul")?;
        let av = self.value(a);
        let data = av.data().iter().zip(self.value(b).data()).map(|(&x, &y)| x * y).collect();
        let value = Tensor::new(av.shape(), data)?;
        let rg = self.rg(&[a, b]);
        self.push(value, Op::Mul { a, b }, rg, "mul")
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Result<Var> {
        let factor = S::from_f64_lossy(factor);
        let value = self.value(input).map(|v| v * factor);
        let rg = self.rg(&[input]);
        self.push(value, Op::Scale { input, factor }, rg, "scale")
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).clone().reshape(shape)?;
        let rg = self.rg(&[input]);
        self.push(value, Op::Reshape { input }, rg, "reshape")
    }

    /// Columns `start..start+len` of a `[rows, cols]` tensor.
    pub fn slice_cols(&mut self, input: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(input);
        let &[rows, cols] = x.shape() else {
            return Err(Error::dim(format!("slice_cols needs a 2-D tensor, got {:?}", x.shape())));
        };
        if len == 0 || start + len > cols {
            return Err(Error::dim(format!("columns {start}..{} out of range for {cols}", start + len)));
        }
        let mut data = Vec::with_capacity(rows * len);
        for row in x.data().chunks_exact(cols) {
            data.extend_from_slice(&row[start..start + len]);
        }
        let value = Tensor::new(&[rows, len], data)?;
        let rg = self.rg(&[input]);
        self.push(value, Op::SliceCols { input, start }, rg, "slice_cols")
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(input).sum());
        let rg = self.rg(&[input]);
        self.push(value, Op::Sum { input }, rg, "sum")
    }

    pub fn mean(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let value = Tensor::scalar(x.sum() / S::from_usize(x.len()).unwrap());
        let rg = self.rg(&[input]);
        self.push(value, Op::Mean { input }, rg, "mean")
    }

    /// Binary cross-entropy of probabilities against `{0,1}` targets, one
    /// value per sample. Probabilities are clamped to `[1e-7, 1 - 1e-7]`.
    pub fn bce_per_sample(&mut self, pred: Var, target: &Tensor<S>) -> Result<Var> {
        let p = self.value(pred);
        same_shape(p, target, "bce")?;
        check_binary(target, "bce")?;
        let (batch, per) = sample_layout(p.shape());
        let batch = if p.rank() == 1 { p.len() } else { batch };
        let per = if p.rank() == 1 { 1 } else { per };
        let mut out = vec![S::zero(); batch];
        for (i, o) in out.iter_mut().enumerate() {
            for j in i * per..(i + 1) * per {
                let pc = clamp_prob(p.data()[j]);
                let y = target.data()[j];
                *o -= y * pc.ln() + (S::one() - y) * (S::one() - pc).ln();
            }
            *o = *o / S::from_usize(per).unwrap();
        }
        let value = Tensor::new(&[batch], out)?;
        let rg = self.rg(&[pred]);
        let op = Op::Bce { pred, target: target.data().to_vec(), per_sample: per };
        self.push(value, op, rg, "bce")
    }

    /// Mean binary cross-entropy over every prediction.
    pub fn bce(&mut self, pred: Var, target: &Tensor<S>) -> Result<Var> {
        let per = self.bce_per_sample(pred, target)?;
        self.mean(per)
    }

    /// Binary cross-entropy of `sigmoid(logits / T)` computed from the
    /// logits, one value per sample.
    ///
    /// The forward value equals `bce_per_sample(sigmoid(logits, T))`
    /// including the clamp; the gradient is the exact derivative of the
    /// unclamped loss, `(sigmoid - y) / T`, so saturated wrong predictions
    /// still receive signal.
    pub fn sigmoid_bce_per_sample(&mut self, logits: Var, target: &Tensor<S>, t: Temperature) -> Result<Var> {
        let z = self.value(logits);
        if z.len() != target.len() || z.len() != z.batch() {
            return Err(Error::dim(format!(
                "sigmoid_bce expects one logit per sample, got {:?} for {} targets",
                z.shape(),
                target.len()
            )));
        }
        check_binary(target, "bce")?;
        let tt = S::from_f64_lossy(t.get());
        let out = z
            .data()
            .iter()
            .zip(target.data())
            .map(|(&zi, &y)| {
                let pc = clamp_prob(sigmoid_scalar(zi, tt));
                -(y * pc.ln() + (S::one() - y) * (S::one() - pc).ln())
            })
            .collect();
        let value = Tensor::new(&[z.len()], out)?;
        let rg = self.rg(&[logits]);
        let op = Op::SigmoidBce { logits, target: target.data().to_vec(), t: tt };
        self.push(value, op, rg, "sigmoid_bce")
    }

    /// `sum |x - y|` per sample.
    pub fn l1_per_sample(&mut self, x: Var, y: Var) -> Result<Var> {
        let xv = self.value(x);
        let yv = self.value(y);
        same_shape(xv, yv, "l1")?;
        let (batch, per) = sample_layout(xv.shape());
        let out = xv
            .data()
            .chunks_exact(per)
            .zip(yv.data().chunks_exact(per))
            .map(|(a, b)| a.iter().zip(b).map(|(&p, &q)| (p - q).abs()).sum())
            .collect();
        let value = Tensor::new(&[batch], out)?;
        let rg = self.rg(&[x, y]);
        self.push(value, Op::L1 { x, y, per_sample: per }, rg, "l1")
    }

    /// Sum of absolute differences, averaged over the batch.
    pub fn l1(&mut self, x: Var, y: Var) -> Result<Var> {
        let per = self.l1_per_sample(x, y)?;
        self.mean(per)
    }

    /// KL divergence of `N(mu, exp(log_var))` from the unit Gaussian, per
    /// sample: `0.5 * sum(exp(lv) + mu^2 - 1 - lv)`.
    pub fn kl_per_sample(&mut self, mu: Var, log_var: Var) -> Result<Var> {
        let m = self.value(mu);
        let lv = self.value(log_var);
        if m.shape() != lv.shape() {
            return Err(Error::dim(format!(
                "kl: mu {:?} and log_var {:?} differ",
                m.shape(),
                lv.shape()
            )));
        }
        let (batch, per) = sample_layout(m.shape());
        let half = S::from_f64_lossy(0.5);
        let out = m
            .data()
            .chunks_exact(per)
            .zip(lv.data().chunks_exact(per))
            .map(|(a, b)| {
                a.iter().zip(b).map(|(&mu, &lv)| half * (lv.exp() + mu * mu - S::one() - lv)).sum()
            })
            .collect();
        let value = Tensor::new(&[batch], out)?;
        let rg = self.rg(&[mu, log_var]);
        self.push(value, Op::Kl { mu, log_var, per_sample: per }, rg, "kl")
    }

    pub fn kl(&mut self, mu: Var, log_var: Var) -> Result<Var> {
        let per = self.kl_per_sample(mu, log_var)?;
        self.mean(per)
    }

    /// Back-propagates from a scalar `loss`. Leaf gradients accumulate
    /// across calls until [`Graph::zero_grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<S>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![S::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            if let Op::Leaf = self.nodes[i].op {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric("backward produced a non-finite gradient".into()));
                }
                let node = &mut self.nodes[i];
                match &mut node.grad {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a += b),
                    None => node.grad = Some(g),
                }
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[S], grads: &mut [Option<Vec<S>>]) {
        let node = &self.nodes[i];
        let nodes = &self.nodes;
        let wants = |v: Var| nodes[v.0].requires_grad;
        macro_rules! acc {
            ($v:expr) => {
                grad_slot(&mut *grads, nodes, $v)
            };
        }
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { input, kernel, geom, cols } => {
                let (rows, patch, oc) = (geom.rows(), geom.patch_len(), geom.out_c);
                if wants(*kernel) {
                    // dK[patch, oc] += cols^T * dY
                    let dk = acc!(*kernel);
                    S::gemm(patch, rows, oc, S::one(), cols, 1, patch as isize, g, oc as isize, 1, S::one(), dk, oc as isize, 1);
                }
                if wants(*input) {
                    let k = nodes[kernel.0].value.data();
                    let mut dcols = vec![S::zero(); rows * patch];
                    S::gemm(rows, oc, patch, S::one(), g, oc as isize, 1, k, 1, oc as isize, S::zero(), &mut dcols, patch as isize, 1);
                    col2im(&dcols, geom, acc!(*input));
                }
            }
            Op::ConvTranspose2d { input, kernel, geom } => {
                let (rows, patch, cx) = (geom.rows(), geom.patch_len(), geom.out_c);
                let dcols = im2col(g, geom);
                if wants(*kernel) {
                    // dK[patch, cx] += dcols^T * X
                    let x = nodes[input.0].value.data();
                    let dk = acc!(*kernel);
                    S::gemm(patch, rows, cx, S::one(), &dcols, 1, patch as isize, x, cx as isize, 1, S::one(), dk, cx as isize, 1);
                }
                if wants(*input) {
                    let k = nodes[kernel.0].value.data();
                    let dx = acc!(*input);
                    S::gemm(rows, patch, cx, S::one(), &dcols, patch as isize, 1, k, cx as isize, 1, S::one(), dx, cx as isize, 1);
                }
            }
            Op::MatMul { a, b } => {
                let av = &nodes[a.0].value;
                let bv = &nodes[b.0].value;
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if wants(*a) {
                    let da = acc!(*a);
                    S::gemm(m, n, k, S::one(), g, n as isize, 1, bv.data(), 1, n as isize, S::one(), da, k as isize, 1);
                }
                if wants(*b) {
                    let db = acc!(*b);
                    S::gemm(k, m, n, S::one(), av.data(), 1, k as isize, g, n as isize, 1, S::one(), db, n as isize, 1);
                }
            }
            Op::AddBias { input, bias } => {
                if wants(*input) {
                    acc!(*input).iter_mut().zip(g).for_each(|(d, &v)| *d += v);
                }
                if wants(*bias) {
                    let db = acc!(*bias);
                    let c = db.len();
                    for row in g.chunks_exact(c) {
                        db.iter_mut().zip(row).for_each(|(d, &v)| *d += v);
                    }
                }
            }
            Op::Relu { input } => {
                let x = nodes[input.0].value.data();
                acc!(*input).iter_mut().zip(g).zip(x).for_each(|((d, &gv), &xv)| {
                    if xv > S::zero() {
                        *d += gv;
                    }
                });
            }
            Op::Sigmoid { input, t } => {
                let y = node.value.data();
                acc!(*input)
                    .iter_mut()
                    .zip(g)
                    .zip(y)
                    .for_each(|((d, &gv), &yv)| *d += gv * yv * (S::one() - yv) / *t);
            }
            Op::Softmax { input, t } => {
                let y = node.value.data();
                let c = *node.value.shape().last().unwrap();
                let dx = acc!(*input);
                for ((drow, grow), yrow) in dx.chunks_exact_mut(c).zip(g.chunks_exact(c)).zip(y.chunks_exact(c)) {
                    let dot: S = grow.iter().zip(yrow).map(|(&a, &b)| a * b).sum();
                    for ((d, &gv), &yv) in drow.iter_mut().zip(grow).zip(yrow) {
                        *d += yv * (gv - dot) / *t;
                    }
                }
            }
            Op::Exp { input } => {
                let y = node.value.data();
                acc!(*input).iter_mut().zip(g).zip(y).for_each(|((d, &gv), &yv)| *d += gv * yv);
            }
            Op::Add { a, b } => {
                for v in [*a, *b] {
                    if wants(v) {
                        acc!(v).iter_mut().zip(g).for_each(|(d, &gv)| *d += gv);
                    }
                }
            }
            Op::Mul { a, b } => {
                if wants(*a) {
                    let bv = nodes[b.0].value.data();
                    acc!(*a).iter_mut().zip(g).zip(bv).for_each(|((d, &gv), &o)| *d += gv * o);
                }
                if wants(*b) {
                    let av = nodes[a.0].value.data();
                    acc!(*b).iter_mut().zip(g).zip(av).for_each(|((d, &gv), &o)| *d += gv * o);
                }
            }
            Op::Scale { input, factor } => {
                acc!(*input).iter_mut().zip(g).for_each(|(d, &gv)| *d += gv * *factor);
            }
            Op::Reshape { input } => {
                acc!(*input).iter_mut().zip(g).for_each(|(d, &gv)| *d += gv);
            }
            Op::SliceCols { input, start } => {
                let cols = nodes[input.0].value.shape()[1];
                let len = node.value.shape()[1];
                let dx = acc!(*input);
                for (drow, grow) in dx.chunks_exact_mut(cols).zip(g.chunks_exact(len)) {
                    drow[*start..start + len].iter_mut().zip(grow).for_each(|(d, &gv)| *d += gv);
                }
            }
            Op::Sum { input } => {
                acc!(*input).iter_mut().for_each(|d| *d += g[0]);
            }
            Op::Mean { input } => {
                let n = S::from_usize(nodes[input.0].value.len()).unwrap();
                acc!(*input).iter_mut().for_each(|d| *d += g[0] / n);
            }
            Op::Bce { pred, target, per_sample } => {
                let p = nodes[pred.0].value.data();
                let per = S::from_usize(*per_sample).unwrap();
                let dp = acc!(*pred);
                for (j, d) in dp.iter_mut().enumerate() {
                    let pc = clamp_prob(p[j]);
                    let y = target[j];
                    *d += g[j / per_sample] * (pc - y) / (pc * (S::one() - pc)) / per;
                }
            }
            Op::SigmoidBce { logits, target, t } => {
                let z = nodes[logits.0].value.data();
                acc!(*logits).iter_mut().enumerate().for_each(|(j, d)| {
                    *d += g[j] * (sigmoid_scalar(z[j], *t) - target[j]) / *t;
                });
            }
            Op::L1 { x, y, per_sample } => {
                let xv = nodes[x.0].value.data();
                let yv = nodes[y.0].value.data();
                let sign = |j: usize| {
                    let diff = xv[j] - yv[j];
                    if diff > S::zero() {
                        S::one()
                    } else if diff < S::zero() {
                        -S::one()
                    } else {
                        S::zero()
                    }
                };
                if wants(*x) {
                    acc!(*x).iter_mut().enumerate().for_each(|(j, d)| *d += g[j / per_sample] * sign(j));
                }
                if wants(*y) {
                    acc!(*y).iter_mut().enumerate().for_each(|(j, d)| *d -= g[j / per_sample] * sign(j));
                }
            }
            Op::Kl { mu, log_var, per_sample } => {
                if wants(*mu) {
                    let m = nodes[mu.0].value.data();
                    acc!(*mu).iter_mut().enumerate().for_each(|(j, d)| *d += g[j / per_sample] * m[j]);
                }
                if wants(*log_var) {
                    let lv = nodes[log_var.0].value.data();
                    let half = S::from_f64_lossy(0.5);
                    acc!(*log_var)
                        .iter_mut()
                        .enumerate()
                        .for_each(|(j, d)| *d += g[j / per_sample] * half * (lv[j].exp() - S::one()));
                }
            }
        }
    }
}
