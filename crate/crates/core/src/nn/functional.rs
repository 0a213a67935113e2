//! Tensor-in, tensor-out wrappers around the graph ops for callers that do
//! not need gradients.

use crate::error::Result;
use crate::nn::graph::Graph;
use crate::nn::{Padding, Scalar, Temperature, Tensor};

fn unary<S: Scalar>(
    x: &Tensor<S>,
    f: impl FnOnce(&mut Graph<S>, crate::nn::Var) -> Result<crate::nn::Var>,
) -> Result<Tensor<S>> {
    let mut g = Graph::new();
    let v = g.constant(x.clone())?;
    let out = f(&mut g, v)?;
    Ok(g.value(out).clone())
}

fn binary<S: Scalar>(
    a: &Tensor<S>,
    b: &Tensor<S>,
    f: impl FnOnce(&mut Graph<S>, crate::nn::Var, crate::nn::Var) -> Result<crate::nn::Var>,
) -> Result<Tensor<S>> {
    let mut g = Graph::new();
    let va = g.constant(a.clone())?;
    let vb = g.constant(b.clone())?;
    let out = f(&mut g, va, vb)?;
    Ok(g.value(out).clone())
}

pub fn conv2d<S: Scalar>(input: &Tensor<S>, kernels: &Tensor<S>, stride: usize, padding: Padding) -> Result<Tensor<S>> {
    binary(input, kernels, |g, x, k| g.conv2d(x, k, stride, padding))
}

pub fn dense<S: Scalar>(input: &Tensor<S>, weights: &Tensor<S>, bias: &Tensor<S>) -> Result<Tensor<S>> {
    let mut g = Graph::new();
    let x = g.constant(input.clone())?;
    let w = g.constant(weights.clone())?;
    let b = g.constant(bias.clone())?;
    let out = g.dense(x, w, b)?;
    Ok(g.value(out).clone())
}

pub fn relu<S: Scalar>(x: &Tensor<S>) -> Result<Tensor<S>> {
    unary(x, |g, v| g.relu(v))
}

pub fn sigmoid_temperature<S: Scalar>(x: &Tensor<S>, t: Temperature) -> Result<Tensor<S>> {
    unary(x, |g, v| g.sigmoid(v, t))
}

pub fn softmax_temperature<S: Scalar>(logits: &Tensor<S>, t: Temperature) -> Result<Tensor<S>> {
    unary(logits, |g, v| g.softmax(v, t))
}

pub fn bce_loss<S: Scalar>(prediction: &Tensor<S>, target: &Tensor<S>) -> Result<S> {
    Ok(unary(prediction, |g, p| g.bce(p, target))?.item())
}

pub fn l1_loss<S: Scalar>(x: &Tensor<S>, x_hat: &Tensor<S>) -> Result<S> {
    Ok(binary(x, x_hat, |g, a, b| g.l1(a, b))?.item())
}

pub fn kl_unit_gaussian<S: Scalar>(mu: &Tensor<S>, log_var: &Tensor<S>) -> Result<S> {
    Ok(binary(mu, log_var, |g, m, lv| g.kl(m, lv))?.item())
}
