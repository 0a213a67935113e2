use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifier::arch::CnnArchitecture;
use crate::error::{Error, Result};
use crate::nn::graph::sigmoid_scalar;
use crate::nn::{init, Graph, Padding, Scalar, Temperature, Tensor, Var};

/// Binary CNN: parameters in layer order, each convolution as
/// (kernel, bias), then hidden (weight, bias) and output (weight, bias).
#[derive(Clone, Debug, PartialEq)]
pub struct Cnn<S> {
    pub arch: CnnArchitecture,
    pub params: Vec<Tensor<S>>,
}

/// Initialises convolution-trunk parameters (kernel, bias per stage).
pub(crate) fn init_trunk<S: Scalar>(arch: &CnnArchitecture, rng: &mut ChaCha8Rng) -> Vec<Tensor<S>> {
    let mut params = Vec::with_capacity(2 * arch.stages.len());
    let mut cin = arch.input_channels;
    for s in &arch.stages {
        params.push(init::conv_kernel(rng, s.kernel, s.kernel, cin, s.filters));
        params.push(Tensor::zeros(&[s.filters]));
        cin = s.filters;
    }
    params
}

pub(crate) fn trunk_names(arch: &CnnArchitecture) -> Vec<String> {
    (0..arch.stages.len()).flat_map(|i| [format!("conv{i}.kernel"), format!("conv{i}.bias")]).collect()
}

pub(crate) fn trunk_shapes(arch: &CnnArchitecture) -> Vec<Vec<usize>> {
    let mut cin = arch.input_channels;
    let mut shapes = Vec::new();
    for s in &arch.stages {
        shapes.push(vec![s.kernel, s.kernel, cin, s.filters]);
        shapes.push(vec![s.filters]);
        cin = s.filters;
    }
    shapes
}

/// Convolution stages with ReLU, flattened to `[n, flatten_size]`.
pub(crate) fn conv_trunk<S: Scalar>(
    g: &mut Graph<S>,
    arch: &CnnArchitecture,
    params: &[Var],
    images: Var,
) -> Result<Var> {
    let n = g.value(images).batch();
    let mut x = images;
    for (i, s) in arch.stages.iter().enumerate() {
        let y = g.conv2d(x, params[2 * i], s.stride, Padding::Same)?;
        let y = g.add_bias(y, params[2 * i + 1])?;
        x = g.relu(y)?;
    }
    g.reshape(x, &[n, arch.flatten_size()])
}

pub(crate) fn check_input<S: Scalar>(arch: &CnnArchitecture, images: &Tensor<S>) -> Result<()> {
    let want = [arch.input_size, arch.input_size, arch.input_channels];
    if images.rank() != 4 || images.shape()[1..] != want {
        return Err(Error::dim(format!(
            "expected a [n, {}, {}, {}] batch, got {:?}",
            want[0],
            want[1],
            want[2],
            images.shape()
        )));
    }
    Ok(())
}

impl<S: Scalar> Cnn<S> {
    /// Glorot-uniform weights and zero biases, deterministic per seed.
    pub fn build(arch: CnnArchitecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = init_trunk(&arch, &mut rng);
        params.push(init::dense_weights(&mut rng, arch.flatten_size(), arch.hidden_dense));
        params.push(Tensor::zeros(&[arch.hidden_dense]));
        params.push(init::dense_weights(&mut rng, arch.hidden_dense, 1));
        params.push(Tensor::zeros(&[1]));
        Ok(Self { arch, params })
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = trunk_names(&self.arch);
        names.extend(["dense.weight", "dense.bias", "out.weight", "out.bias"].map(String::from));
        names
    }

    pub fn param_shapes(arch: &CnnArchitecture) -> Vec<Vec<usize>> {
        let mut shapes = trunk_shapes(arch);
        shapes.push(vec![arch.flatten_size(), arch.hidden_dense]);
        shapes.push(vec![arch.hidden_dense]);
        shapes.push(vec![arch.hidden_dense, 1]);
        shapes.push(vec![1]);
        shapes
    }

    /// Wraps existing parameters after checking their shapes.
    pub fn from_params(arch: CnnArchitecture, params: Vec<Tensor<S>>) -> Result<Self> {
        arch.validate()?;
        let shapes = Self::param_shapes(&arch);
        if shapes.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "architecture needs {} tensors, got {}",
                shapes.len(),
                params.len()
            )));
        }
        for (i, (want, p)) in shapes.iter().zip(&params).enumerate() {
            if want.as_slice() != p.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {i}: architecture expects shape {want:?}, found {:?}",
                    p.shape()
                )));
            }
        }
        Ok(Self { arch, params })
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Registers the parameters as trainable leaves.
    pub fn param_vars(&self, g: &mut Graph<S>) -> Result<Vec<Var>> {
        self.params.iter().map(|p| g.param(p.clone())).collect()
    }

    /// Logits `[n, 1]` for an `[n, h, w, c]` batch.
    pub fn forward(&self, g: &mut Graph<S>, params: &[Var], images: Var) -> Result<Var> {
        check_input(&self.arch, g.value(images))?;
        let t = 2 * self.arch.stages.len();
        let flat = conv_trunk(g, &self.arch, params, images)?;
        let h = g.dense(flat, params[t], params[t + 1])?;
        let h = g.relu(h)?;
        g.dense(h, params[t + 2], params[t + 3])
    }

    /// Inference-only logits.
    pub fn logits(&self, images: &Tensor<S>) -> Result<Vec<S>> {
        let mut g = Graph::new();
        let params: Vec<Var> = self.params.iter().map(|p| g.constant(p.clone())).collect::<Result<_>>()?;
        let x = g.constant(images.clone())?;
        let z = self.forward(&mut g, &params, x)?;
        Ok(g.value(z).data().to_vec())
    }

    /// Sigmoid scores at temperature `t`, evaluated in double precision.
    pub fn scores(&self, images: &Tensor<S>, t: Temperature) -> Result<Vec<f64>> {
        Ok(self.logits(images)?.into_iter().map(|z| sigmoid_scalar(z.to_f64_lossy(), t.get())).collect())
    }

    pub fn cast<T: Scalar>(&self) -> Cnn<T> {
        Cnn { arch: self.arch.clone(), params: self.params.iter().map(Tensor::cast).collect() }
    }
}
