use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classifier::model::{check_input, conv_trunk, init_trunk, trunk_names, trunk_shapes};
use crate::classifier::CnnArchitecture;
use crate::error::{Error, Result};
use crate::nn::{init, Graph, Scalar, Temperature, Tensor, Var};

/// Which samples the VAE term applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VaeMask {
    /// Every sample (indicator 1 throughout).
    All,
    /// Only samples of this class.
    Class(u8),
    /// No sample; the model reduces to a classifier.
    None,
}

impl VaeMask {
    pub fn indicator(self, label: u8) -> f64 {
        match self {
            VaeMask::All => 1.0,
            VaeMask::Class(c) => f64::from(u8::from(c == label)),
            VaeMask::None => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeConfig {
    pub latent_dim: usize,
    pub kl_coefficient: f64,
    pub histogram_bins: usize,
    pub smoothing_alpha: f64,
    /// Draw batches by latent-density weights; off means a plain shuffle.
    pub resample: bool,
    pub vae_mask: VaeMask,
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self {
            latent_dim: 100,
            kl_coefficient: 0.0005,
            histogram_bins: 10,
            smoothing_alpha: 0.001,
            resample: true,
            vae_mask: VaeMask::All,
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::config("latent_dim must be at least 1"));
        }
        if !(self.kl_coefficient >= 0.0 && self.kl_coefficient.is_finite()) {
            return Err(Error::config(format!("kl_coefficient must be non-negative, got {}", self.kl_coefficient)));
        }
        if self.histogram_bins < 2 {
            return Err(Error::config("histogram_bins must be at least 2"));
        }
        if !(self.smoothing_alpha > 0.0 && self.smoothing_alpha.is_finite()) {
            return Err(Error::config("smoothing_alpha must be positive"));
        }
        if let VaeMask::Class(c) = self.vae_mask {
            if c > 1 {
                return Err(Error::config("vae_mask class must be 0 or 1"));
            }
        }
        Ok(())
    }
}

/// Graph handles of one encoder pass.
#[derive(Clone, Copy, Debug)]
pub struct EncoderVars {
    pub z_o: Var,
    pub mu: Var,
    pub log_var: Var,
}

/// Encoder output for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderOutput {
    pub z_o: f64,
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
}

/// Debiasing VAE. The encoder is the classifier trunk plus a hidden dense
/// layer and a `2k + 1` output (`z_o`, then `mu`, then `log_var`). The
/// decoder mirrors the trunk with transposed convolutions.
///
/// Parameter order: trunk (kernel, bias per stage), encoder hidden and
/// output (weight, bias), decoder dense (weight, bias), then one
/// (kernel, bias) per transposed stage from the deepest stage outwards.
#[derive(Clone, Debug, PartialEq)]
pub struct DbVae<S> {
    pub arch: CnnArchitecture,
    pub latent_dim: usize,
    pub params: Vec<Tensor<S>>,
}

/// `(out_channels, kernel, stride, out_size)` of each decoder stage.
fn decoder_stages(arch: &CnnArchitecture) -> Vec<(usize, usize, usize, usize)> {
    let sizes = arch.spatial_sizes();
    (0..arch.stages.len())
        .rev()
        .map(|i| {
            let out_c = if i == 0 { arch.input_channels } else { arch.stages[i - 1].filters };
            let out_size = if i == 0 { arch.input_size } else { sizes[i - 1] };
            (out_c, arch.stages[i].kernel, arch.stages[i].stride, out_size)
        })
        .collect()
}

impl<S: Scalar> DbVae<S> {
    pub fn build(arch: CnnArchitecture, latent_dim: usize, seed: u64) -> Result<Self> {
        arch.validate()?;
        if latent_dim == 0 {
            return Err(Error::config("latent_dim must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = init_trunk(&arch, &mut rng);
        let flat = arch.flatten_size();
        params.push(init::dense_weights(&mut rng, flat, arch.hidden_dense));
        params.push(Tensor::zeros(&[arch.hidden_dense]));
        params.push(init::dense_weights(&mut rng, arch.hidden_dense, 2 * latent_dim + 1));
        params.push(Tensor::zeros(&[2 * latent_dim + 1]));
        params.push(init::dense_weights(&mut rng, latent_dim, flat));
        params.push(Tensor::zeros(&[flat]));
        let mut cin = arch.final_channels();
        for (out_c, k, _, _) in decoder_stages(&arch) {
            params.push(init::conv_kernel(&mut rng, k, k, out_c, cin));
            params.push(Tensor::zeros(&[out_c]));
            cin = out_c;
        }
        Ok(Self { arch, latent_dim, params })
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = trunk_names(&self.arch);
        names.extend(["enc.dense.weight", "enc.dense.bias", "enc.out.weight", "enc.out.bias"].map(String::from));
        names.extend(["dec.dense.weight", "dec.dense.bias"].map(String::from));
        for i in 0..self.arch.stages.len() {
            names.push(format!("dec.deconv{i}.kernel"));
            names.push(format!("dec.deconv{i}.bias"));
        }
        names
    }

    pub fn param_shapes(arch: &CnnArchitecture, latent_dim: usize) -> Vec<Vec<usize>> {
        let flat = arch.flatten_size();
        let mut shapes = trunk_shapes(arch);
        shapes.extend([
            vec![flat, arch.hidden_dense],
            vec![arch.hidden_dense],
            vec![arch.hidden_dense, 2 * latent_dim + 1],
            vec![2 * latent_dim + 1],
            vec![latent_dim, flat],
            vec![flat],
        ]);
        let mut cin = arch.final_channels();
        for (out_c, k, _, _) in decoder_stages(arch) {
            shapes.push(vec![k, k, out_c, cin]);
            shapes.push(vec![out_c]);
            cin = out_c;
        }
        shapes
    }

    pub fn from_params(arch: CnnArchitecture, latent_dim: usize, params: Vec<Tensor<S>>) -> Result<Self> {
        arch.validate()?;
        let shapes = Self::param_shapes(&arch, latent_dim);
        if shapes.len() != params.len() {
            return Err(Error::Checkpoint(format!("db-vae needs {} tensors, got {}", shapes.len(), params.len())));
        }
        for (i, (want, p)) in shapes.iter().zip(&params).enumerate() {
            if want.as_slice() != p.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {i}: architecture expects shape {want:?}, found {:?}",
                    p.shape()
                )));
            }
        }
        Ok(Self { arch, latent_dim, params })
    }

    fn encoder_len(&self) -> usize {
        2 * self.arch.stages.len() + 4
    }

    pub fn param_vars(&self, g: &mut Graph<S>) -> Result<Vec<Var>> {
        self.params.iter().map(|p| g.param(p.clone())).collect()
    }

    pub fn constant_vars(&self, g: &mut Graph<S>) -> Result<Vec<Var>> {
        self.params.iter().map(|p| g.constant(p.clone())).collect()
    }

    pub fn encode(&self, g: &mut Graph<S>, params: &[Var], images: Var) -> Result<EncoderVars> {
        check_input(&self.arch, g.value(images))?;
        let t = 2 * self.arch.stages.len();
        let flat = conv_trunk(g, &self.arch, params, images)?;
        let h = g.dense(flat, params[t], params[t + 1])?;
        let h = g.relu(h)?;
        let out = g.dense(h, params[t + 2], params[t + 3])?;
        let k = self.latent_dim;
        Ok(EncoderVars { z_o: g.slice_cols(out, 0, 1)?, mu: g.slice_cols(out, 1, k)?, log_var: g.slice_cols(out, 1 + k, k)? })
    }

    /// Reconstruction in `[0, 1]` of shape `[n, size, size, channels]`.
    pub fn decode(&self, g: &mut Graph<S>, params: &[Var], z: Var) -> Result<Var> {
        let zv = g.value(z);
        if zv.rank() != 2 || zv.shape()[1] != self.latent_dim {
            return Err(Error::dim(format!("decoder expects [n, {}], got {:?}", self.latent_dim, zv.shape())));
        }
        let n = zv.shape()[0];
        let e = self.encoder_len();
        let s = self.arch.final_spatial();
        let h = g.dense(z, params[e], params[e + 1])?;
        let h = g.relu(h)?;
        let mut x = g.reshape(h, &[n, s, s, self.arch.final_channels()])?;
        let stages = decoder_stages(&self.arch);
        for (i, &(_, _, stride, size)) in stages.iter().enumerate() {
            let y = g.conv_transpose2d(x, params[e + 2 + 2 * i], stride, (size, size))?;
            let y = g.add_bias(y, params[e + 3 + 2 * i])?;
            x = if i + 1 == stages.len() { g.sigmoid(y, Temperature::TRAINING)? } else { g.relu(y)? };
        }
        Ok(x)
    }

    /// Deterministic encoder outputs for an `[n, h, w, c]` batch.
    pub fn encode_batch(&self, images: &Tensor<S>) -> Result<Vec<EncoderOutput>> {
        let mut g = Graph::new();
        let params = self.constant_vars(&mut g)?;
        let x = g.constant(images.clone())?;
        let enc = self.encode(&mut g, &params, x)?;
        let k = self.latent_dim;
        let f = |v: Var, g: &Graph<S>| g.value(v).data().iter().map(|x| x.to_f64_lossy()).collect::<Vec<f64>>();
        let (zo, mu, lv) = (f(enc.z_o, &g), f(enc.mu, &g), f(enc.log_var, &g));
        Ok((0..zo.len())
            .map(|i| EncoderOutput {
                z_o: zo[i],
                mu: mu[i * k..(i + 1) * k].to_vec(),
                log_var: lv[i * k..(i + 1) * k].to_vec(),
            })
            .collect())
    }

    pub fn cast<T: Scalar>(&self) -> DbVae<T> {
        DbVae { arch: self.arch.clone(), latent_dim: self.latent_dim, params: self.params.iter().map(Tensor::cast).collect() }
    }
}

/// `z = mu + exp(log_var / 2) * eps`.
pub fn reparameterize(mu: &[f64], log_var: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    if mu.len() != log_var.len() || mu.len() != eps.len() {
        return Err(Error::dim(format!(
            "reparameterize: lengths {}, {}, {} differ",
            mu.len(),
            log_var.len(),
            eps.len()
        )));
    }
    Ok(mu.iter().zip(log_var).zip(eps).map(|((&m, &lv), &e)| m + (0.5 * lv).exp() * e).collect())
}

pub fn standard_normal<S: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<S> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| S::from_f64_lossy(StandardNormal.sample(rng))).collect();
    Tensor::new(shape, data).expect("shape and data agree")
}

/// Graph form of [`reparameterize`] with a fixed noise tensor.
pub fn reparameterize_var<S: Scalar>(g: &mut Graph<S>, mu: Var, log_var: Var, eps: Tensor<S>) -> Result<Var> {
    let half = g.scale(log_var, 0.5)?;
    let std = g.exp(half)?;
    let e = g.constant(eps)?;
    let noise = g.mul(std, e)?;
    g.add(mu, noise)
}

/// Per-sample VAE loss `c * KL + L1`, shape `[n]`.
pub fn vae_loss_per_sample<S: Scalar>(g: &mut Graph<S>, x: Var, x_hat: Var, mu: Var, log_var: Var, c: f64) -> Result<Var> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::config(format!("kl coefficient must be non-negative, got {c}")));
    }
    let kl = g.kl_per_sample(mu, log_var)?;
    let kl = g.scale(kl, c)?;
    let rec = g.l1_per_sample(x, x_hat)?;
    g.add(kl, rec)
}

/// Batch mean of [`vae_loss_per_sample`].
pub fn vae_loss<S: Scalar>(g: &mut Graph<S>, x: Var, x_hat: Var, mu: Var, log_var: Var, c: f64) -> Result<Var> {
    let per = vae_loss_per_sample(g, x, x_hat, mu, log_var, c)?;
    g.mean(per)
}

/// Scalar form of the VAE objective for given loss terms.
pub fn vae_objective(kl: f64, reconstruction: f64, c: f64) -> Result<f64> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::config(format!("kl coefficient must be non-negative, got {c}")));
    }
    Ok(c * kl + reconstruction)
}

/// Batch mean of `L_y + indicator * L_VAE`, where `class_loss` and
/// `vae_terms` are per-sample `[n]` and `indicator` holds 0 or 1 per sample.
pub fn dbvae_total_loss<S: Scalar>(g: &mut Graph<S>, class_loss: Var, vae_terms: Var, indicator: &[f64]) -> Result<Var> {
    if let Some(bad) = indicator.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::Domain(format!("indicator must be 0 or 1, got {bad}")));
    }
    if indicator.len() != g.value(vae_terms).len() {
        return Err(Error::dim("one indicator per sample is required"));
    }
    let mask = g.constant(Tensor::from_f64(&[indicator.len()], indicator)?)?;
    let masked = g.mul(vae_terms, mask)?;
    let total = g.add(class_loss, masked)?;
    g.mean(total)
}
