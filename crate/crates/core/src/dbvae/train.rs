use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::early_stop::EarlyStopping;
use crate::classifier::predict::{Predictions, SampleFailure, SampleScore};
use crate::classifier::train::{require_both_classes, stack_images, with_context};
use crate::classifier::{Checkpoint, EpochStats, ImageSet, ModelKind, TrainConfig};
use crate::data::{load_images, DatasetManifest};
use crate::dbvae::latent::{update_latent_histograms, LatentStats};
use crate::dbvae::model::{dbvae_total_loss, reparameterize_var, standard_normal, vae_loss_per_sample, DbVae, VaeConfig};
use crate::error::{Error, Result};
use crate::nn::graph::sigmoid_scalar;
use crate::nn::{AdamState, Graph, Temperature, Tensor};

/// One epoch of DB-VAE training: the classifier-style statistics, the
/// epoch means of each loss term, and the latent statistics that drove the
/// epoch's sampling (absent when resampling is off).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DbVaeEpoch {
    pub stats: EpochStats,
    pub class_loss: f64,
    pub reconstruction: f64,
    pub kl: f64,
    pub latent: Option<LatentStats>,
}

const ENCODE_BATCH: usize = 64;

/// Encoder means of every image, in order.
pub fn encode_means(model: &DbVae<f32>, images: &[Tensor<f32>]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(ENCODE_BATCH) {
        out.extend(model.encode_batch(&stack_images(chunk.iter()))?.into_iter().map(|e| e.mu));
    }
    Ok(out)
}

/// Class scores `sigmoid(z_o / t)`; no sampling.
pub fn score_images_dbvae(model: &DbVae<f32>, images: &[Tensor<f32>], t: Temperature, batch: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(batch.max(1)) {
        out.extend(model.encode_batch(&stack_images(chunk.iter()))?.into_iter().map(|e| sigmoid_scalar(e.z_o, t.get())));
    }
    Ok(out)
}

fn batch_order(n: usize, latent: Option<&LatentStats>, rng: &mut ChaCha8Rng, order: &mut Vec<usize>) -> Result<()> {
    match latent {
        Some(stats) => {
            let dist = WeightedIndex::new(&stats.probabilities)
                .map_err(|e| Error::Numeric(format!("resampling weights: {e}")))?;
            *order = (0..n).map(|_| dist.sample(rng)).collect();
        }
        None => {
            order.clear();
            order.extend(0..n);
            order.shuffle(rng);
        }
    }
    Ok(())
}

/// Per epoch: rebuild the latent histograms from the current encoder, draw
/// a full epoch of indices with replacement by those probabilities, and
/// minimise the batch mean of `L_y + I * (c * KL + L1)` with Adam. With
/// resampling off the epoch order is the same seeded shuffle the classifier
/// uses. Early stopping follows the classifier's training-accuracy rule.
pub fn train_dbvae_on_set(
    model: &mut DbVae<f32>,
    train: &ImageSet,
    val: Option<&ImageSet>,
    vae: &VaeConfig,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&DbVaeEpoch),
) -> Result<Vec<DbVaeEpoch>> {
    cfg.validate()?;
    vae.validate()?;
    require_both_classes(&train.labels)?;
    let n = train.len();
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order_rng.set_stream(1);
    let mut eps_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    eps_rng.set_stream(2);
    let mut adam = AdamState::new(cfg.adam, &model.params);
    let mut stopper = EarlyStopping::new(cfg.early_stop_patience);
    let mut history = Vec::new();
    let mut order = Vec::with_capacity(n);
    let k = model.latent_dim;
    for epoch in 1..=cfg.max_epochs {
        let latent = if vae.resample {
            let mu = encode_means(model, &train.images).map_err(|e| with_context(e, &format!("epoch {epoch} encoding")))?;
            Some(update_latent_histograms(&mu, vae.histogram_bins, vae.smoothing_alpha)?)
        } else {
            None
        };
        batch_order(n, latent.as_ref(), &mut order_rng, &mut order)?;
        let (mut total, mut class, mut rec, mut kl, mut correct) = (0.0, 0.0, 0.0, 0.0, 0);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut g = Graph::new();
            let eps = standard_normal::<f32>(&mut eps_rng, &[chunk.len(), k]);
            let indicator: Vec<f64> = chunk.iter().map(|&i| vae.vae_mask.indicator(train.labels[i])).collect();
            let step = (|| {
                let params = model.param_vars(&mut g)?;
                let x = g.constant(train.batch(chunk))?;
                let enc = model.encode(&mut g, &params, x)?;
                let ly = g.sigmoid_bce_per_sample(enc.z_o, &train.targets(chunk), cfg.training_temperature)?;
                let z = reparameterize_var(&mut g, enc.mu, enc.log_var, eps)?;
                let x_hat = model.decode(&mut g, &params, z)?;
                let kl_terms = g.kl_per_sample(enc.mu, enc.log_var)?;
                let rec_terms = g.l1_per_sample(x, x_hat)?;
                let vae_terms = vae_loss_per_sample(&mut g, x, x_hat, enc.mu, enc.log_var, vae.kl_coefficient)?;
                let loss = dbvae_total_loss(&mut g, ly, vae_terms, &indicator)?;
                g.backward(loss)?;
                Ok::<_, Error>((params, enc.z_o, ly, kl_terms, rec_terms, loss))
            })();
            let (params, z_o, ly, kl_terms, rec_terms, loss) =
                step.map_err(|e| with_context(e, &format!("epoch {epoch}, batch {b}")))?;
            let sum = |v| g.value(v).data().iter().map(|&x| f64::from(x)).sum::<f64>();
            total += f64::from(g.value(loss).item()) * chunk.len() as f64;
            class += sum(ly);
            rec += sum(rec_terms);
            kl += sum(kl_terms);
            correct += g
                .value(z_o)
                .data()
                .iter()
                .zip(chunk)
                .filter(|(&z, &i)| u8::from(z > 0.0) == train.labels[i])
                .count();
            let grads: Vec<Vec<f32>> = params
                .iter()
                .zip(&model.params)
                .map(|(&v, p)| g.grad(v).map_or_else(|| vec![0.0; p.len()], <[f32]>::to_vec))
                .collect();
            adam.step(&mut model.params, &grads).map_err(|e| with_context(e, &format!("epoch {epoch}, batch {b}")))?;
        }
        let train_accuracy = correct as f64 / n as f64;
        let (val_loss, val_accuracy) = match val {
            Some(v) if !v.is_empty() => {
                let scores = score_images_dbvae(model, &v.images, cfg.training_temperature, ENCODE_BATCH)?;
                let (l, a) = class_metrics(&scores, &v.labels);
                (Some(l), Some(a))
            }
            _ => (None, None),
        };
        let nf = n as f64;
        let record = DbVaeEpoch {
            stats: EpochStats { epoch, train_loss: total / nf, train_accuracy, val_loss, val_accuracy },
            class_loss: class / nf,
            reconstruction: rec / nf,
            kl: kl / nf,
            latent,
        };
        on_epoch(&record);
        history.push(record);
        if stopper.update(train_accuracy) {
            break;
        }
    }
    Ok(history)
}

fn class_metrics(scores: &[f64], labels: &[u8]) -> (f64, f64) {
    let eps = crate::nn::graph::BCE_EPS;
    let n = scores.len() as f64;
    let loss = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let p = s.clamp(eps, 1.0 - eps);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>();
    let acc = scores.iter().zip(labels).filter(|(&s, &y)| u8::from(s > 0.5) == y).count() as f64;
    (loss / n, acc / n)
}

#[derive(Serialize, Deserialize)]
struct StoredConfig {
    latent_dim: usize,
    vae: VaeConfig,
}

impl Checkpoint {
    pub fn from_dbvae(model: &DbVae<f32>, vae: &VaeConfig, cfg: &TrainConfig, history: &[DbVaeEpoch]) -> Result<Self> {
        let model_config = serde_json::to_value(StoredConfig { latent_dim: model.latent_dim, vae: *vae })
            .map_err(|e| Error::json("serialize db-vae config", e))?;
        Ok(Checkpoint {
            kind: ModelKind::Dbvae,
            architecture: model.arch.clone(),
            model_config,
            train_config: cfg.clone(),
            final_epoch: history.last().map_or(0, |h| h.stats.epoch),
            history: history.iter().map(|h| h.stats.clone()).collect(),
            seed: cfg.seed,
            names: model.param_names(),
            tensors: model.params.clone(),
        })
    }

    pub fn to_dbvae(&self) -> Result<(DbVae<f32>, VaeConfig)> {
        if self.kind != ModelKind::Dbvae {
            return Err(Error::Checkpoint(format!("expected a dbvae checkpoint, found {:?}", self.kind)));
        }
        let stored: StoredConfig = serde_json::from_value(self.model_config.clone())
            .map_err(|e| Error::Checkpoint(format!("db-vae config: {e}")))?;
        let model = DbVae::from_params(self.architecture.clone(), stored.latent_dim, self.tensors.clone())?;
        Ok((model, stored.vae))
    }
}

/// Loads the manifests, trains a fresh DB-VAE seeded from `cfg.seed` and
/// packages it as a checkpoint.
pub fn train_dbvae(
    train_manifest: &DatasetManifest,
    val_manifest: Option<&DatasetManifest>,
    arch: &crate::classifier::CnnArchitecture,
    vae: &VaeConfig,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&DbVaeEpoch),
) -> Result<(Checkpoint, Vec<DbVaeEpoch>)> {
    let mut model = DbVae::build(arch.clone(), vae.latent_dim, cfg.seed)?;
    let train_set = ImageSet::from_manifest(train_manifest, arch.input_size)?;
    let val_set = val_manifest.map(|m| ImageSet::from_manifest(m, arch.input_size)).transpose()?;
    let history = train_dbvae_on_set(&mut model, &train_set, val_set.as_ref(), vae, cfg, on_epoch)?;
    Ok((Checkpoint::from_dbvae(&model, vae, cfg, &history)?, history))
}

/// Class scores `sigmoid(z_o / t)` for every decodable sample.
pub fn predict_dbvae(ckpt: &Checkpoint, manifest: &DatasetManifest, t: Temperature) -> Result<Predictions> {
    let (model, _) = ckpt.to_dbvae()?;
    let mut preds = Predictions::default();
    let mut ok = Vec::new();
    let mut images = Vec::new();
    for (s, img) in manifest.samples.iter().zip(load_images(manifest, model.arch.input_size)) {
        match img {
            Ok(img) => {
                ok.push(s);
                images.push(img);
            }
            Err(e) => preds.failures.push(SampleFailure { id: s.id.clone(), reason: e.to_string() }),
        }
    }
    let scores = score_images_dbvae(&model, &images, t, ENCODE_BATCH)?;
    preds.scores =
        ok.into_iter().zip(scores).map(|(s, score)| SampleScore { id: s.id.clone(), label: s.label, score }).collect();
    Ok(preds)
}
