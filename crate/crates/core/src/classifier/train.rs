use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::checkpoint::{Checkpoint, ModelKind};
use crate::classifier::early_stop::EarlyStopping;
use crate::classifier::model::Cnn;
use crate::data::{load_all_images, DatasetManifest};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Graph, Temperature, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub adam: AdamConfig,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub training_temperature: Temperature,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_epochs: 20,
            adam: AdamConfig::default(),
            early_stop_patience: 5,
            seed: 0,
            training_temperature: Temperature::TRAINING,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.early_stop_patience == 0 {
            return Err(Error::config("batch_size, max_epochs and early_stop_patience must all be at least 1"));
        }
        self.adam.validate()
    }
}

/// Per-epoch training curve point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_accuracy: Option<f64>,
}

/// Preprocessed images with their labels, in manifest order.
#[derive(Clone, Debug)]
pub struct ImageSet {
    pub ids: Vec<String>,
    pub images: Vec<Tensor<f32>>,
    pub labels: Vec<u8>,
}

impl ImageSet {
    pub fn from_manifest(manifest: &DatasetManifest, size: usize) -> Result<Self> {
        Ok(Self {
            ids: manifest.samples.iter().map(|s| s.id.clone()).collect(),
            images: load_all_images(manifest, size)?,
            labels: manifest.labels(),
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `[b, h, w, c]` batch of the given sample indices.
    pub fn batch(&self, indices: &[usize]) -> Tensor<f32> {
        stack_images(indices.iter().map(|&i| &self.images[i]))
    }

    pub fn targets(&self, indices: &[usize]) -> Tensor<f32> {
        let data = indices.iter().map(|&i| f32::from(self.labels[i])).collect();
        Tensor::new(&[indices.len(), 1], data).expect("one target per index")
    }
}

pub fn stack_images<'a>(images: impl Iterator<Item = &'a Tensor<f32>>) -> Tensor<f32> {
    let mut data = Vec::new();
    let mut shape = None;
    let mut n = 0;
    for img in images {
        shape.get_or_insert_with(|| img.shape().to_vec());
        data.extend_from_slice(img.data());
        n += 1;
    }
    let mut full = vec![n];
    full.extend(shape.expect("at least one image"));
    Tensor::new(&full, data).expect("images share a shape")
}

pub(crate) fn with_context(e: Error, ctx: &str) -> Error {
    match e {
        Error::Numeric(m) => Error::Numeric(format!("{ctx}: {m}")),
        other => other,
    }
}

pub(crate) fn require_both_classes(labels: &[u8]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(Error::config("training set contains a single class"));
    }
    Ok(())
}

/// Mean BCE and accuracy of the model on a set, at temperature `t`.
pub fn evaluate(model: &Cnn<f32>, set: &ImageSet, t: Temperature, batch_size: usize) -> Result<(f64, f64)> {
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut loss = 0.0;
    let mut correct = 0;
    for chunk in idx.chunks(batch_size.max(1)) {
        let mut g = Graph::new();
        let params: Vec<_> = model.params.iter().map(|p| g.constant(p.clone())).collect::<Result<_>>()?;
        let x = g.constant(set.batch(chunk))?;
        let z = model.forward(&mut g, &params, x)?;
        let l = g.sigmoid_bce_per_sample(z, &set.targets(chunk), t)?;
        loss += g.value(l).data().iter().map(|&v| f64::from(v)).sum::<f64>();
        correct += count_correct(g.value(z).data(), chunk.iter().map(|&i| set.labels[i]));
    }
    Ok((loss / set.len() as f64, correct as f64 / set.len() as f64))
}

fn count_correct(logits: &[f32], labels: impl Iterator<Item = u8>) -> usize {
    logits.iter().zip(labels).filter(|(&z, y)| u8::from(z > 0.0) == *y).count()
}

/// Mini-batch Adam on BCE of the (temperature-scaled) sigmoid output, with
/// a seeded per-epoch shuffle and early stopping on training accuracy.
pub fn train_on_set(
    model: &mut Cnn<f32>,
    train: &ImageSet,
    val: Option<&ImageSet>,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochStats),
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    require_both_classes(&train.labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = AdamState::new(cfg.adam, &model.params);
    let mut stopper = EarlyStopping::new(cfg.early_stop_patience);
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let ctx = || format!("epoch {epoch}, batch {b}");
            let mut g = Graph::new();
            let step = (|| {
                let params = model.param_vars(&mut g)?;
                let x = g.constant(train.batch(chunk))?;
                let z = model.forward(&mut g, &params, x)?;
                let per = g.sigmoid_bce_per_sample(z, &train.targets(chunk), cfg.training_temperature)?;
                let loss = g.mean(per)?;
                g.backward(loss)?;
                Ok::<_, Error>((params, z, loss))
            })();
            let (params, z, loss) = step.map_err(|e| with_context(e, &ctx()))?;
            loss_sum += f64::from(g.value(loss).item()) * chunk.len() as f64;
            correct += count_correct(g.value(z).data(), chunk.iter().map(|&i| train.labels[i]));
            let grads: Vec<Vec<f32>> = params
                .iter()
                .zip(&model.params)
                .map(|(&v, p)| g.grad(v).map_or_else(|| vec![0.0; p.len()], <[f32]>::to_vec))
                .collect();
            adam.step(&mut model.params, &grads).map_err(|e| with_context(e, &ctx()))?;
        }
        let train_accuracy = correct as f64 / train.len() as f64;
        let (val_loss, val_accuracy) = match val {
            Some(v) if !v.is_empty() => {
                let (l, a) = evaluate(model, v, cfg.training_temperature, 64)?;
                (Some(l), Some(a))
            }
            _ => (None, None),
        };
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy,
            val_loss,
            val_accuracy,
        };
        on_epoch(&stats);
        history.push(stats);
        if stopper.update(train_accuracy) {
            break;
        }
    }
    Ok(history)
}

/// Loads the manifests, trains `model` in place and packages the result.
pub fn train(
    model: &mut Cnn<f32>,
    train_manifest: &DatasetManifest,
    val_manifest: Option<&DatasetManifest>,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochStats),
) -> Result<Checkpoint> {
    let size = model.arch.input_size;
    let train_set = ImageSet::from_manifest(train_manifest, size)?;
    let val_set = val_manifest.map(|m| ImageSet::from_manifest(m, size)).transpose()?;
    let history = train_on_set(model, &train_set, val_set.as_ref(), cfg, on_epoch)?;
    Ok(Checkpoint::from_cnn(model, cfg, history))
}

impl Checkpoint {
    pub fn from_cnn(model: &Cnn<f32>, cfg: &TrainConfig, history: Vec<EpochStats>) -> Self {
        Checkpoint {
            kind: ModelKind::Cnn,
            architecture: model.arch.clone(),
            model_config: serde_json::Value::Null,
            train_config: cfg.clone(),
            final_epoch: history.last().map_or(0, |h| h.epoch),
            history,
            seed: cfg.seed,
            names: model.param_names(),
            tensors: model.params.clone(),
        }
    }
}
