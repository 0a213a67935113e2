use serde::{Deserialize, Serialize};

use crate::classifier::checkpoint::Checkpoint;
use crate::classifier::model::Cnn;
use crate::classifier::train::stack_images;
use crate::data::{load_images, DatasetManifest};
use crate::error::Result;
use crate::nn::{Temperature, Tensor};

pub const DEFAULT_BATCH: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub id: String,
    pub label: u8,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub id: String,
    pub reason: String,
}

/// Scores for every decodable sample plus the samples that failed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Predictions {
    pub scores: Vec<SampleScore>,
    pub failures: Vec<SampleFailure>,
}

impl Predictions {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn score_values(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s.score).collect()
    }
}

/// Scores preprocessed images in chunks of `batch_size`.
pub fn score_images(model: &Cnn<f32>, images: &[Tensor<f32>], t: Temperature, batch_size: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(batch_size.max(1)) {
        out.extend(model.scores(&stack_images(chunk.iter()), t)?);
    }
    Ok(out)
}

/// Sigmoid scores at temperature `t` for every sample in the manifest.
/// Undecodable samples are reported in `failures` and skipped.
pub fn predict_scores(ckpt: &Checkpoint, manifest: &DatasetManifest, t: Temperature) -> Result<Predictions> {
    predict_with_batch(&ckpt.to_cnn()?, manifest, t, DEFAULT_BATCH)
}

pub fn predict_with_batch(
    model: &Cnn<f32>,
    manifest: &DatasetManifest,
    t: Temperature,
    batch_size: usize,
) -> Result<Predictions> {
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
    let scores = score_images(model, &images, t, batch_size)?;
    preds.scores = ok
        .into_iter()
        .zip(scores)
        .map(|(s, score)| SampleScore { id: s.id.clone(), label: s.label, score })
        .collect();
    Ok(preds)
}
