use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::classifier::{predict_scores, Checkpoint, Predictions};
use crate::classifier::predict::SampleFailure;
use crate::data::{canonical_json, DatasetManifest};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::nn::Temperature;
use crate::runlog::RunLog;
use crate::svm::cv::{fit, fit_with_grid_search, GridSearchSpec, ScoredSample};
use crate::svm::smo::SvmModel;

/// Hyper-parameters used when grid search is skipped.
pub const FIXED_GAMMA: f64 = 0.5;
pub const FIXED_C: f64 = 10.0;

/// How the head's (gamma, C) are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum HeadSelection {
    GridSearch(GridSearchSpec),
    Fixed { gamma: f64, c: f64 },
}

impl Default for HeadSelection {
    fn default() -> Self {
        HeadSelection::GridSearch(GridSearchSpec::default())
    }
}

pub fn save_svm(model: &SvmModel, path: &Path) -> Result<()> {
    let mut text = canonical_json(model)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_svm(path: &Path) -> Result<SvmModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(format!("parsing SVM model {}", path.display()), e))
}

/// Fits the head on the checkpoint's scores over `manifest` at temperature
/// `t` and records the checkpoint identity in the model.
pub fn fit_head(ckpt: &Checkpoint, manifest: &DatasetManifest, t: Temperature, selection: &HeadSelection) -> Result<SvmModel> {
    let preds = predict_scores(ckpt, manifest, t)?;
    if let Some(f) = preds.failures.first() {
        let path = manifest.get(&f.id).map(|r| manifest.resolve(r)).unwrap_or_default();
        return Err(Error::Image { path, reason: f.reason.clone() });
    }
    let samples: Vec<ScoredSample> = preds
        .scores
        .into_iter()
        .map(|s| ScoredSample { id: s.id, score: s.score, label: s.label })
        .collect();
    let mut model = fit_samples(&samples, selection)?;
    model.source_checkpoint_id = Some(ckpt.id()?);
    Ok(model)
}

pub fn fit_samples(samples: &[ScoredSample], selection: &HeadSelection) -> Result<SvmModel> {
    match selection {
        HeadSelection::GridSearch(spec) => fit_with_grid_search(samples, spec),
        HeadSelection::Fixed { gamma, c } => {
            let d = GridSearchSpec::default();
            fit(samples, *gamma, *c, d.tol, d.max_iter)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadPrediction {
    pub id: String,
    pub label: u8,
    pub score: f64,
    pub predicted: u8,
    pub margin: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeadPredictions {
    pub predictions: Vec<HeadPrediction>,
    pub failures: Vec<SampleFailure>,
}

/// Scores the manifest with the checkpoint at the audit temperature and
/// classifies each score with the SVM. A head fitted on a different
/// checkpoint is refused unless `allow_mismatch` is set, in which case a
/// warning is logged.
pub fn cnn_svm_predict(
    ckpt: &Checkpoint,
    svm: &SvmModel,
    manifest: &DatasetManifest,
    allow_mismatch: bool,
    log: &mut RunLog,
) -> Result<HeadPredictions> {
    let id = ckpt.id()?;
    if svm.source_checkpoint_id.as_deref() != Some(id.as_str()) {
        let recorded = svm.source_checkpoint_id.as_deref().unwrap_or("none");
        if !allow_mismatch {
            return Err(Error::Usage(format!(
                "SVM was fitted on checkpoint {recorded} but checkpoint {id} was given; \
                 pass --allow-mismatch to use it anyway"
            )));
        }
        log.event("warning", json!({ "message": "SVM/checkpoint identity mismatch", "svm_source": recorded, "checkpoint": id }))?;
    }
    let preds = predict_scores(ckpt, manifest, Temperature::AUDIT)?;
    Ok(apply_head(svm, preds))
}

pub fn apply_head(svm: &SvmModel, preds: Predictions) -> HeadPredictions {
    let predictions = preds
        .scores
        .into_iter()
        .map(|s| {
            let (predicted, margin) = svm.predict(s.score);
            HeadPrediction { id: s.id, label: s.label, score: s.score, predicted, margin }
        })
        .collect();
    HeadPredictions { predictions, failures: preds.failures }
}
