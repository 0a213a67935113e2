use serde::{Deserialize, Serialize};

use crate::classifier::{predict_scores, Checkpoint};
use crate::data::DatasetManifest;
use crate::error::{Error, Result};
use crate::nn::Temperature;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbrConfig {
    /// Flag a sample when its score-to-label distance is strictly greater.
    pub threshold: f64,
    pub audit_temperature: Temperature,
    /// Fixed at three: flip, left crop, right crop.
    pub augmentations_per_flag: usize,
}

impl Default for SbrConfig {
    fn default() -> Self {
        Self { threshold: 0.15, audit_temperature: Temperature::AUDIT, augmentations_per_flag: 3 }
    }
}

pub(crate) fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("threshold must lie in (0, 1), got {threshold}")))
    }
}

impl SbrConfig {
    pub fn validate(&self) -> Result<()> {
        check_threshold(self.threshold)?;
        if self.augmentations_per_flag != 3 {
            return Err(Error::config("augmentations_per_flag is fixed at 3 (flip, crop_left, crop_right)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub threshold: f64,
    pub temperature: Temperature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditRecord {
    pub id: String,
    pub label: u8,
    pub score: f64,
    pub distance: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreAudit {
    pub config: AuditConfig,
    pub checkpoint_id: String,
    pub records: Vec<AuditRecord>,
}

/// Rounds to nine significant digits, the precision the audit file keeps.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

impl AuditRecord {
    /// Score and distance are rounded as stored, and the flag is derived
    /// from the stored distance so the file is self-consistent.
    pub fn new(id: impl Into<String>, label: u8, score: f64, threshold: f64) -> Self {
        let score = round_sig9(score);
        let distance = round_sig9((score - f64::from(label)).abs());
        Self { id: id.into(), label, score, distance, flagged: distance > threshold }
    }
}

/// Builds an audit from precomputed `(id, label, score)` triples.
pub fn audit_from_scores<'a>(
    scores: impl IntoIterator<Item = (&'a str, u8, f64)>,
    config: AuditConfig,
    checkpoint_id: impl Into<String>,
) -> Result<ScoreAudit> {
    check_threshold(config.threshold)?;
    let records: Vec<AuditRecord> =
        scores.into_iter().map(|(id, label, s)| AuditRecord::new(id, label, s, config.threshold)).collect();
    if records.is_empty() {
        return Err(Error::Manifest("cannot audit an empty manifest".into()));
    }
    Ok(ScoreAudit { config, checkpoint_id: checkpoint_id.into(), records })
}

/// Scores every training sample with the model it trained and records the
/// score-to-label distance. Any undecodable sample is fatal here.
pub fn audit_scores(ckpt: &Checkpoint, manifest: &DatasetManifest, cfg: &SbrConfig) -> Result<ScoreAudit> {
    cfg.validate()?;
    if manifest.is_empty() {
        return Err(Error::Manifest("cannot audit an empty manifest".into()));
    }
    let preds = predict_scores(ckpt, manifest, cfg.audit_temperature)?;
    if let Some(f) = preds.failures.first() {
        let rec = manifest.get(&f.id).expect("failure ids come from the manifest");
        return Err(Error::Image { path: manifest.resolve(rec), reason: f.reason.clone() });
    }
    audit_from_scores(
        preds.scores.iter().map(|s| (s.id.as_str(), s.label, s.score)),
        AuditConfig { threshold: cfg.threshold, temperature: cfg.audit_temperature },
        ckpt.id()?,
    )
}

/// Ids whose distance is strictly greater than `threshold`, in audit order.
pub fn flag_underrepresented(audit: &ScoreAudit, threshold: f64) -> Result<Vec<String>> {
    check_threshold(threshold)?;
    Ok(audit.records.iter().filter(|r| r.distance > threshold).map(|r| r.id.clone()).collect())
}
