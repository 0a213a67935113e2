use std::path::Path;

use serde_json::json;

use crate::classifier::checkpoint::load_checkpoint;
use crate::classifier::{train, Checkpoint, Cnn, CnnArchitecture, TrainConfig};
use crate::data::{canonical_json, load_manifest, save_manifest, DatasetManifest};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::runlog::RunLog;
use crate::sbr::audit::{audit_scores, flag_underrepresented, SbrConfig, ScoreAudit};
use crate::sbr::resample::resample_dataset;

pub const BASELINE_FILE: &str = "baseline.ckpt";
pub const AUDIT_FILE: &str = "audit.json";
pub const RESAMPLED_FILE: &str = "resampled_manifest.json";
pub const RETRAINED_FILE: &str = "retrained.ckpt";
pub const LOG_FILE: &str = "run.log";

/// Initialisation seed of the retrained model: fresh weights, derived from
/// the run seed so reruns match.
pub fn retrain_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

#[derive(Clone, Debug)]
pub struct SbrRun {
    pub baseline: Checkpoint,
    pub audit: ScoreAudit,
    pub flagged: Vec<String>,
    pub resampled: DatasetManifest,
    pub retrained: Checkpoint,
}

pub fn save_audit(audit: &ScoreAudit, path: &Path) -> Result<()> {
    write_atomic(path, canonical_json(audit)?.as_bytes())
}

pub fn load_audit(path: &Path) -> Result<ScoreAudit> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(format!("parsing audit {}", path.display()), e))
}

#[allow(clippy::too_many_arguments)]
fn train_stage(
    path: &Path,
    stage: &str,
    arch: &CnnArchitecture,
    init_seed: u64,
    manifest: &DatasetManifest,
    val: Option<&DatasetManifest>,
    cfg: &TrainConfig,
    log: &mut RunLog,
) -> Result<Checkpoint> {
    if path.is_file() {
        let ckpt = load_checkpoint(path)?;
        log.event("resume", json!({"stage": stage, "checkpoint_id": ckpt.id()?}))?;
        return Ok(ckpt);
    }
    log.event("stage_start", json!({"stage": stage, "samples": manifest.len()}))?;
    let mut model = Cnn::build(arch.clone(), init_seed)?;
    let mut events = Vec::new();
    let mut ckpt = train(&mut model, manifest, val, cfg, &mut |e| events.push(e.clone()))?;
    for e in &events {
        log.event("epoch", json!({"stage": stage, "stats": e}))?;
    }
    ckpt.seed = init_seed;
    let bytes = ckpt.to_bytes()?;
    write_atomic(path, &bytes)?;
    log.event("stage_done", json!({"stage": stage, "checkpoint_id": crate::classifier::checkpoint::id_of_bytes(&bytes)}))?;
    Ok(ckpt)
}

/// Train, audit, flag, resample and retrain from scratch, writing every
/// intermediate artifact to `run_dir`. Stages whose artifact already exists
/// are loaded instead of recomputed.
#[allow(clippy::too_many_arguments)]
pub fn run_sbr_pipeline(
    train_manifest: &DatasetManifest,
    val_manifest: Option<&DatasetManifest>,
    train_cfg: &TrainConfig,
    sbr_cfg: &SbrConfig,
    arch: &CnnArchitecture,
    run_dir: &Path,
    echo: bool,
) -> Result<SbrRun> {
    train_cfg.validate()?;
    sbr_cfg.validate()?;
    std::fs::create_dir_all(run_dir).map_err(|e| Error::io(format!("creating {}", run_dir.display()), e))?;
    let mut log = RunLog::open(&run_dir.join(LOG_FILE), false, echo)?;

    let baseline = train_stage(
        &run_dir.join(BASELINE_FILE),
        "baseline",
        arch,
        train_cfg.seed,
        train_manifest,
        val_manifest,
        train_cfg,
        &mut log,
    )?;

    let audit_path = run_dir.join(AUDIT_FILE);
    let audit = if audit_path.is_file() {
        log.event("resume", json!({"stage": "audit"}))?;
        load_audit(&audit_path)?
    } else {
        let audit = audit_scores(&baseline, train_manifest, sbr_cfg)?;
        save_audit(&audit, &audit_path)?;
        audit
    };
    let flagged = flag_underrepresented(&audit, sbr_cfg.threshold)?;
    log.event("audit", json!({"records": audit.records.len(), "flagged": flagged.len()}))?;

    let resampled_path = run_dir.join(RESAMPLED_FILE);
    let resampled = if resampled_path.is_file() {
        log.event("resume", json!({"stage": "resample"}))?;
        load_manifest(&resampled_path)?
    } else {
        let m = resample_dataset(train_manifest, &flagged, run_dir)?;
        save_manifest(&m, &resampled_path)?;
        m
    };
    log.event("resample", json!({"before": train_manifest.len(), "after": resampled.len()}))?;

    let retrained = train_stage(
        &run_dir.join(RETRAINED_FILE),
        "retrain",
        arch,
        retrain_seed(train_cfg.seed),
        &resampled,
        val_manifest,
        train_cfg,
        &mut log,
    )?;
    Ok(SbrRun { baseline, audit, flagged, resampled, retrained })
}
