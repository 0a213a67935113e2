//! Score-based resampling: audit a trained model on its own training set,
//! flag samples whose score sits far from their label, augment them and
//! retrain from scratch.

pub mod audit;
pub mod pipeline;
pub mod resample;

pub use audit::{
    audit_from_scores, audit_scores, flag_underrepresented, AuditConfig, AuditRecord, SbrConfig, ScoreAudit,
};
pub use pipeline::{run_sbr_pipeline, SbrRun};
pub use resample::{plan_resample, resample_dataset};
