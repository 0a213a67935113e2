//! Score-based resampling (SBR) toolkit.
//!
//! Trains a small CNN binary classifier, audits the model on its own
//! training set to find samples whose sigmoid score sits far from their
//! label, augments those samples, retrains, and puts an RBF-kernel SVM on
//! top of the retrained model's scores. A debiasing VAE is included as a
//! baseline, along with a synthetic biased-dataset generator and the
//! reporting needed to compare the three methods per subgroup.

pub mod classifier;
pub mod cli;
pub mod error;
pub mod fsutil;
pub mod runlog;
pub mod svm;
pub mod sbr;
pub mod data;
pub mod dbvae;
pub mod nn;
pub mod report;

pub use error::{Error, Result};
