//! Binary CNN classifier: architecture, training, checkpoints and scoring.

pub mod arch;
pub mod checkpoint;
pub mod early_stop;
pub mod model;
pub mod predict;
pub mod train;

pub use arch::{CnnArchitecture, ConvStage};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CnnCheckpoint, ModelKind};
pub use early_stop::EarlyStopping;
pub use model::Cnn;
pub use predict::{predict_scores, Predictions, SampleScore};
pub use train::{train, train_on_set, EpochStats, ImageSet, TrainConfig};
