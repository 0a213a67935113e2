//! Debiasing VAE baseline: a VAE whose first latent is a supervised class
//! logit, trained on batches drawn inversely to latent-space density.

pub mod latent;
pub mod model;
pub mod train;

pub use latent::{resampling_weights, update_latent_histograms, LatentHistogram, LatentStats};
pub use model::{
    dbvae_total_loss, reparameterize, vae_loss, vae_objective, DbVae, EncoderOutput, VaeConfig, VaeMask,
};
pub use train::{predict_dbvae, train_dbvae, train_dbvae_on_set, DbVaeEpoch};
