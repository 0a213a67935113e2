//! Dataset manifests, image preprocessing, augmentation primitives and the
//! synthetic biased-dataset generator.

pub mod augment;
pub mod image;
pub mod manifest;
pub mod split;
pub mod synth;

pub use augment::augment_sample;
pub use image::{decode_and_preprocess, IMAGE_SIZE};
pub use manifest::{canonical_json, load_manifest, save_manifest, Augmentation, DatasetManifest, Origin, SampleRecord};
pub use split::split;
pub use synth::{generate_synthetic, SynthConfig};

use crate::error::Result;
use crate::nn::Tensor;

/// Preprocesses every sample of a manifest at `size x size`, keeping
/// per-sample failures.
pub fn load_images(manifest: &DatasetManifest, size: usize) -> Vec<Result<Tensor<f32>>> {
    manifest.samples.iter().map(|s| image::preprocess_file(&manifest.resolve(s), size)).collect()
}

/// Like [`load_images`] but fails on the first undecodable sample.
pub fn load_all_images(manifest: &DatasetManifest, size: usize) -> Result<Vec<Tensor<f32>>> {
    load_images(manifest, size).into_iter().collect()
}
