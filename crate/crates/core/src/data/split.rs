use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::manifest::DatasetManifest;
use crate::error::{Error, Result};

/// Stratified, seed-deterministic train/validation split. Within each label
/// the ids are sorted before the seeded shuffle, so the result does not
/// depend on manifest order; each label contributes
/// `round(count * train_fraction)` samples to the training side.
pub fn split(
    manifest: &DatasetManifest,
    fractions: (f64, f64),
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    let (train_frac, val_frac) = fractions;
    if train_frac < 0.0 || val_frac < 0.0 || (train_frac + val_frac - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "split fractions must be non-negative and sum to 1, got ({train_frac}, {val_frac})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_ids: HashSet<&str> = HashSet::new();
    for label in 0..2u8 {
        let mut ids: Vec<&str> =
            manifest.samples.iter().filter(|s| s.label == label).map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let take = (ids.len() as f64 * train_frac).round() as usize;
        train_ids.extend(&ids[..take]);
    }
    let val_ids: HashSet<&str> =
        manifest.samples.iter().map(|s| s.id.as_str()).filter(|id| !train_ids.contains(id)).collect();
    let mut train = manifest.subset(&train_ids);
    let mut val = manifest.subset(&val_ids);
    let note = |side: &str| Some(format!("split {side} fractions=({train_frac}, {val_frac}) seed={seed}"));
    train.provenance = note("train");
    val.provenance = note("validation");
    Ok((train, val))
}
