use std::collections::HashSet;
use std::path::Path;

use crate::data::augment::apply;
use crate::data::image::{preprocess_file, save_png, IMAGE_SIZE};
use crate::data::{Augmentation, DatasetManifest, Origin, SampleRecord};
use crate::error::{Error, Result};

pub const AUGMENTED_DIR: &str = "augmented";

pub fn augmented_id(parent: &str, aug: Augmentation) -> String {
    format!("{parent}__{}", aug.as_str())
}

/// The records of the resampled manifest without touching the filesystem:
/// every original record, followed by a flipped, a left-cropped and a
/// right-cropped record per flagged sample, with paths under `augmented/`.
pub fn plan_resample(manifest: &DatasetManifest, flagged: &[String]) -> Result<DatasetManifest> {
    let mut seen = HashSet::new();
    let mut out = manifest.clone();
    for id in flagged {
        let Some(parent) = manifest.get(id) else {
            return Err(Error::Manifest(format!("flagged id {id:?} is not in the manifest")));
        };
        if !seen.insert(id.as_str()) {
            return Err(Error::Manifest(format!("flagged id {id:?} listed twice")));
        }
        for aug in Augmentation::ALL {
            let new_id = augmented_id(id, aug);
            out.samples.push(SampleRecord {
                path: format!("{AUGMENTED_DIR}/{new_id}.png"),
                id: new_id,
                label: parent.label,
                group: parent.group.clone(),
                origin: Origin::Augmented(aug),
                parent_id: Some(id.clone()),
            });
        }
    }
    let stamp = format!("resampled: {} flagged, {} augmented records added", flagged.len(), 3 * flagged.len());
    out.provenance = Some(match &manifest.provenance {
        Some(p) => format!("{p}; {stamp}"),
        None => stamp,
    });
    out.validate()?;
    Ok(out)
}

/// [`plan_resample`] plus the augmented images, written under
/// `out_dir/augmented/`. The returned manifest is rooted at `out_dir`.
pub fn resample_dataset(manifest: &DatasetManifest, flagged: &[String], out_dir: &Path) -> Result<DatasetManifest> {
    let plan = plan_resample(manifest, flagged)?;
    let n_orig = manifest.len();
    let mut out = DatasetManifest { samples: plan.samples[..n_orig].to_vec(), ..plan.clone() }.rebased(out_dir);
    out.samples.extend_from_slice(&plan.samples[n_orig..]);
    if !flagged.is_empty() {
        let aug_dir = out_dir.join(AUGMENTED_DIR);
        std::fs::create_dir_all(&aug_dir).map_err(|e| Error::io(format!("creating {}", aug_dir.display()), e))?;
    }
    for (id, records) in flagged.iter().zip(plan.samples[n_orig..].chunks(3)) {
        let parent = manifest.get(id).expect("checked by plan_resample");
        let img = preprocess_file(&manifest.resolve(parent), IMAGE_SIZE)?;
        for (aug, rec) in Augmentation::ALL.into_iter().zip(records) {
            save_png(&apply(aug, &img), &out_dir.join(&rec.path))?;
        }
    }
    Ok(out)
}
