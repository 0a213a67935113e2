//! Synthetic biased binary dataset for desk-scale experiments.
//!
//! The class is carried by shape (disc vs. square of equal area). Each class
//! is split into a majority subgroup drawn as a bright shape on a dark
//! background, and a minority subgroup drawn as a darker, lower-contrast
//! shape on a light background, at an exact configured fraction. Occluding
//! rectangles and pixel noise are the nuisance factors. This is a stand-in
//! for a real biased dataset, not a model of any particular one.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::image::{save_png, CHANNELS};
use crate::data::manifest::{DatasetManifest, Origin, SampleRecord};
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const MAJORITY_BAND: &str = "dark";
pub const MINORITY_BAND: &str = "light";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_per_class: usize,
    /// Share of each class drawn from the minority subgroup, in (0, 1).
    pub minority_fraction: f64,
    pub image_size: usize,
    pub seed: u64,
    /// Background brightness range of the majority subgroup.
    pub majority_brightness: (f64, f64),
    /// Background brightness range of the minority subgroup.
    pub minority_brightness: (f64, f64),
    /// Absolute shape/background brightness difference, majority subgroup.
    pub contrast: (f64, f64),
    /// Absolute shape/background brightness difference, minority subgroup.
    pub minority_contrast: (f64, f64),
    /// Shape radius as a fraction of the image size.
    pub radius: (f64, f64),
    /// Squares are rotated uniformly in `[0, max_rotation_deg)`.
    pub max_rotation_deg: f64,
    pub occlusion_prob: f64,
    pub noise_std: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_class: 1000,
            minority_fraction: 0.1,
            image_size: 64,
            seed: 0,
            majority_brightness: (0.05, 0.35),
            minority_brightness: (0.65, 0.95),
            contrast: (0.3, 0.6),
            minority_contrast: (0.12, 0.3),
            radius: (0.2, 0.3),
            max_rotation_deg: 0.0,
            occlusion_prob: 0.2,
            noise_std: 0.08,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.minority_fraction > 0.0 && self.minority_fraction < 1.0) {
            return Err(Error::config(format!(
                "minority_fraction must lie in (0, 1), got {}",
                self.minority_fraction
            )));
        }
        if self.n_per_class == 0 {
            return Err(Error::config("n_per_class must be positive"));
        }
        if self.image_size < 8 {
            return Err(Error::config("image_size must be at least 8"));
        }
        let band_ok = |(lo, hi): (f64, f64)| (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo <= hi;
        if !band_ok(self.majority_brightness) || !band_ok(self.minority_brightness) || !band_ok(self.contrast) || !band_ok(self.minority_contrast) {
            return Err(Error::config("brightness and contrast ranges must lie in [0, 1]"));
        }
        if !(self.radius.0 > 0.0 && self.radius.0 <= self.radius.1 && self.radius.1 < 0.45) {
            return Err(Error::config("radius range must satisfy 0 < lo <= hi < 0.45"));
        }
        if !(0.0..=1.0).contains(&self.occlusion_prob) || self.noise_std < 0.0 {
            return Err(Error::config("occlusion_prob must be in [0, 1] and noise_std non-negative"));
        }
        Ok(())
    }

    /// Exact number of minority samples in each class.
    pub fn minority_per_class(&self) -> usize {
        (self.n_per_class as f64 * self.minority_fraction).round() as usize
    }
}

pub fn class_names() -> BTreeMap<String, String> {
    BTreeMap::from([("0".to_string(), "disc".to_string()), ("1".to_string(), "square".to_string())])
}

pub fn group_tag(label: u8, minority: bool) -> String {
    let band = if minority { MINORITY_BAND } else { MAJORITY_BAND };
    let class = if label == 0 { "disc" } else { "square" };
    format!("{band}_{class}")
}

pub fn is_minority_group(group: &str) -> bool {
    group.starts_with(MINORITY_BAND)
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Renders one sample. The generator stream is private to the sample, so
/// images do not depend on generation order.
pub fn render(cfg: &SynthConfig, label: u8, minority: bool, stream: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let size = cfg.image_size;
    let s = size as f64;

    let bg = uniform(&mut rng, if minority { cfg.minority_brightness } else { cfg.majority_brightness });
    let contrast = uniform(&mut rng, if minority { cfg.minority_contrast } else { cfg.contrast });
    let fg = if minority { bg - contrast } else { bg + contrast }.clamp(0.0, 1.0);

    let r = uniform(&mut rng, cfg.radius) * s;
    let margin = r + 1.0;
    let cx = uniform(&mut rng, (margin, s - margin));
    let cy = uniform(&mut rng, (margin, s - margin));
    // equal-area square
    let half = r * std::f64::consts::PI.sqrt() / 2.0;
    let theta = rng.random::<f64>() * cfg.max_rotation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();

    let occlusion = (rng.random::<f64>() < cfg.occlusion_prob).then(|| {
        let w = uniform(&mut rng, (0.15, 0.35)) * s;
        let h = uniform(&mut rng, (0.15, 0.35)) * s;
        let x0 = uniform(&mut rng, (0.0, s - w));
        let y0 = uniform(&mut rng, (0.0, s - h));
        let v = rng.random::<f64>();
        (x0, y0, w, h, v)
    });

    let noise = Normal::new(0.0, cfg.noise_std.max(f64::MIN_POSITIVE)).expect("valid std");
    let mut data = Vec::with_capacity(size * size * CHANNELS);
    for y in 0..size {
        for x in 0..size {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let (dx, dy) = (px - cx, py - cy);
            let inside = if label == 0 {
                dx * dx + dy * dy <= r * r
            } else {
                let u = dx * cos + dy * sin;
                let v = -dx * sin + dy * cos;
                u.abs() <= half && v.abs() <= half
            };
            let mut value = if inside { fg } else { bg };
            if let Some((x0, y0, w, h, v)) = occlusion {
                if px >= x0 && px < x0 + w && py >= y0 && py < y0 + h {
                    value = v;
                }
            }
            for _ in 0..CHANNELS {
                let n = if cfg.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                data.push((value + n).clamp(0.0, 1.0) as f32);
            }
        }
    }
    Tensor::new(&[size, size, CHANNELS], data).expect("render shape")
}

/// Writes `images/<id>.png` under `out_dir` plus `manifest.json`, and
/// returns the manifest. Classes are laid out class 0 then class 1, the
/// first `minority_per_class` samples of each class being minority.
pub fn generate_synthetic(cfg: &SynthConfig, out_dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    let img_dir = out_dir.join("images");
    std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(format!("creating {}", img_dir.display()), e))?;
    let minority = cfg.minority_per_class();
    let mut samples = Vec::with_capacity(2 * cfg.n_per_class);
    for label in 0..2u8 {
        for i in 0..cfg.n_per_class {
            let is_minority = i < minority;
            let stream = label as u64 * cfg.n_per_class as u64 + i as u64;
            let img = render(cfg, label, is_minority, stream);
            let id = format!("syn{label}_{i:05}");
            let rel = format!("images/{id}.png");
            save_png(&img, &out_dir.join(&rel))?;
            samples.push(SampleRecord {
                id,
                path: rel,
                label,
                group: Some(group_tag(label, is_minority)),
                origin: Origin::Synthetic,
                parent_id: None,
            });
        }
    }
    let mut manifest = DatasetManifest::new(class_names(), samples, out_dir);
    manifest.provenance = Some(format!(
        "synthetic n_per_class={} minority_fraction={} seed={}",
        cfg.n_per_class, cfg.minority_fraction, cfg.seed
    ));
    crate::data::manifest::save_manifest(&manifest, out_dir.join("manifest.json"))?;
    Ok(manifest)
}
