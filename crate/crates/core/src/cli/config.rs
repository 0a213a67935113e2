//! Run configuration: built-in defaults, overlaid by a JSON file, overlaid
//! by command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::classifier::{CnnArchitecture, TrainConfig};
use crate::data::SynthConfig;
use crate::dbvae::VaeConfig;
use crate::error::{Error, Result};
use crate::sbr::SbrConfig;
use crate::svm::GridSearchSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Default for every seed below that the config file does not set.
    pub seed: u64,
    pub architecture: CnnArchitecture,
    pub train: TrainConfig,
    pub sbr: SbrConfig,
    pub vae: VaeConfig,
    pub grid: GridSearchSpec,
    pub synth: SynthConfig,
    /// Share of the synthetic dataset held out for validation (0 = none).
    pub val_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            architecture: CnnArchitecture::default(),
            train: TrainConfig::default(),
            sbr: SbrConfig::default(),
            vae: VaeConfig::default(),
            grid: GridSearchSpec::default(),
            synth: SynthConfig::default(),
            val_fraction: 0.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        self.train.validate()?;
        self.sbr.validate()?;
        self.vae.validate()?;
        self.grid.validate()?;
        self.synth.validate()?;
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::config(format!("val_fraction must lie in [0, 1), got {}", self.val_fraction)));
        }
        Ok(())
    }
}

/// Nested seeds filled from the top-level `seed`.
const SEED_PATHS: [&str; 3] = ["/train/seed", "/synth/seed", "/grid/seed"];

/// A flag value destined for a JSON pointer in the config.
#[derive(Clone, Debug)]
pub struct FlagValue {
    pub flag: &'static str,
    pub pointer: &'static str,
    pub value: Value,
}

/// Merged configuration plus the file values that flags replaced.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: RunConfig,
    pub overrides: Vec<Value>,
}

fn deep_merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => deep_merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

fn set_pointer(root: &mut Value, pointer: &str, value: Value) {
    let mut cur = root;
    let parts: Vec<&str> = pointer.trim_start_matches('/').split('/').collect();
    for (i, p) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().expect("config pointers address objects");
        if i + 1 == parts.len() {
            obj.insert((*p).to_string(), value);
            return;
        }
        cur = obj.entry((*p).to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
}

pub fn read_config_file(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::json(format!("parsing config {}", path.display()), e))?;
    if !v.is_object() {
        return Err(Error::config(format!("config {} must hold a JSON object", path.display())));
    }
    Ok(v)
}

/// Resolves flags > file > defaults. A global `--seed` (or top-level file
/// `seed`) that disagrees with a nested seed set explicitly in the file is
/// a conflict: neither is more specific and higher-precedence at once.
pub fn resolve(file: Option<&Value>, seed_flag: Option<u64>, flags: &[FlagValue]) -> Result<Resolved> {
    let mut merged = serde_json::to_value(RunConfig::default()).map_err(|e| Error::json("default config", e))?;
    let empty = Value::Object(Map::new());
    let file = file.unwrap_or(&empty);
    deep_merge(&mut merged, file);

    let file_seed = match file.get("seed") {
        None => None,
        Some(v) => Some(v.as_u64().ok_or_else(|| Error::config("config seed must be a non-negative integer"))?),
    };
    let global = seed_flag.or(file_seed).unwrap_or(0);
    for p in SEED_PATHS {
        match file.pointer(p) {
            Some(v) => {
                let nested = v.as_u64().ok_or_else(|| Error::config(format!("config {p} must be a non-negative integer")))?;
                if let Some(s) = seed_flag.filter(|&s| s != nested) {
                    return Err(Error::config(format!(
                        "conflicting seeds: --seed {s} but the config file sets {p} = {nested}; drop one of them"
                    )));
                }
                if let Some(s) = file_seed.filter(|&s| s != nested) {
                    return Err(Error::config(format!(
                        "conflicting seeds in config file: seed = {s} but {p} = {nested}"
                    )));
                }
            }
            None => set_pointer(&mut merged, p, Value::from(global)),
        }
    }
    set_pointer(&mut merged, "/seed", Value::from(global));

    let mut overrides = Vec::new();
    for f in flags {
        if let Some(old) = file.pointer(f.pointer).filter(|old| **old != f.value) {
            overrides.push(serde_json::json!({ "flag": f.flag, "key": f.pointer, "file": old, "flag_value": f.value }));
        }
        set_pointer(&mut merged, f.pointer, f.value.clone());
    }
    let config: RunConfig =
        serde_json::from_value(merged).map_err(|e| Error::config(format!("invalid configuration: {e}")))?;
    config.validate()?;
    Ok(Resolved { config, overrides })
}
