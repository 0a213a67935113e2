use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

/// Which augmentation produced a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Augmentation {
    Flip,
    CropLeft,
    CropRight,
}

impl Augmentation {
    pub const ALL: [Augmentation; 3] = [Augmentation::Flip, Augmentation::CropLeft, Augmentation::CropRight];

    pub fn as_str(self) -> &'static str {
        match self {
            Augmentation::Flip => "flip",
            Augmentation::CropLeft => "crop_left",
            Augmentation::CropRight => "crop_right",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    Original,
    Augmented(Augmentation),
    Synthetic,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Original => f.write_str("original"),
            Origin::Synthetic => f.write_str("synthetic"),
            Origin::Augmented(a) => write!(f, "augmented:{}", a.as_str()),
        }
    }
}

impl FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "original" => Origin::Original,
            "synthetic" => Origin::Synthetic,
            "augmented:flip" => Origin::Augmented(Augmentation::Flip),
            "augmented:crop_left" => Origin::Augmented(Augmentation::CropLeft),
            "augmented:crop_right" => Origin::Augmented(Augmentation::CropRight),
            other => return Err(Error::Manifest(format!("unknown origin {other:?}"))),
        })
    }
}

impl Serialize for Origin {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Origin {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Origin {
    pub fn is_augmented(self) -> bool {
        matches!(self, Origin::Augmented(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub id: String,
    /// Image path, relative to the manifest's directory unless absolute.
    pub path: String,
    pub label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    /// `"0"` and `"1"` to display names.
    pub class_names: BTreeMap<String, String>,
    pub samples: Vec<SampleRecord>,
    /// Free-form note on how the manifest was derived.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(skip)]
    pub root: PathBuf,
}

pub fn default_class_names() -> BTreeMap<String, String> {
    BTreeMap::from([("0".to_string(), "class_0".to_string()), ("1".to_string(), "class_1".to_string())])
}

/// Serialises with keys in sorted order and a trailing newline, so that
/// identical manifests are byte-identical on disk.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::json("serialize", e))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::json("serialize", e))?;
    s.push('\n');
    Ok(s)
}

impl DatasetManifest {
    pub fn new(class_names: BTreeMap<String, String>, samples: Vec<SampleRecord>, root: impl Into<PathBuf>) -> Self {
        Self { version: MANIFEST_VERSION, class_names, samples, provenance: None, root: root.into() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn resolve(&self, record: &SampleRecord) -> PathBuf {
        self.root.join(&record.path)
    }

    pub fn get(&self, id: &str) -> Option<&SampleRecord> {
        self.samples.iter().find(|s| s.id == id)
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Number of samples per label, `[count(0), count(1)]`.
    pub fn label_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for s in &self.samples {
            c[s.label as usize] += 1;
        }
        c
    }

    /// Every structural invariant except file existence.
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Manifest(format!("unsupported manifest version {}", self.version)));
        }
        if self.samples.is_empty() {
            return Err(Error::Manifest("manifest has no samples".into()));
        }
        let mut by_id: HashMap<&str, &SampleRecord> = HashMap::with_capacity(self.samples.len());
        for s in &self.samples {
            if s.label > 1 {
                return Err(Error::Manifest(format!("sample {:?} has label {}, expected 0 or 1", s.id, s.label)));
            }
            if by_id.insert(&s.id, s).is_some() {
                return Err(Error::Manifest(format!("duplicate sample id {:?}", s.id)));
            }
        }
        for s in &self.samples {
            match (s.origin.is_augmented(), &s.parent_id) {
                (true, None) => {
                    return Err(Error::Manifest(format!("augmented sample {:?} has no parent_id", s.id)));
                }
                (true, Some(p)) => {
                    let parent = by_id
                        .get(p.as_str())
                        .ok_or_else(|| Error::Manifest(format!("sample {:?}: parent {p:?} not in manifest", s.id)))?;
                    if parent.label != s.label || parent.group != s.group {
                        return Err(Error::Manifest(format!(
                            "sample {:?} does not share label/group with parent {p:?}",
                            s.id
                        )));
                    }
                }
                (false, Some(_)) => {
                    return Err(Error::Manifest(format!("non-augmented sample {:?} has a parent_id", s.id)));
                }
                (false, None) => {}
            }
        }
        Ok(())
    }

    pub fn check_files(&self) -> Result<()> {
        for s in &self.samples {
            let p = self.resolve(s);
            if !p.is_file() {
                return Err(Error::Manifest(format!("sample {:?}: file {} not found", s.id, p.display())));
            }
        }
        Ok(())
    }

    /// Group tags in first-seen order.
    pub fn groups(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.samples
            .iter()
            .filter_map(|s| s.group.clone())
            .filter(|g| seen.insert(g.clone()))
            .collect()
    }

    /// Copy whose relative paths are rewritten so they resolve from `dir`.
    /// Paths stay relative where possible, so a directory tree can be moved
    /// as a whole; absolute paths are left alone.
    pub fn rebased(&self, dir: &Path) -> DatasetManifest {
        let mut m = self.clone();
        if dir != self.root {
            let absolute = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
            let to = absolute(dir);
            for s in &mut m.samples {
                let p = Path::new(&s.path);
                if p.is_relative() {
                    let abs = absolute(&self.root.join(p));
                    let new = pathdiff::diff_paths(&abs, &to).unwrap_or(abs);
                    s.path = new.to_string_lossy().into_owned();
                }
            }
        }
        m.root = dir.to_path_buf();
        m
    }

    /// Subset with the given ids, keeping manifest order.
    pub fn subset(&self, keep: &HashSet<&str>) -> DatasetManifest {
        let mut m = self.clone();
        m.samples.retain(|s| keep.contains(s.id.as_str()));
        m
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading manifest {}", path.display()), e))?;
    let mut m: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::json(format!("parsing manifest {}", path.display()), e))?;
    m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    m.validate()?;
    m.check_files()?;
    Ok(m)
}

/// Writes the manifest in canonical form. Relative sample paths are
/// rebased when the target directory differs from the manifest's root.
pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let m = manifest.rebased(&dir);
    m.validate()?;
    std::fs::write(path, canonical_json(&m)?).map_err(|e| Error::io(format!("writing manifest {}", path.display()), e))
}
