//! Line-oriented JSON event log.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Appends one JSON object per line to a file and optionally echoes a short
/// human-readable form to standard error. Events carry no timestamps so that
/// reruns produce identical logs.
#[derive(Debug, Default)]
pub struct RunLog {
    file: Option<File>,
    echo: bool,
}

impl RunLog {
    /// A log that discards everything.
    pub fn null() -> Self {
        Self::default()
    }

    pub fn stderr() -> Self {
        Self { file: None, echo: true }
    }

    /// Opens `path` for appending (`truncate = false`) or rewriting.
    pub fn open(path: &Path, truncate: bool, echo: bool) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(!truncate)
            .truncate(truncate)
            .open(path)
            .map_err(|e| Error::io(format!("opening log {}", path.display()), e))?;
        Ok(Self { file: Some(file), echo })
    }

    /// Records `{"event": name, ...fields}`. Non-object `fields` are stored
    /// under `"data"`.
    pub fn event(&mut self, name: &str, fields: Value) -> Result<()> {
        let mut obj = Map::new();
        obj.insert("event".into(), Value::String(name.into()));
        match fields {
            Value::Object(m) => obj.extend(m),
            Value::Null => {}
            other => {
                obj.insert("data".into(), other);
            }
        }
        let line = Value::Object(obj).to_string();
        if self.echo {
            eprintln!("{line}");
        }
        if let Some(f) = &mut self.file {
            writeln!(f, "{line}").map_err(|e| Error::io("writing log", e))?;
        }
        Ok(())
    }
}
