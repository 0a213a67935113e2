use std::path::Path;

use crate::error::{Error, Result};

/// Writes through a sibling temporary file and a rename, so an interrupted
/// run never leaves a half-written artifact under the final name.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming into {}", path.display()), e))
}
