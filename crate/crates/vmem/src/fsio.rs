use std::io::Write;
use std::path::Path;

use crate::error::{Result, VmemError};

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| VmemError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| VmemError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| VmemError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| VmemError::io(path, e.error))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| VmemError::io(path, e))
}
