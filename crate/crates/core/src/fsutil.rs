//! Small filesystem helpers for all-or-nothing outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{io_err, Result};

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = parent_dir(path);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err(&dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| crate::error::Error::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

pub(crate) fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Relative paths of all regular files under `root`, sorted.
pub fn list_files(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).expect("walk stays under root").to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}

/// True when both trees hold the same relative paths with identical bytes.
pub fn trees_equal(a: &Path, b: &Path) -> Result<bool> {
    let (fa, fb) = (list_files(a)?, list_files(b)?);
    if fa != fb {
        return Ok(false);
    }
    for rel in fa {
        let (pa, pb) = (a.join(&rel), b.join(&rel));
        if fs::read(&pa).map_err(io_err(&pa))? != fs::read(&pb).map_err(io_err(&pb))? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Replaces directory `dest` by `staged` (same filesystem). The previous
/// contents, if any, are removed only after the new tree is in place.
pub fn swap_dir(staged: &Path, dest: &Path) -> Result<()> {
    if dest.exists() {
        let old = dest.with_extension(format!("old-{}", std::process::id()));
        fs::rename(dest, &old).map_err(io_err(dest))?;
        fs::rename(staged, dest).map_err(io_err(dest))?;
        fs::remove_dir_all(&old).map_err(io_err(&old))?;
    } else {
        fs::rename(staged, dest).map_err(io_err(dest))?;
    }
    Ok(())
}
