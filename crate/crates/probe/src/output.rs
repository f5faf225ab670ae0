//! Output directory handling shared by the commands.

use std::fs;
use std::path::Path;

use crate::dataset::MANIFEST;
use crate::error::{Error, Result};

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::data(format!("{}: {e}", path.display()))
}

/// Makes `dir` ready to receive a fresh dataset.
///
/// A previous dataset (manifest plus `videos/`) is removed so reruns produce
/// identical trees; any other non-empty directory is refused.
pub fn prepare_dataset_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        if dir.join(MANIFEST).is_file() {
            let videos = dir.join("videos");
            if videos.exists() {
                fs::remove_dir_all(&videos).map_err(|e| io(&videos, e))?;
            }
            let manifest = dir.join(MANIFEST);
            fs::remove_file(&manifest).map_err(|e| io(&manifest, e))?;
        } else if fs::read_dir(dir).map_err(|e| io(dir, e))?.next().is_some() {
            return Err(Error::data(format!(
                "{} is not empty and holds no dataset; refusing to write into it",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

/// Writes through a temporary file and a rename, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report values serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
