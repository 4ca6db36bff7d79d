//! Run directories.
//!
//! Files are written into a hidden staging directory next to the target and
//! the staging directory is renamed into place only once the run succeeds.
//! A failed run leaves nothing behind.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::LabError;

pub const SUMMARY_FILE: &str = "summary.json";
pub const SNAPSHOT_FILE: &str = "config.resolved.toml";

#[derive(Debug)]
pub struct RunDir {
    target: PathBuf,
    staging: PathBuf,
    committed: bool,
}

fn staging_path(target: &Path) -> PathBuf {
    let name = target.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    target.with_file_name(format!(".{name}.partial"))
}

impl RunDir {
    /// Refuses a non-empty target unless it holds a previous run, which is
    /// replaced on commit.
    pub fn create(target: &Path) -> Result<Self, LabError> {
        if target.exists() {
            if !target.is_dir() {
                return Err(LabError::Config(format!("{} exists and is not a directory", target.display())));
            }
            let empty = fs::read_dir(target)?.next().is_none();
            if !empty && !target.join(SUMMARY_FILE).is_file() {
                return Err(LabError::Config(format!(
                    "{} is not empty and does not hold a previous run",
                    target.display()
                )));
            }
        }
        if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let staging = staging_path(target);
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging)?;
        Ok(RunDir { target: target.to_path_buf(), staging, committed: false })
    }

    pub fn target(&self) -> &Path {
        &self.target
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.staging.join(name)
    }

    pub fn writer(&self, name: &str) -> Result<BufWriter<File>, LabError> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    pub fn write_string(&self, name: &str, text: &str) -> Result<(), LabError> {
        let mut w = self.writer(name)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<(), LabError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_string(name, &text)
    }

    pub fn commit(mut self) -> Result<PathBuf, LabError> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target)?;
        }
        fs::rename(&self.staging, &self.target)?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}
