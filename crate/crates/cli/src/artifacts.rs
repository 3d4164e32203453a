//! Output-directory bookkeeping: every file a command writes is recorded so
//! a failing command can remove its partial artifacts before exiting.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Numeric(format!("serialization failed: {e}")))?;
        self.write_text(name, &(text + "\n"))
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        std::fs::write(&path, text)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path.clone());
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    /// Streams a writer-based export (CSV and similar) to a file.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), growthsim::Error>,
    {
        let mut buf = Vec::new();
        f(&mut buf).map_err(CliError::from)?;
        let path = self.path(name);
        std::fs::write(&path, &buf)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path.clone());
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    /// Deletes everything written so far (invoked when a command fails).
    pub fn discard(&self) {
        for path in &self.written {
            if std::fs::remove_file(path).is_ok() {
                log::warn!("removed partial artifact {}", path.display());
            }
        }
    }
}
