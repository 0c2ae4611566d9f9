//! The run's output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ErrorKind, PipelineError, FAILED_MARKER};

pub(super) struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::new("write", ErrorKind::Io, format!("{}: {e}", path.display()))
}

impl Output {
    /// Creates the directory and clears a marker left by an earlier failure.
    pub(super) fn create(dir: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let marker = dir.join(FAILED_MARKER);
        if marker.exists() {
            fs::remove_file(&marker).map_err(|e| io_error(&marker, e))?;
        }
        Ok(Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub(super) fn files(&self) -> &[String] {
        &self.files
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub(super) fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(&self.dir.join(name), e))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub(super) fn csv<H, R, I>(&mut self, name: &str, header: &[H], rows: I) -> Result<(), PipelineError>
    where
        H: AsRef<str>,
        R: IntoIterator,
        R::Item: AsRef<str>,
        I: IntoIterator<Item = R>,
    {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header.iter().map(|h| h.as_ref())).map_err(|e| io_error(&path, e))?;
        for row in rows {
            let cells: Vec<String> = row.into_iter().map(|c| c.as_ref().to_string()).collect();
            w.write_record(&cells).map_err(|e| io_error(&path, e))?;
        }
        let bytes = w.into_inner().map_err(|e| io_error(&path, e))?;
        self.write(name, &bytes)
    }

    pub(super) fn mark_failed(&mut self, e: &PipelineError) -> Result<(), PipelineError> {
        let text = format!("stage: {}\nerror: {}\n", e.stage, e.message);
        self.write(FAILED_MARKER, text.as_bytes())
    }
}
