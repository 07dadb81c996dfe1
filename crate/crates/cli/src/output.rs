//! Writing artifacts below the output directory.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub struct Output {
    root: PathBuf,
    written: std::sync::Mutex<Vec<PathBuf>>,
}

impl Output {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Output {
            root: root.into(),
            written: Default::default(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&self, rel: impl AsRef<Path>, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.path(rel);
        let io = |source| CliError::Io {
            path: path.clone(),
            source,
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        std::fs::write(&path, contents).map_err(io)?;
        self.written.lock().unwrap().push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(
        &self,
        rel: impl AsRef<Path>,
        value: &T,
    ) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        self.write(rel, &text)
    }

    /// Paths written so far, sorted.
    pub fn written(&self) -> Vec<PathBuf> {
        let mut w = self.written.lock().unwrap().clone();
        w.sort();
        w.dedup();
        w
    }
}
