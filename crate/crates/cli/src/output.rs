//! Artifact writers: UTF-8 CSV with `,` delimiter and `.` decimals
//! (locale-free by construction), pretty JSON reports, and crash-safe run
//! directories (written to a temp sibling, renamed into place on completion).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

/// Staging area for one run's artifacts.
pub struct RunDir {
    final_dir: PathBuf,
    tmp_dir: PathBuf,
}

impl RunDir {
    /// Creates the temp sibling `<dir>.tmp-<pid>`.
    pub fn stage(final_dir: &Path) -> Result<Self> {
        let tmp_dir = final_dir.with_file_name(format!(
            "{}.tmp-{}",
            final_dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into()),
            std::process::id()
        ));
        if tmp_dir.exists() {
            fs::remove_dir_all(&tmp_dir).map_err(|source| CliError::Io {
                path: tmp_dir.clone(),
                source,
            })?;
        }
        fs::create_dir_all(&tmp_dir).map_err(|source| CliError::Io {
            path: tmp_dir.clone(),
            source,
        })?;
        Ok(Self {
            final_dir: final_dir.to_path_buf(),
            tmp_dir,
        })
    }

    /// Path of a staged artifact.
    pub fn file(&self, name: &str) -> PathBuf {
        self.tmp_dir.join(name)
    }

    /// Renames the staged directory into place, replacing any previous run.
    pub fn commit(self) -> Result<PathBuf> {
        if self.final_dir.exists() {
            fs::remove_dir_all(&self.final_dir).map_err(|source| CliError::Io {
                path: self.final_dir.clone(),
                source,
            })?;
        }
        if let Some(parent) = self.final_dir.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(|source| CliError::Io {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
        }
        fs::rename(&self.tmp_dir, &self.final_dir).map_err(|source| CliError::Io {
            path: self.final_dir.clone(),
            source,
        })?;
        Ok(self.final_dir)
    }
}

/// Writes a CSV file with a header row; every run of the same data produces
/// identical bytes.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "{}", header.join(","));
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let _ = writeln!(text, "{}", row.join(","));
    }
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty JSON plus trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Shortest-roundtrip decimal formatting (deterministic, locale-free).
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
