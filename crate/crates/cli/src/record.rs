//! Run records and crash-safe file output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qsdc_core::{CapError, Result, SweepResult, SweepRow};

use crate::config::RunConfig;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_digest: String,
    pub started: String,
    pub finished: String,
    pub version: String,
    pub config: RunConfig,
    pub rows: Vec<SweepRow>,
    /// One entry per failed grid point: `row <index>: <message>`.
    pub errors: Vec<String>,
}

impl RunRecord {
    pub fn new(config: &RunConfig, result: &SweepResult) -> Self {
        let errors = result
            .rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.error.as_ref().map(|e| format!("row {i}: {e}")))
            .collect();
        Self {
            config_digest: config.digest(),
            started: result.provenance.started.clone(),
            finished: result.provenance.finished.clone(),
            version: result.provenance.version.clone(),
            config: config.clone(),
            rows: result.rows.clone(),
            errors,
        }
    }
}

/// Writes `path` through a temporary file in the same directory and renames
/// it into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    write(tmp.as_file_mut())?;
    tmp.as_file_mut().sync_all()?;
    tmp.persist(path).map_err(|e| CapError::Io(e.error))?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CapError::Io(e.into()))?;
        w.write_all(b"\n")?;
        Ok(())
    })
}
