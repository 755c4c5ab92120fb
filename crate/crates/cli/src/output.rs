use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::commands::CliError;

/// Written once per output directory; enough to rerun the command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub command: String,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub tool_version: &'static str,
    pub wall_time_ms: f64,
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::User(format!("cannot create {}: {e}", dir.display())))
}

pub fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| CliError::User(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(ammq_core::Error::from)?;
    writeln!(w).map_err(ammq_core::Error::from)?;
    w.flush().map_err(ammq_core::Error::from)?;
    Ok(())
}
