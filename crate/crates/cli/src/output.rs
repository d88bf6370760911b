//! CSV and JSON writers shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const VERSION: &str = concat!("flipflop-cli ", env!("CARGO_PKG_VERSION"));

/// Columns of every per-sample trajectory CSV.
pub const TRAJECTORY_COLUMNS: [&str; 7] = ["time_us", "n_a", "n_b", "p_qa", "p_qb", "ta_fg", "tb_fg"];

/// Fixed 12-significant-digit formatting; infinities print as `inf`/`-inf`.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == 0.0 {
        // folds -0 into 0
        format!("{:.11e}", 0.0)
    } else {
        format!("{v:.11e}")
    }
}

/// Collects output files and writes them in one place.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes a header row followed by `columns` (one vector per column,
    /// equal lengths).
    pub fn write_columns(&mut self, name: &str, header: &[&str], columns: &[&[f64]]) -> Result<(), CliError> {
        let rows = columns.first().map_or(0, |c| c.len());
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for i in 0..rows {
            w.write_record(columns.iter().map(|c| format_number(c[i])))?;
        }
        w.flush()?;
        self.written.push(name.into());
        Ok(())
    }

    /// Writes pre-formatted string records.
    pub fn write_records(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.written.push(name.into());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        self.written.push(name.into());
        Ok(())
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(mut self, command: &str, config: Option<&ExperimentConfig>) -> Result<Vec<String>, CliError> {
        let manifest = Manifest {
            version: VERSION,
            command,
            outputs: self.written.clone(),
            config: config.map(serde_json::to_value).transpose()?,
            config_toml: config.map(ExperimentConfig::to_toml),
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(self.written)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    command: &'a str,
    outputs: Vec<String>,
    /// Resolved config; non-finite numbers appear as null here and verbatim
    /// in `config_toml`.
    config: Option<serde_json::Value>,
    config_toml: Option<String>,
}
