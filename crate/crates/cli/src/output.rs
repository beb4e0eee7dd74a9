//! Run directory layout: CSV/JSON writers and the replay manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::experiments::ExperimentSpec;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub spec: ExperimentSpec,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn read(path: &Path) -> CliResult<Manifest> {
        let text = fs::read_to_string(path)?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Params(format!("cannot parse manifest {}: {e}", path.display())))?;
        if m.tool != env!("CARGO_PKG_NAME") {
            return Err(CliError::Params(format!("manifest was written by {}", m.tool)));
        }
        Ok(m)
    }
}

/// Collects output files of one run and writes the manifest last.
pub struct RunDir {
    root: PathBuf,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
        let mut w = csv::Writer::from_path(self.root.join(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.root.join(name), text)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn finish(self, spec: &ExperimentSpec) -> CliResult<Manifest> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            spec: spec.clone(),
            outputs: self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST_FILE), text)?;
        Ok(manifest)
    }
}

/// Shortest round-trip formatting for CSV cells.
pub fn num(v: f64) -> String {
    format!("{v}")
}
