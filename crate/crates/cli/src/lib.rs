//! Experiment drivers behind the `polycert` binary.
//!
//! Every run writes plot-ready CSV files, a `summary.json` and a
//! `manifest.json` holding the full [`ExperimentSpec`]; replaying the
//! manifest reproduces the CSV files byte for byte.

pub mod error;
pub mod experiments;
pub mod output;

pub use error::{CliError, CliResult};
pub use experiments::{run, run_checked, ExperimentSpec, Outcome};
pub use output::{Manifest, MANIFEST_FILE};

use std::path::Path;

/// Re-runs the experiment recorded in a manifest into `out`.
pub fn replay(manifest: &Path, out: &Path) -> CliResult<(Outcome, Manifest)> {
    let m = Manifest::read(manifest)?;
    run_checked(&m.spec, out)
}
