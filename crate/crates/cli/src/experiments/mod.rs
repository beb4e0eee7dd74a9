//! One module per experiment. Each takes plain parameters, writes its files
//! into a [`RunDir`] and returns a summary that is also saved as
//! `summary.json` (where applicable).

pub mod epsilon_curve;
pub mod ev_game;
pub mod polytope_2d;
pub mod validate_bound;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output::{Manifest, RunDir};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    EpsilonCurve(epsilon_curve::Params),
    #[serde(rename = "polytope-2d")]
    Polytope2d(polytope_2d::Params),
    ValidateBound(validate_bound::Params),
    EvGame(ev_game::Params),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    EpsilonCurve(epsilon_curve::Summary),
    Polytope2d(polytope_2d::Summary),
    ValidateBound(validate_bound::Summary),
    EvGame(ev_game::Summary),
}

impl Outcome {
    /// Names of in-process checks that failed.
    pub fn failed_checks(&self) -> Vec<String> {
        match self {
            Outcome::EpsilonCurve(s) => s.failed_checks(),
            Outcome::Polytope2d(s) => s.failed_checks(),
            Outcome::ValidateBound(s) => s.failed_checks(),
            Outcome::EvGame(s) => s.failed_checks(),
        }
    }
}

/// Runs an experiment into `out` and writes its manifest. Failed in-process
/// checks are reported as an invariant breach after all files are written.
pub fn run(spec: &ExperimentSpec, out: &Path) -> CliResult<(Outcome, Manifest)> {
    let mut dir = RunDir::create(out)?;
    let outcome = match spec {
        ExperimentSpec::EpsilonCurve(p) => Outcome::EpsilonCurve(epsilon_curve::run(p, &mut dir)?),
        ExperimentSpec::Polytope2d(p) => Outcome::Polytope2d(polytope_2d::run(p, &mut dir)?),
        ExperimentSpec::ValidateBound(p) => Outcome::ValidateBound(validate_bound::run(p, &mut dir)?),
        ExperimentSpec::EvGame(p) => Outcome::EvGame(ev_game::run(p, &mut dir)?),
    };
    let manifest = dir.finish(spec)?;
    Ok((outcome, manifest))
}

/// Like [`run`] but turns failed checks into [`CliError::Invariant`].
pub fn run_checked(spec: &ExperimentSpec, out: &Path) -> CliResult<(Outcome, Manifest)> {
    let (outcome, manifest) = run(spec, out)?;
    let failed = outcome.failed_checks();
    if failed.is_empty() {
        Ok((outcome, manifest))
    } else {
        Err(CliError::Invariant(failed.join("; ")))
    }
}

pub(crate) fn require(cond: bool, msg: impl Into<String>) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Params(msg.into()))
    }
}
