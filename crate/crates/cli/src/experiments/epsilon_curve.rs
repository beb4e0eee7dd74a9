//! Violation level curves `k -> eps(k)` for several sample sizes.

use polycert_core::EpsilonTable;
use serde::{Deserialize, Serialize};

use super::require;
use crate::error::CliResult;
use crate::output::{num, RunDir};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n_samples: Vec<usize>,
    pub beta: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            n_samples: vec![500, 1000, 2000, 5000],
            beta: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub n_samples: usize,
    pub file: String,
    pub eps_at_zero: f64,
    pub condition_sum: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub beta: f64,
    pub curves: Vec<Curve>,
    /// Larger sample sizes give pointwise lower curves on shared `k`.
    pub ordered_by_n: bool,
}

impl Summary {
    pub fn failed_checks(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .curves
            .iter()
            .filter(|c| !c.monotone)
            .map(|c| format!("eps not monotone for N={}", c.n_samples))
            .collect();
        if !self.ordered_by_n {
            out.push("curves not ordered by N".into());
        }
        out
    }
}

pub fn file_name(n: usize) -> String {
    format!("epsilon_N{n}.csv")
}

pub fn run(p: &Params, dir: &mut RunDir) -> CliResult<Summary> {
    require(!p.n_samples.is_empty(), "at least one sample size is required")?;
    let mut ns = p.n_samples.clone();
    ns.sort_unstable();
    ns.dedup();
    let tables = ns
        .iter()
        .map(|&n| EpsilonTable::new(n, p.beta))
        .collect::<Result<Vec<_>, _>>()?;

    let mut curves = Vec::new();
    for t in &tables {
        let n = t.n_samples();
        let values = t.values();
        let name = file_name(n);
        dir.csv(
            &name,
            &["k", "epsilon"],
            values.iter().enumerate().map(|(k, e)| vec![k.to_string(), num(*e)]),
        )?;
        curves.push(Curve {
            n_samples: n,
            file: name,
            eps_at_zero: values[0],
            condition_sum: t.condition_sum(true),
            monotone: values.windows(2).all(|w| w[0] <= w[1]) && values[n] == 1.0,
        });
    }
    let ordered_by_n = tables.windows(2).all(|w| {
        (0..w[0].n_samples()).all(|k| w[1].eps(k) < w[0].eps(k))
    });
    let summary = Summary {
        beta: p.beta,
        curves,
        ordered_by_n,
    };
    dir.json("summary.json", &summary)?;
    Ok(summary)
}
