//! Worst empirical violation per facet count against `eps(k)` over many
//! independent 2-D polytopes.

use std::collections::BTreeMap;

use polycert_core::polytope::{reduce, VRep};
use polycert_core::sampling::{derive_seed, sample_2d_halfspaces, test_seed};
use polycert_core::violation::{
    auto_grid_step, count_violations, estimate_from_counts, grid_from_vertices, EstimateMethod,
    HalfspaceModel,
};
use polycert_core::EpsilonTable;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::polytope_2d::scenario_polytope;
use super::require;
use crate::error::CliResult;
use crate::output::{num, RunDir};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub seed: u64,
    pub n_polytopes: usize,
    pub n_samples: usize,
    pub n_test: usize,
    pub beta: f64,
    pub grid_target: usize,
    pub box_half_width: f64,
    pub count_deterministic: bool,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            seed: 1,
            n_polytopes: 20,
            n_samples: 2000,
            n_test: 20_000,
            beta: 1e-6,
            grid_target: 10_000,
            box_half_width: 20.0,
            count_deterministic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolytopeResult {
    pub index: usize,
    pub seed: u64,
    pub facet_count: usize,
    pub support_count: usize,
    pub epsilon: f64,
    pub violation: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Group {
    pub k: usize,
    pub epsilon: f64,
    pub worst_violation: f64,
    pub n_polytopes: usize,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n_polytopes: usize,
    pub n_samples: usize,
    pub n_test: usize,
    pub beta: f64,
    pub polytopes: Vec<PolytopeResult>,
    pub groups: Vec<Group>,
    pub all_hold: bool,
}

impl Summary {
    pub fn failed_checks(&self) -> Vec<String> {
        self.groups
            .iter()
            .filter(|g| !g.holds)
            .map(|g| format!("k={}: worst violation {} exceeds eps {}", g.k, g.worst_violation, g.epsilon))
            .collect()
    }
}

fn one(p: &Params, table: &EpsilonTable, index: usize) -> CliResult<PolytopeResult> {
    let seed = derive_seed(p.seed, index as u64);
    let poly = scenario_polytope(seed, p.n_samples, p.box_half_width)?;
    let report = reduce(&poly)?;
    let vrep = VRep::from_report(&poly, &report, 2)?;
    let step = auto_grid_step(&vrep, p.grid_target);
    let mut candidates = grid_from_vertices(&poly, &vrep, step)?;
    candidates.extend(vrep.vertices);
    let test = sample_2d_halfspaces(test_seed(seed), p.n_test)?.draws;
    let counts = count_violations(&HalfspaceModel, &candidates, &test);
    let est = estimate_from_counts(&candidates, &counts, p.n_test, EstimateMethod::Grid)?;
    let cert = polycert_core::certify_set(
        table,
        &report,
        polycert_core::scenario_bounds::CertifyOptions {
            count_deterministic: p.count_deterministic,
        },
    )?;
    Ok(PolytopeResult {
        index,
        seed,
        facet_count: report.facet_count,
        support_count: cert.k,
        epsilon: cert.epsilon,
        violation: est.value,
        wilson_low: est.wilson_low,
        wilson_high: est.wilson_high,
        candidates: candidates.len(),
    })
}

pub fn run(p: &Params, dir: &mut RunDir) -> CliResult<Summary> {
    require(p.n_polytopes > 0, "n_polytopes must be positive")?;
    require(p.n_samples > 0, "n_samples must be positive")?;
    require(p.n_test > 0, "n_test must be positive")?;
    require(p.grid_target > 0, "grid target must be positive")?;
    let table = EpsilonTable::new(p.n_samples, p.beta)?;

    let polytopes = (0..p.n_polytopes)
        .into_par_iter()
        .map(|i| {
            let r = one(p, &table, i);
            if let Ok(r) = &r {
                log::info!("polytope {i}: k={} violation={}", r.support_count, r.violation);
            }
            r
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut by_k: BTreeMap<usize, Vec<&PolytopeResult>> = BTreeMap::new();
    for r in &polytopes {
        by_k.entry(r.support_count).or_default().push(r);
    }
    let groups: Vec<Group> = by_k
        .into_iter()
        .map(|(k, rs)| {
            let worst = rs.iter().map(|r| r.violation).fold(0.0, f64::max);
            let epsilon = table.eps(k);
            Group {
                k,
                epsilon,
                worst_violation: worst,
                n_polytopes: rs.len(),
                holds: worst <= epsilon,
            }
        })
        .collect();

    dir.csv(
        "bound.csv",
        &["k", "epsilon", "worst_violation", "n_polytopes"],
        groups.iter().map(|g| {
            vec![g.k.to_string(), num(g.epsilon), num(g.worst_violation), g.n_polytopes.to_string()]
        }),
    )?;
    dir.csv(
        "polytopes.csv",
        &["polytope", "seed", "facet_count", "k", "epsilon", "violation", "wilson_low", "wilson_high"],
        polytopes.iter().map(|r| {
            vec![
                r.index.to_string(),
                r.seed.to_string(),
                r.facet_count.to_string(),
                r.support_count.to_string(),
                num(r.epsilon),
                num(r.violation),
                num(r.wilson_low),
                num(r.wilson_high),
            ]
        }),
    )?;
    let summary = Summary {
        n_polytopes: p.n_polytopes,
        n_samples: p.n_samples,
        n_test: p.n_test,
        beta: p.beta,
        all_hold: groups.iter().all(|g| g.holds),
        polytopes,
        groups,
    };
    dir.json("summary.json", &summary)?;
    Ok(summary)
}
