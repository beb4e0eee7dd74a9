//! Per-point violation map of one random 2-D scenario polytope.

use polycert_core::polytope::{reduce, HPolytope, RowOrigin, VRep};
use polycert_core::sampling::{sample_2d_halfspaces, test_seed};
use polycert_core::scenario_bounds::{certify_set, CertifyOptions};
use polycert_core::violation::{
    argmax_candidate, auto_grid_step, count_violations, estimate_from_counts, grid_from_vertices,
    EstimateMethod, HalfspaceModel, VertexBound, ViolationEstimate,
};
use polycert_core::{EpsilonTable, ReductionReport};
use serde::{Deserialize, Serialize};

use super::require;
use crate::error::CliResult;
use crate::output::{num, RunDir};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub seed: u64,
    pub n_samples: usize,
    pub n_test: usize,
    pub beta: f64,
    /// Lattice spacing; derived from `grid_target` when absent.
    pub grid_step: Option<f64>,
    pub grid_target: usize,
    /// Half width of the deterministic box around the origin.
    pub box_half_width: f64,
    pub count_deterministic: bool,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            seed: 1,
            n_samples: 100,
            n_test: 10_000,
            beta: 1e-6,
            grid_step: None,
            grid_target: 50_000,
            box_half_width: 20.0,
            count_deterministic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub n_samples: usize,
    pub n_test: usize,
    pub beta: f64,
    pub facet_count: usize,
    pub support_count: usize,
    pub vertex_count: usize,
    pub epsilon: Option<f64>,
    pub grid_step: f64,
    pub grid_points: usize,
    pub set_violation: ViolationEstimate,
    /// Largest estimate over lattice points only.
    pub grid_only_violation: f64,
    pub grid_only_argmax: Vec<f64>,
    pub nearest_vertex: Vec<f64>,
    /// Max-coordinate distance from the argmax to the nearest vertex.
    pub argmax_vertex_distance: f64,
    pub argmax_near_vertex: bool,
    pub vertex_bound: VertexBound,
    pub lemma_margin: f64,
    pub lemma_holds: bool,
    pub bound_holds: Option<bool>,
    pub vertices_match_facets: bool,
}

impl Summary {
    pub fn failed_checks(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.vertices_match_facets {
            out.push(format!(
                "vertex count {} differs from facet count {}",
                self.vertex_count, self.facet_count
            ));
        }
        if !self.lemma_holds {
            out.push("set estimate exceeds the vertex bound".into());
        }
        if self.bound_holds == Some(false) {
            out.push("set estimate exceeds eps(k)".into());
        }
        out
    }
}

/// Box `[-w, w]^2` (deterministic rows first) intersected with `n` sampled
/// halfspaces.
pub fn scenario_polytope(seed: u64, n: usize, half_width: f64) -> CliResult<HPolytope> {
    require(half_width > 0.0, "box half width must be positive")?;
    let mut poly = HPolytope::from_box(&[-half_width; 2], &[half_width; 2])?;
    if n > 0 {
        for (i, h) in sample_2d_halfspaces(seed, n)?.draws.into_iter().enumerate() {
            poly.push(h, RowOrigin::Scenario(i))?;
        }
    }
    Ok(poly)
}

/// Certified level for a reduced polytope, `None` without samples.
pub fn epsilon_for(
    report: &ReductionReport,
    n: usize,
    beta: f64,
    count_deterministic: bool,
) -> CliResult<(usize, Option<f64>)> {
    let opts = CertifyOptions { count_deterministic };
    if n == 0 {
        let k = if count_deterministic { report.facet_count } else { 0 };
        return Ok((k, None));
    }
    let table = EpsilonTable::new(n, beta)?;
    let cert = certify_set(&table, report, opts)?;
    Ok((cert.k, Some(cert.epsilon)))
}

fn chebyshev_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn lemma_margin(v: f64, n_test: usize) -> f64 {
    3.0 * (v * (1.0 - v) / n_test as f64).sqrt()
}

pub fn run(p: &Params, dir: &mut RunDir) -> CliResult<Summary> {
    require(p.n_test > 0, "n_test must be positive")?;
    require(p.beta > 0.0 && p.beta < 1.0, "beta must lie in (0, 1)")?;
    require(p.grid_target > 0, "grid target must be positive")?;
    let poly = scenario_polytope(p.seed, p.n_samples, p.box_half_width)?;
    let report = reduce(&poly)?;
    let vrep = VRep::from_report(&poly, &report, 2)?;
    let (support_count, epsilon) = epsilon_for(&report, p.n_samples, p.beta, p.count_deterministic)?;

    let step = match p.grid_step {
        Some(s) => {
            require(s > 0.0 && s.is_finite(), "grid step must be positive")?;
            s
        }
        None => auto_grid_step(&vrep, p.grid_target),
    };
    let grid = grid_from_vertices(&poly, &vrep, step)?;
    let test = sample_2d_halfspaces(test_seed(p.seed), p.n_test)?.draws;

    let mut candidates = grid.clone();
    candidates.extend(vrep.vertices.iter().cloned());
    let counts = count_violations(&HalfspaceModel, &candidates, &test);
    let set = estimate_from_counts(&candidates, &counts, p.n_test, EstimateMethod::Grid)?;

    let n_grid = grid.len();
    let (grid_only_violation, grid_only_argmax) = match argmax_candidate(&grid, &counts[..n_grid]) {
        Some(i) => (counts[i] as f64 / p.n_test as f64, grid[i].clone()),
        None => (0.0, Vec::new()),
    };

    let vcounts = &counts[n_grid..];
    let worst = argmax_candidate(&vrep.vertices, vcounts).expect("a bounded polygon has vertices");
    let worst_violation = vcounts[worst] as f64 / p.n_test as f64;
    let vertex_bound = VertexBound {
        bound: 3.0 * worst_violation,
        worst_vertex: vrep.vertices[worst].clone(),
        worst_violation,
    };
    let margin = lemma_margin(set.value, p.n_test);

    let (nearest, dist) = vrep
        .vertices
        .iter()
        .map(|v| (v, chebyshev_dist(v, &set.argmax_point)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(v, d)| (v.clone(), d))
        .expect("a bounded polygon has vertices");

    dir.csv(
        "candidates.csv",
        &["candidate_index", "x1", "x2", "violation"],
        candidates.iter().zip(&counts).enumerate().map(|(i, (x, c))| {
            vec![i.to_string(), num(x[0]), num(x[1]), num(*c as f64 / p.n_test as f64)]
        }),
    )?;
    dir.csv(
        "vertices.csv",
        &["vertex_index", "x1", "x2", "violation"],
        vrep.vertices.iter().zip(vcounts).enumerate().map(|(i, (x, c))| {
            vec![i.to_string(), num(x[0]), num(x[1]), num(*c as f64 / p.n_test as f64)]
        }),
    )?;

    let summary = Summary {
        seed: p.seed,
        n_samples: p.n_samples,
        n_test: p.n_test,
        beta: p.beta,
        facet_count: report.facet_count,
        support_count,
        vertex_count: vrep.len(),
        epsilon,
        grid_step: step,
        grid_points: n_grid,
        grid_only_violation,
        grid_only_argmax,
        nearest_vertex: nearest,
        argmax_vertex_distance: dist,
        argmax_near_vertex: dist <= step,
        lemma_holds: set.value <= vertex_bound.bound + margin,
        lemma_margin: margin,
        vertex_bound,
        bound_holds: epsilon.map(|e| set.value <= e),
        vertices_match_facets: vrep.len() == report.facet_count,
        set_violation: set,
    };
    dir.json("summary.json", &summary)?;
    Ok(summary)
}
