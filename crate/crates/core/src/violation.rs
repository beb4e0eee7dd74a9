//! Monte-Carlo violation estimates for points and sets.
//!
//! A scenario `delta` violates `x` when `g(x, delta) > 1e-12`. Set estimates
//! take the maximum of point estimates over a finite candidate set, so they
//! are lower bounds on the supremum over the set.

use std::cmp::Ordering;

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::{reduce, HPolytope, Halfspace, VRep, DEFAULT_VERTEX_DIM_CAP};
use crate::sampling::{rng_from_seed, EvScenario};

/// Constraint excess above which a scenario counts as violated.
pub const VIOLATION_TOL: f64 = 1e-12;

/// Membership tolerance for hit-and-run output.
const HIT_AND_RUN_TOL: f64 = 1e-9;

const WILSON_Z: f64 = 1.959_963_984_540_054;

/// How a constraint realization acts on a point.
pub trait ViolationModel: Sync {
    type Scenario: Sync;

    fn violates(&self, scenario: &Self::Scenario, x: &[f64]) -> bool;
}

/// Scenarios are single halfspaces `a . x <= b`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HalfspaceModel;

impl ViolationModel for HalfspaceModel {
    type Scenario = Halfspace;

    fn violates(&self, h: &Halfspace, x: &[f64]) -> bool {
        h.excess(x) > VIOLATION_TOL
    }
}

/// EV charging constraints for a flattened schedule (agent-major, `M * d`).
/// A scenario is violated when some `x[m][t]` leaves
/// `[lower[t], upper_nominal[t] + delta_u[m][t]]` or some agent's total
/// falls below `(1 - delta_e[m]) * energy_nominal[m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvModel {
    pub upper_nominal: Vec<f64>,
    pub lower: Vec<f64>,
    pub energy_nominal: Vec<f64>,
}

impl EvModel {
    pub fn horizon(&self) -> usize {
        self.upper_nominal.len()
    }
}

impl ViolationModel for EvModel {
    type Scenario = EvScenario;

    fn violates(&self, s: &EvScenario, x: &[f64]) -> bool {
        let d = self.horizon();
        for (m, xs) in x.chunks_exact(d).enumerate() {
            let mut total = 0.0;
            for t in 0..d {
                let v = xs[t];
                if v - (self.upper_nominal[t] + s.delta_u[m][t]) > VIOLATION_TOL
                    || self.lower[t] - v > VIOLATION_TOL
                {
                    return true;
                }
                total += v;
            }
            if (1.0 - s.delta_e[m]) * self.energy_nominal[m] - total > VIOLATION_TOL {
                return true;
            }
        }
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Point,
    Grid,
    HitAndRun,
    Vertices,
    Candidates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationEstimate {
    pub value: f64,
    pub n_test: usize,
    pub violations: u64,
    pub argmax_point: Vec<f64>,
    pub method: EstimateMethod,
    pub n_candidates: usize,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl ViolationEstimate {
    fn new(point: Vec<f64>, violations: u64, n_test: usize, method: EstimateMethod, n_candidates: usize) -> Self {
        let (wilson_low, wilson_high) = wilson_interval(violations, n_test as u64);
        Self {
            value: violations as f64 / n_test as f64,
            n_test,
            violations,
            argmax_point: point,
            method,
            n_candidates,
            wilson_low,
            wilson_high,
        }
    }
}

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if p == 1.0 { 1.0 } else { (center + half).min(1.0) };
    (low, high)
}

/// Number of test scenarios violating `x`.
pub fn count_point<M: ViolationModel>(model: &M, x: &[f64], test: &[M::Scenario]) -> u64 {
    test.par_iter()
        .with_min_len(1024)
        .filter(|s| model.violates(s, x))
        .count() as u64
}

/// Violation counts for each point over the same test scenarios.
pub fn count_violations<M: ViolationModel>(
    model: &M,
    points: &[Vec<f64>],
    test: &[M::Scenario],
) -> Vec<u64> {
    points
        .par_iter()
        .map(|x| test.iter().filter(|s| model.violates(s, x)).count() as u64)
        .collect()
}

pub fn point_violation<M: ViolationModel>(
    model: &M,
    x: &[f64],
    test: &[M::Scenario],
) -> Result<ViolationEstimate> {
    if test.is_empty() {
        return Err(Error::InvalidParameters("empty test set".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameters("point has non-finite entries".into()));
    }
    let k = count_point(model, x, test);
    Ok(ViolationEstimate::new(x.to_vec(), k, test.len(), EstimateMethod::Point, 1))
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Index of the largest count; ties go to the lexicographically smallest
/// point.
pub fn argmax_candidate(points: &[Vec<f64>], counts: &[u64]) -> Option<usize> {
    (0..points.len()).reduce(|best, i| match counts[i].cmp(&counts[best]) {
        Ordering::Greater => i,
        Ordering::Equal if lex_cmp(&points[i], &points[best]).is_lt() => i,
        _ => best,
    })
}

/// Set estimate from precomputed counts.
pub fn estimate_from_counts(
    points: &[Vec<f64>],
    counts: &[u64],
    n_test: usize,
    method: EstimateMethod,
) -> Result<ViolationEstimate> {
    if n_test == 0 {
        return Err(Error::InvalidParameters("empty test set".into()));
    }
    let best = argmax_candidate(points, counts)
        .ok_or_else(|| Error::InvalidParameters("no candidate points".into()))?;
    Ok(ViolationEstimate::new(
        points[best].clone(),
        counts[best],
        n_test,
        method,
        points.len(),
    ))
}

/// Lattice points `step * Z^2` inside a bounded 2-D polytope (tolerance 0).
pub fn grid_points(poly: &HPolytope, step: f64) -> Result<Vec<Vec<f64>>> {
    if poly.dim() != 2 {
        return Err(Error::DimensionTooLarge {
            dim: poly.dim(),
            cap: 2,
        });
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameters(format!("grid step must be positive, got {step}")));
    }
    let report = reduce(poly)?;
    let vrep = VRep::from_report(poly, &report, 2)?;
    grid_from_vertices(poly, &vrep, step)
}

pub fn grid_from_vertices(poly: &HPolytope, vrep: &VRep, step: f64) -> Result<Vec<Vec<f64>>> {
    let (lo, hi) = bounding_box(vrep);
    let range = |k: usize| {
        let first = (lo[k] / step - 1e-9).ceil() as i64;
        let last = (hi[k] / step + 1e-9).floor() as i64;
        first..=last
    };
    let count = (range(0).count() as u128) * (range(1).count() as u128);
    if count > 50_000_000 {
        return Err(Error::InvalidParameters(format!(
            "grid step {step} yields {count} lattice points"
        )));
    }
    let mut out = Vec::new();
    for i in range(0) {
        for j in range(1) {
            let x = vec![i as f64 * step, j as f64 * step];
            if poly.contains(&x, 0.0) {
                out.push(x);
            }
        }
    }
    Ok(out)
}

fn bounding_box(vrep: &VRep) -> (Vec<f64>, Vec<f64>) {
    let d = vrep.vertices.first().map_or(0, Vec::len);
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for v in &vrep.vertices {
        for k in 0..d {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    (lo, hi)
}

/// Grid step giving roughly `target` lattice points inside a 2-D polytope.
pub fn auto_grid_step(vrep: &VRep, target: usize) -> f64 {
    let v = &vrep.vertices;
    let n = v.len();
    let twice_area: f64 = (0..n)
        .map(|i| {
            let (p, q) = (&v[i], &v[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    (twice_area.abs() / 2.0 / target as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitAndRunParams {
    pub n_points: usize,
    pub seed: u64,
    pub burn_in: usize,
    /// Steps between recorded points.
    pub thin: usize,
}

impl HitAndRunParams {
    pub fn new(n_points: usize, seed: u64) -> Self {
        Self {
            n_points,
            seed,
            burn_in: 1000,
            thin: 10,
        }
    }
}

/// Hit-and-run random walk with Gaussian directions, approximately uniform
/// over a bounded polytope.
pub fn hit_and_run(poly: &HPolytope, start: &[f64], params: HitAndRunParams) -> Result<Vec<Vec<f64>>> {
    if start.len() != poly.dim() {
        return Err(Error::DimensionMismatch {
            expected: poly.dim(),
            got: start.len(),
        });
    }
    if poly.rows().iter().any(|r| r.excess(start) >= 0.0) {
        return Err(Error::NotInterior);
    }
    let d = poly.dim();
    let thin = params.thin.max(1);
    let mut rng = rng_from_seed(params.seed);
    let mut x = start.to_vec();
    let mut dir = vec![0.0; d];
    let mut out = Vec::with_capacity(params.n_points);
    let mut step = 0usize;
    while out.len() < params.n_points {
        for v in dir.iter_mut() {
            *v = crate::sampling::inverse_normal_cdf(rng.sample(Open01));
        }
        let (mut t_lo, mut t_hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for r in poly.rows() {
            let ad: f64 = r.a().iter().zip(&dir).map(|(a, v)| a * v).sum();
            let slack = -r.excess(&x);
            if ad > 1e-300 {
                t_hi = t_hi.min(slack / ad);
            } else if ad < -1e-300 {
                t_lo = t_lo.max(slack / ad);
            }
        }
        if !t_lo.is_finite() || !t_hi.is_finite() {
            return Err(Error::Unbounded);
        }
        let t = t_lo + (t_hi - t_lo) * rng.sample::<f64, _>(Open01);
        let candidate: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
        if poly.contains(&candidate, HIT_AND_RUN_TOL) {
            x = candidate;
        }
        step += 1;
        if step > params.burn_in && (step - params.burn_in).is_multiple_of(thin) {
            out.push(x.clone());
        }
    }
    Ok(out)
}

/// Candidate points for a set estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum Candidates {
    Grid { step: f64 },
    HitAndRun(HitAndRunParams),
    Vertices,
    Points(Vec<Vec<f64>>),
}

/// Max of point estimates over the candidates; vertices are always added
/// when the dimension allows enumerating them.
pub fn set_violation<M: ViolationModel>(
    model: &M,
    poly: &HPolytope,
    test: &[M::Scenario],
    candidates: &Candidates,
) -> Result<ViolationEstimate> {
    if test.is_empty() {
        return Err(Error::InvalidParameters("empty test set".into()));
    }
    let report = reduce(poly)?;
    let vrep = if poly.dim() <= DEFAULT_VERTEX_DIM_CAP {
        Some(VRep::from_report(poly, &report, DEFAULT_VERTEX_DIM_CAP)?)
    } else {
        None
    };
    let (mut points, method) = match candidates {
        Candidates::Grid { step } => {
            let vrep = vrep.as_ref().filter(|_| poly.dim() == 2).ok_or(Error::DimensionTooLarge {
                dim: poly.dim(),
                cap: 2,
            })?;
            if !(*step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidParameters(format!("grid step must be positive, got {step}")));
            }
            (grid_from_vertices(poly, vrep, *step)?, EstimateMethod::Grid)
        }
        Candidates::HitAndRun(params) => (
            hit_and_run(poly, &report.interior_point, *params)?,
            EstimateMethod::HitAndRun,
        ),
        Candidates::Vertices => {
            if vrep.is_none() {
                return Err(Error::DimensionTooLarge {
                    dim: poly.dim(),
                    cap: DEFAULT_VERTEX_DIM_CAP,
                });
            }
            (Vec::new(), EstimateMethod::Vertices)
        }
        Candidates::Points(p) => (p.clone(), EstimateMethod::Candidates),
    };
    if let Some(v) = vrep {
        points.extend(v.vertices);
    }
    let counts = count_violations(model, &points, test);
    estimate_from_counts(&points, &counts, test.len(), method)
}

/// Worst vertex estimate scaled by `d + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexBound {
    pub bound: f64,
    pub worst_vertex: Vec<f64>,
    pub worst_violation: f64,
}

pub fn vertex_bound<M: ViolationModel>(
    model: &M,
    poly: &HPolytope,
    test: &[M::Scenario],
) -> Result<VertexBound> {
    if poly.dim() > DEFAULT_VERTEX_DIM_CAP {
        return Err(Error::DimensionTooLarge {
            dim: poly.dim(),
            cap: DEFAULT_VERTEX_DIM_CAP,
        });
    }
    let est = set_violation(model, poly, test, &Candidates::Vertices)?;
    Ok(VertexBound {
        bound: (poly.dim() + 1) as f64 * est.value,
        worst_vertex: est.argmax_point,
        worst_violation: est.value,
    })
}
