//! Redundancy elimination and facet counting.
//!
//! Row `i` is redundant when `max a_i . x` over the remaining rows, with row
//! `i` relaxed to `a_i . x <= b_i + 1`, does not exceed `b_i + 1e-9`. Rows are
//! tested in index order against every row that is still kept or untested,
//! so of two coincident rows the later one survives. Weakly redundant rows
//! (touching the set only in a lower-dimensional face) are removed.
//!
//! [`reduce`] answers each redundancy question with a small working set of
//! rows grown by cutting planes: an LP over a subset of rows is a relaxation,
//! so a "redundant" answer is final, and a maximizer that satisfies every
//! other live row witnesses that the row is a facet. [`reduce_naive`] solves
//! the full LP for every row and serves as a reference.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::lp::{maximize, solve_lp, Sense};
use super::{HPolytope, Halfspace, RowOrigin};
use crate::error::{Error, Result};
use crate::numeric::{dot, norm2};

/// Optimality slack below which a row is declared redundant.
pub const REDUNDANCY_TOL: f64 = 1e-9;

/// Chebyshev radius at or below which the interior is treated as empty.
const INTERIOR_TOL: f64 = 1e-9;

/// Outcome of redundancy elimination. Row indices refer to the input
/// polytope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub facet_count: usize,
    /// Kept rows contributed by scenarios (the support constraints).
    pub scenario_facet_count: usize,
    pub kept_rows: Vec<usize>,
    pub removed_rows: Vec<usize>,
    pub interior_point: Vec<f64>,
    pub chebyshev_radius: f64,
}

impl ReductionReport {
    pub(crate) fn build(
        poly: &HPolytope,
        kept: Vec<usize>,
        removed: Vec<usize>,
        interior_point: Vec<f64>,
        chebyshev_radius: f64,
    ) -> Self {
        let scenario_facet_count = kept.iter().filter(|&&i| poly.origin(i).is_scenario()).count();
        Self {
            facet_count: kept.len(),
            scenario_facet_count,
            kept_rows: kept,
            removed_rows: removed,
            interior_point,
            chebyshev_radius,
        }
    }

    /// Kept rows of the deterministic constraint set.
    pub fn deterministic_facet_count(&self) -> usize {
        self.facet_count - self.scenario_facet_count
    }
}

/// Center and radius of the largest ball inside `poly`.
pub fn chebyshev_center(poly: &HPolytope) -> Result<(Vec<f64>, f64)> {
    let d = poly.dim();
    let mut lifted = HPolytope::new(d + 1)?;
    for row in poly.rows() {
        let mut a = row.a().to_vec();
        a.push(norm2(row.a()));
        lifted.push(Halfspace::new(a, row.b())?, RowOrigin::Deterministic)?;
    }
    let mut neg_r = vec![0.0; d + 1];
    neg_r[d] = -1.0;
    lifted.push(Halfspace::new(neg_r, 0.0)?, RowOrigin::Deterministic)?;

    let mut objective = vec![0.0; d + 1];
    objective[d] = 1.0;
    let sol = solve_lp(&objective, &lifted, Sense::Maximize)?;
    let mut center = sol.point;
    let radius = center.pop().unwrap().max(0.0);
    Ok((center, radius))
}

/// Unit-normalized copies of every row.
fn normalized_rows(poly: &HPolytope) -> Vec<Halfspace> {
    poly.rows().iter().map(Halfspace::normalized).collect()
}

/// Checks interior and boundedness; returns the Chebyshev center and radius.
fn validate(dim: usize, rows: &[&Halfspace]) -> Result<(Vec<f64>, f64)> {
    let poly = HPolytope::from_rows(dim, rows.iter().map(|r| (*r).clone()).collect())?;
    let (center, radius) = match chebyshev_center(&poly) {
        Ok(v) => v,
        Err(Error::Infeasible) => return Err(Error::EmptyPolytope),
        Err(e) => return Err(e),
    };
    if radius <= INTERIOR_TOL {
        return Err(Error::NoInterior { radius });
    }
    for k in 0..dim {
        for sign in [1.0, -1.0] {
            let mut c = vec![0.0; dim];
            c[k] = sign;
            match maximize(&c, rows) {
                Ok(_) => {}
                Err(Error::Unbounded) => return Err(Error::Unbounded),
                Err(e) => return Err(e),
            }
        }
    }
    Ok((center, radius))
}

/// Removes every redundant row of `poly`; the number of rows left is the
/// facet count.
pub fn reduce(poly: &HPolytope) -> Result<ReductionReport> {
    let dim = poly.dim();
    let rows = normalized_rows(poly);
    let m = rows.len();
    let mut alive = vec![true; m];

    // Parallel rows: only the tightest can be a facet. Within tolerance the
    // later row wins, matching the sequential rule.
    let mut groups: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        let key = r.a().iter().map(|v| (v * 1e9).round() as i64).collect();
        groups.entry(key).or_default().push(i);
    }
    for members in groups.values().filter(|g| g.len() > 1) {
        let min_b = members.iter().map(|&i| rows[i].b()).fold(f64::INFINITY, f64::min);
        let winner = *members
            .iter()
            .filter(|&&i| rows[i].b() <= min_b + REDUNDANCY_TOL)
            .max()
            .unwrap();
        for &i in members {
            if i != winner {
                alive[i] = false;
            }
        }
    }

    let live: Vec<&Halfspace> = (0..m).filter(|&i| alive[i]).map(|i| &rows[i]).collect();
    let (center, radius) = validate(dim, &live)?;

    let mut working: Vec<usize> = Vec::new();
    for i in 0..m {
        if !alive[i] {
            continue;
        }
        let relaxed = rows[i].with_offset(rows[i].b() + 1.0);
        loop {
            let mut lp_rows: Vec<&Halfspace> = working
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| &rows[j])
                .collect();
            lp_rows.push(&relaxed);
            let sol = maximize(rows[i].a(), &lp_rows)?;
            if sol.value <= rows[i].b() + REDUNDANCY_TOL {
                alive[i] = false;
                working.retain(|&j| j != i);
                break;
            }
            match first_cut(&rows, &alive, &working, i, &center, &sol.point) {
                Some(j) => working.push(j),
                None => {
                    if !working.contains(&i) {
                        working.push(i);
                    }
                    break;
                }
            }
        }
    }

    let kept: Vec<usize> = (0..m).filter(|&i| alive[i]).collect();
    let removed: Vec<usize> = (0..m).filter(|&i| !alive[i]).collect();
    Ok(ReductionReport::build(poly, kept, removed, center, radius))
}

/// The live row (other than `skip` and the working set) first crossed on the
/// segment from `center` to `x`, among rows that `x` violates.
fn first_cut(
    rows: &[Halfspace],
    alive: &[bool],
    working: &[usize],
    skip: usize,
    center: &[f64],
    x: &[f64],
) -> Option<usize> {
    let dir: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
    let mut best: Option<(usize, f64)> = None;
    for (j, r) in rows.iter().enumerate() {
        if j == skip || !alive[j] || r.excess(x) <= REDUNDANCY_TOL || working.contains(&j) {
            continue;
        }
        let rate = dot(r.a(), &dir);
        let t = if rate > 0.0 {
            (r.b() - dot(r.a(), center)) / rate
        } else {
            f64::INFINITY
        };
        if best.is_none_or(|(_, bt)| t < bt) {
            best = Some((j, t));
        }
    }
    best.map(|(j, _)| j)
}

/// Reference redundancy elimination: one LP over all live rows per row.
pub fn reduce_naive(poly: &HPolytope) -> Result<ReductionReport> {
    let dim = poly.dim();
    let rows = normalized_rows(poly);
    let m = rows.len();
    let all: Vec<&Halfspace> = rows.iter().collect();
    let (center, radius) = validate(dim, &all)?;

    let mut alive = vec![true; m];
    for i in 0..m {
        let relaxed = rows[i].with_offset(rows[i].b() + 1.0);
        let mut lp_rows: Vec<&Halfspace> = (0..m)
            .filter(|&j| j != i && alive[j])
            .map(|j| &rows[j])
            .collect();
        lp_rows.push(&relaxed);
        let sol = maximize(rows[i].a(), &lp_rows)?;
        if sol.value <= rows[i].b() + REDUNDANCY_TOL {
            alive[i] = false;
        }
    }
    let kept: Vec<usize> = (0..m).filter(|&i| alive[i]).collect();
    let removed: Vec<usize> = (0..m).filter(|&i| !alive[i]).collect();
    Ok(ReductionReport::build(poly, kept, removed, center, radius))
}
