//! Vertex enumeration for low-dimensional polytopes.

use serde::{Deserialize, Serialize};

use super::reduce::{reduce, ReductionReport};
use super::{HPolytope, Halfspace};
use crate::error::{Error, Result};
use crate::numeric::solve_dense;

pub const DEFAULT_VERTEX_DIM_CAP: usize = 4;

const VERTEX_FEAS_TOL: f64 = 1e-7;
const VERTEX_DEDUP_TOL: f64 = 1e-9;

/// Vertex list of a polytope. In two dimensions the vertices are in
/// counter-clockwise order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VRep {
    pub vertices: Vec<Vec<f64>>,
}

impl VRep {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Enumerates vertices from the kept rows of an existing reduction.
    pub fn from_report(poly: &HPolytope, report: &ReductionReport, cap: usize) -> Result<VRep> {
        let d = poly.dim();
        if d > cap {
            return Err(Error::DimensionTooLarge { dim: d, cap });
        }
        let facets: Vec<Halfspace> = report
            .kept_rows
            .iter()
            .map(|&i| poly.rows()[i].normalized())
            .collect();
        let mut out: Vec<Vec<f64>> = Vec::new();
        let mut accept = |x: Vec<f64>| {
            if facets.iter().all(|r| r.excess(&x) <= VERTEX_FEAS_TOL)
                && !out.iter().any(|v| dist(v, &x) < VERTEX_DEDUP_TOL)
            {
                out.push(x);
            }
        };

        if d == 2 {
            let mut order: Vec<usize> = (0..facets.len()).collect();
            let angle = |r: &Halfspace| r.a()[1].atan2(r.a()[0]);
            order.sort_by(|&i, &j| angle(&facets[i]).total_cmp(&angle(&facets[j])));
            for w in 0..order.len() {
                let r1 = &facets[order[w]];
                let r2 = &facets[order[(w + 1) % order.len()]];
                if let Some(x) = intersect(&[r1, r2]) {
                    accept(x);
                }
            }
        } else {
            let mut subset: Vec<usize> = (0..d).collect();
            if facets.len() >= d {
                loop {
                    let rows: Vec<&Halfspace> = subset.iter().map(|&i| &facets[i]).collect();
                    if let Some(x) = intersect(&rows) {
                        accept(x);
                    }
                    if !next_combination(&mut subset, facets.len()) {
                        break;
                    }
                }
            }
        }
        Ok(VRep { vertices: out })
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn intersect(rows: &[&Halfspace]) -> Option<Vec<f64>> {
    let m: Vec<Vec<f64>> = rows.iter().map(|r| r.a().to_vec()).collect();
    let rhs: Vec<f64> = rows.iter().map(|r| r.b()).collect();
    solve_dense(&m, &rhs)
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// All vertices of a bounded polytope with nonempty interior, for dimension
/// at most [`DEFAULT_VERTEX_DIM_CAP`].
pub fn vertices(poly: &HPolytope) -> Result<VRep> {
    vertices_with_cap(poly, DEFAULT_VERTEX_DIM_CAP)
}

pub fn vertices_with_cap(poly: &HPolytope, cap: usize) -> Result<VRep> {
    if poly.dim() > cap {
        return Err(Error::DimensionTooLarge {
            dim: poly.dim(),
            cap,
        });
    }
    let report = reduce(poly)?;
    VRep::from_report(poly, &report, cap)
}
