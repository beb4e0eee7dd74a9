//! Dense two-phase simplex with Bland's rule.
//!
//! `max c . x  s.t.  A x <= b` with free `x` is solved through its dual
//! `min b . y  s.t.  A^T y = c, y >= 0`. The dual has only `dim` equality
//! rows, so the tableau is `dim x (rows + dim)` no matter how many
//! halfspaces the polytope carries, and the primal point is recovered from
//! the simplex multipliers of the optimal dual basis.

use super::{check_dim, HPolytope, Halfspace};
use crate::error::{Error, Result};
use crate::numeric::{dot, solve_dense};

/// Reduced costs above `-RC_TOL` count as nonnegative.
const RC_TOL: f64 = 1e-11;
/// Smallest admissible pivot element.
const PIVOT_TOL: f64 = 1e-11;
/// Phase-one residual (relative to the right-hand side) treated as zero.
const PHASE1_TOL: f64 = 1e-9;
/// Primal feasibility demanded of a returned point (relative to |b|).
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Optimal point of an LP over a polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// `objective . point`.
    pub value: f64,
    pub point: Vec<f64>,
    /// Nonnegative row multipliers with `sum_i duals[i] a_i = c` for
    /// maximization (`-c` for minimization).
    pub duals: Vec<f64>,
}

/// Optimizes `objective . x` over `poly`.
pub fn solve_lp(objective: &[f64], poly: &HPolytope, sense: Sense) -> Result<LpSolution> {
    check_dim(poly.dim(), objective.len())?;
    let rows: Vec<&Halfspace> = poly.rows().iter().collect();
    match sense {
        Sense::Maximize => maximize(objective, &rows),
        Sense::Minimize => {
            let neg: Vec<f64> = objective.iter().map(|v| -v).collect();
            let mut sol = maximize(&neg, &rows)?;
            sol.value = -sol.value;
            Ok(sol)
        }
    }
}

pub(crate) fn maximize(c: &[f64], rows: &[&Halfspace]) -> Result<LpSolution> {
    let dim = c.len();
    if c.iter().all(|&v| v == 0.0) || c.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameters(
            "objective must be finite and nonzero".into(),
        ));
    }
    let m = rows.len();
    let coeffs: Vec<Vec<f64>> = (0..dim)
        .map(|k| rows.iter().map(|r| r.a()[k]).collect())
        .collect();
    let costs: Vec<f64> = rows.iter().map(|r| r.b()).collect();

    let mut tab = Tableau::new(&coeffs, c, m);
    match tab.run(&costs)? {
        Outcome::Optimal => {}
        Outcome::PhaseOneInfeasible => {
            return Err(if primal_feasible(dim, rows)? {
                Error::Unbounded
            } else {
                Error::Infeasible
            });
        }
        // An unbounded dual certifies an empty primal.
        Outcome::Unbounded => return Err(Error::Infeasible),
    }

    let (mut point, mut duals) = tab.primal_dual(c, m);
    if let Some((p, y)) = refine_from_basis(&tab.basis, m, c, rows) {
        if max_excess(rows, &p) <= max_excess(rows, &point) + 1e-15 {
            point = p;
            duals = y;
        }
    }

    let scale = rows.iter().map(|r| r.b().abs()).fold(1.0_f64, f64::max);
    let excess = max_excess(rows, &point);
    if excess > FEAS_TOL * scale {
        return Err(Error::Numerical(format!(
            "simplex returned a point violating a row by {excess:e}"
        )));
    }
    Ok(LpSolution {
        value: dot(c, &point),
        point,
        duals,
    })
}

fn max_excess(rows: &[&Halfspace], x: &[f64]) -> f64 {
    rows.iter()
        .map(|r| r.excess(x))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Farkas test: `{A x <= b}` is empty iff some `y >= 0` with `A^T y = 0`,
/// `sum y = 1` has `b . y < 0`.
fn primal_feasible(dim: usize, rows: &[&Halfspace]) -> Result<bool> {
    let m = rows.len();
    if m == 0 {
        return Ok(true);
    }
    let mut coeffs: Vec<Vec<f64>> = (0..dim)
        .map(|k| rows.iter().map(|r| r.a()[k]).collect())
        .collect();
    coeffs.push(vec![1.0; m]);
    let mut rhs = vec![0.0; dim];
    rhs.push(1.0);
    let costs: Vec<f64> = rows.iter().map(|r| r.b()).collect();
    let mut tab = Tableau::new(&coeffs, &rhs, m);
    match tab.run(&costs)? {
        Outcome::Optimal => {
            let scale = costs.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
            Ok(tab.objective_value() >= -FEAS_TOL * scale)
        }
        Outcome::PhaseOneInfeasible => Ok(true),
        Outcome::Unbounded => Err(Error::Numerical(
            "normalized Farkas program reported unbounded".into(),
        )),
    }
}

/// Re-solves the optimal basis directly: `A_B x = b_B`, `A_B^T y_B = c`.
fn refine_from_basis(
    basis: &[usize],
    m: usize,
    c: &[f64],
    rows: &[&Halfspace],
) -> Option<(Vec<f64>, Vec<f64>)> {
    if basis.iter().any(|&j| j >= m) {
        return None;
    }
    let dim = c.len();
    let a_b: Vec<Vec<f64>> = basis.iter().map(|&j| rows[j].a().to_vec()).collect();
    let b_b: Vec<f64> = basis.iter().map(|&j| rows[j].b()).collect();
    let x = solve_dense(&a_b, &b_b)?;
    let a_bt: Vec<Vec<f64>> = (0..dim)
        .map(|k| basis.iter().map(|&j| rows[j].a()[k]).collect())
        .collect();
    let y_b = solve_dense(&a_bt, c)?;
    let mut y = vec![0.0; m];
    for (&j, &v) in basis.iter().zip(&y_b) {
        y[j] = v.max(0.0);
    }
    Some((x, y))
}

enum Outcome {
    Optimal,
    PhaseOneInfeasible,
    Unbounded,
}

/// Standard-form tableau for `min cost . y  s.t.  E y = f, y >= 0` with one
/// artificial column per equality row. Column layout: `m` structural
/// columns, `k` artificials, then the right-hand side. The last row holds
/// reduced costs.
struct Tableau {
    k: usize,
    m: usize,
    width: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
    signs: Vec<f64>,
}

impl Tableau {
    fn new(coeffs: &[Vec<f64>], rhs: &[f64], m: usize) -> Self {
        let k = rhs.len();
        let width = m + k + 1;
        let mut t = vec![0.0; (k + 1) * width];
        let mut signs = vec![1.0; k];
        for i in 0..k {
            let s = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
            signs[i] = s;
            let row = &mut t[i * width..(i + 1) * width];
            for j in 0..m {
                row[j] = s * coeffs[i][j];
            }
            row[m + i] = 1.0;
            row[width - 1] = s * rhs[i];
        }
        Self {
            k,
            m,
            width,
            t,
            basis: (m..m + k).collect(),
            signs,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn objective_value(&self) -> f64 {
        -self.at(self.k, self.width - 1)
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let w = self.width;
        let p = self.t[r * w + col];
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..=self.k {
            if i == r {
                continue;
            }
            let f = self.t[i * w + col];
            if f != 0.0 {
                let row = &mut self.t[i * w..(i + 1) * w];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[col] = 0.0;
            }
        }
        self.basis[r] = col;
    }

    /// Bland's rule: lowest-index improving column, lowest-index leaving
    /// variable among minimum-ratio ties.
    fn iterate(&mut self) -> Result<bool> {
        let limit = 50 * (self.m + self.k) + 1000;
        for _ in 0..limit {
            let obj = self.k;
            let entering = (0..self.m).find(|&j| self.at(obj, j) < -RC_TOL);
            let Some(col) = entering else {
                return Ok(true);
            };
            let rhs = self.width - 1;
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.k {
                let a = self.at(i, col);
                if a > PIVOT_TOL {
                    let ratio = self.at(i, rhs).max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, col),
                None => return Ok(false),
            }
        }
        Err(Error::Numerical("simplex iteration limit reached".into()))
    }

    fn run(&mut self, costs: &[f64]) -> Result<Outcome> {
        let (k, m, w) = (self.k, self.m, self.width);

        // Phase one: minimize the sum of artificials.
        for j in 0..w {
            let s: f64 = (0..k).map(|i| self.at(i, j)).sum();
            self.t[k * w + j] = if j >= m && j < m + k { 0.0 } else { -s };
        }
        if !self.iterate()? {
            return Err(Error::Numerical("phase one reported unbounded".into()));
        }
        let f_scale = (0..k).map(|i| self.at(i, w - 1).abs()).fold(1.0_f64, f64::max);
        if self.objective_value() > PHASE1_TOL * f_scale {
            return Ok(Outcome::PhaseOneInfeasible);
        }

        // Drive zero-level artificials out of the basis where possible.
        for i in 0..k {
            if self.basis[i] >= m {
                if let Some(j) = (0..m)
                    .filter(|&j| self.at(i, j).abs() > 1e-9)
                    .max_by(|&a, &b| self.at(i, a).abs().total_cmp(&self.at(i, b).abs()))
                {
                    self.pivot(i, j);
                }
            }
        }

        // Phase two with the true costs.
        for j in 0..w {
            self.t[k * w + j] = if j < m { costs[j] } else { 0.0 };
        }
        for i in 0..k {
            let bj = self.basis[i];
            if bj < m && costs[bj] != 0.0 {
                let cb = costs[bj];
                for j in 0..w {
                    self.t[k * w + j] -= cb * self.t[i * w + j];
                }
            }
        }
        if self.iterate()? {
            Ok(Outcome::Optimal)
        } else {
            Ok(Outcome::Unbounded)
        }
    }

    /// Primal point from the simplex multipliers and dual values from the
    /// basic solution.
    fn primal_dual(&self, c: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
        let k = self.k;
        let point: Vec<f64> = (0..c.len())
            .map(|i| -self.signs[i] * self.at(k, m + i))
            .collect();
        let mut duals = vec![0.0; m];
        for i in 0..k {
            if self.basis[i] < m {
                duals[self.basis[i]] = self.at(i, self.width - 1).max(0.0);
            }
        }
        (point, duals)
    }
}
