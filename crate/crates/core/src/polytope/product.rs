//! Facet counting for products of per-agent "box plus total-energy" sets.
//!
//! For one agent with bounds `l <= x <= u` in `d` coordinates and an
//! optional row `sum_t x_t >= E`, write `L = sum l`, `U = sum u`:
//!
//! * every upper row is a facet (without it `x_t` is unbounded above);
//! * lower row `t` is redundant iff `E - (U - u_t) >= l_t`, i.e. meeting the
//!   energy target already forces `x_t` above its lower bound;
//! * the energy row is redundant iff `E <= L` and no lower row was dropped.
//!
//! Flattened row order per agent is: `d` upper rows, `d` lower rows, then
//! the energy row when present.

use serde::{Deserialize, Serialize};

use super::reduce::{chebyshev_center, ReductionReport, REDUNDANCY_TOL};
use super::{HPolytope, Halfspace, RowOrigin};
use crate::error::{Error, Result};

/// One agent's constraint block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentBlock {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Lower bound on `sum_t x_t`.
    pub energy: Option<f64>,
    pub upper_origin: Vec<RowOrigin>,
    pub lower_origin: Vec<RowOrigin>,
    pub energy_origin: RowOrigin,
}

impl AgentBlock {
    /// A block whose rows are all tagged as scenario rows.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, energy: Option<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidParameters("agent block has no coordinates".into()));
        }
        let d = lower.len();
        Ok(Self {
            lower,
            upper,
            energy,
            upper_origin: vec![RowOrigin::Scenario(0); d],
            lower_origin: vec![RowOrigin::Scenario(0); d],
            energy_origin: RowOrigin::Scenario(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn row_count(&self) -> usize {
        2 * self.dim() + usize::from(self.energy.is_some())
    }

    fn push_rows(&self, poly: &mut HPolytope, offset: usize) -> Result<()> {
        let n = poly.dim();
        let d = self.dim();
        for t in 0..d {
            let mut a = vec![0.0; n];
            a[offset + t] = 1.0;
            poly.push(Halfspace::new(a, self.upper[t])?, self.upper_origin[t])?;
        }
        for t in 0..d {
            let mut a = vec![0.0; n];
            a[offset + t] = -1.0;
            poly.push(Halfspace::new(a, -self.lower[t])?, self.lower_origin[t])?;
        }
        if let Some(e) = self.energy {
            let mut a = vec![0.0; n];
            a[offset..offset + d].iter_mut().for_each(|v| *v = -1.0);
            poly.push(Halfspace::new(a, -e)?, self.energy_origin)?;
        }
        Ok(())
    }

    /// This block alone as a `d`-dimensional polytope.
    pub fn to_polytope(&self) -> Result<HPolytope> {
        let mut poly = HPolytope::new(self.dim())?;
        self.push_rows(&mut poly, 0)?;
        Ok(poly)
    }
}

/// A product of agent blocks over disjoint coordinate ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductStructure {
    pub agents: Vec<AgentBlock>,
}

impl ProductStructure {
    pub fn new(agents: Vec<AgentBlock>) -> Self {
        Self { agents }
    }

    pub fn dim(&self) -> usize {
        self.agents.iter().map(AgentBlock::dim).sum()
    }

    pub fn row_count(&self) -> usize {
        self.agents.iter().map(AgentBlock::row_count).sum()
    }

    /// The equivalent H-representation over all coordinates.
    pub fn flatten(&self) -> Result<HPolytope> {
        let mut poly = HPolytope::new(self.dim())?;
        let mut offset = 0;
        for block in &self.agents {
            block.push_rows(&mut poly, offset)?;
            offset += block.dim();
        }
        Ok(poly)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let mut offset = 0;
        for b in &self.agents {
            let xs = &x[offset..offset + b.dim()];
            offset += b.dim();
            let inside_box = xs
                .iter()
                .zip(b.lower.iter().zip(&b.upper))
                .all(|(&v, (&l, &u))| v <= u + tol && v >= l - tol);
            let energy_ok = b.energy.is_none_or(|e| xs.iter().sum::<f64>() >= e - tol);
            if !(inside_box && energy_ok) {
                return false;
            }
        }
        true
    }
}

/// Facet classification of a product structure without solving per-row LPs.
/// Agrees with [`super::reduce`] on the flattened rows.
pub fn reduce_product(structure: &ProductStructure) -> Result<ReductionReport> {
    if structure.agents.is_empty() {
        return Err(Error::InvalidParameters("product has no agents".into()));
    }
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    let mut scenario_facets = 0;
    let mut center = Vec::with_capacity(structure.dim());
    let mut radius = f64::INFINITY;
    let mut row = 0;

    for block in &structure.agents {
        let d = block.dim();
        let (lower, upper) = (&block.lower, &block.upper);
        if lower.iter().zip(upper).any(|(l, u)| l > u) {
            return Err(Error::EmptyPolytope);
        }
        let sum_upper: f64 = upper.iter().sum();
        let sum_lower: f64 = lower.iter().sum();
        if let Some(e) = block.energy {
            if e > sum_upper {
                return Err(Error::EmptyPolytope);
            }
        }
        let width = lower
            .iter()
            .zip(upper)
            .map(|(l, u)| u - l)
            .fold(f64::INFINITY, f64::min);
        let energy_gap = block.energy.map_or(f64::INFINITY, |e| sum_upper - e);
        if width <= REDUNDANCY_TOL || energy_gap <= REDUNDANCY_TOL {
            return Err(Error::NoInterior {
                radius: width.min(energy_gap).max(0.0),
            });
        }

        for t in 0..d {
            kept.push(row + t);
            scenario_facets += usize::from(block.upper_origin[t].is_scenario());
        }
        let mut lower_dropped = false;
        for t in 0..d {
            let forced = block
                .energy
                .is_some_and(|e| e - (sum_upper - upper[t]) >= lower[t] - REDUNDANCY_TOL);
            if forced {
                lower_dropped = true;
                removed.push(row + d + t);
            } else {
                kept.push(row + d + t);
                scenario_facets += usize::from(block.lower_origin[t].is_scenario());
            }
        }
        if let Some(e) = block.energy {
            let idx = row + 2 * d;
            let vacuous = !lower_dropped && e <= sum_lower + (d as f64).sqrt() * REDUNDANCY_TOL;
            if vacuous {
                removed.push(idx);
            } else {
                kept.push(idx);
                scenario_facets += usize::from(block.energy_origin.is_scenario());
            }
        }

        let (c, r) = chebyshev_center(&block.to_polytope()?)?;
        center.extend(c);
        radius = radius.min(r);
        row += block.row_count();
    }

    kept.sort_unstable();
    removed.sort_unstable();
    Ok(ReductionReport {
        facet_count: kept.len(),
        scenario_facet_count: scenario_facets,
        kept_rows: kept,
        removed_rows: removed,
        interior_point: center,
        chebyshev_radius: radius,
    })
}
