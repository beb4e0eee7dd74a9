//! H-representation polytopes.
//!
//! A polytope is stored as an ordered list of affine rows `a . x <= b`. Each
//! row carries a [`RowOrigin`] so that facets coming from the deterministic
//! constraint set can be told apart from facets contributed by sampled
//! scenarios when counting support constraints.

mod lp;
mod product;
mod reduce;
mod vertices;

pub use lp::{solve_lp, LpSolution, Sense};
pub use product::{reduce_product, AgentBlock, ProductStructure};
pub use reduce::{chebyshev_center, reduce, reduce_naive, ReductionReport, REDUNDANCY_TOL};
pub use vertices::{vertices, vertices_with_cap, VRep, DEFAULT_VERTEX_DIM_CAP};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, norm2};

/// Normals with Euclidean norm at or below this are rejected.
pub const MIN_NORMAL_NORM: f64 = 1e-12;

/// One affine constraint `a . x <= b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHalfspace")]
pub struct Halfspace {
    a: Vec<f64>,
    b: f64,
}

#[derive(Deserialize)]
struct RawHalfspace {
    a: Vec<f64>,
    b: f64,
}

impl TryFrom<RawHalfspace> for Halfspace {
    type Error = Error;

    fn try_from(raw: RawHalfspace) -> Result<Self> {
        Halfspace::new(raw.a, raw.b)
    }
}

impl Halfspace {
    pub fn new(a: Vec<f64>, b: f64) -> Result<Self> {
        if !(norm2(&a) > MIN_NORMAL_NORM) || !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::ZeroNormal);
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// `a . x - b`; positive means violated.
    #[inline]
    pub fn excess(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) - self.b
    }

    #[inline]
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.excess(x) <= tol
    }

    /// The same halfspace with `a` scaled to unit norm.
    pub fn normalized(&self) -> Halfspace {
        let n = norm2(&self.a);
        Halfspace {
            a: self.a.iter().map(|v| v / n).collect(),
            b: self.b / n,
        }
    }

    pub fn with_offset(&self, b: f64) -> Halfspace {
        Halfspace { a: self.a.clone(), b }
    }
}

/// Where a row of a polytope came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOrigin {
    /// A row of the deterministic constraint set.
    Deterministic,
    /// A row produced by the scenario with this index.
    Scenario(usize),
}

impl RowOrigin {
    pub fn is_scenario(self) -> bool {
        matches!(self, RowOrigin::Scenario(_))
    }
}

/// A finite conjunction of halfspaces in `dim` dimensions.
///
/// Serialized as `{"dim": d, "rows": [{"a": [...], "b": ...}, ...]}` with an
/// optional `"origins"` array. Rows read without origins are tagged as
/// scenario rows, indexed by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolytope")]
pub struct HPolytope {
    dim: usize,
    rows: Vec<Halfspace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    origins: Option<Vec<RowOrigin>>,
}

#[derive(Deserialize)]
struct RawPolytope {
    dim: usize,
    rows: Vec<Halfspace>,
    #[serde(default)]
    origins: Option<Vec<RowOrigin>>,
}

impl TryFrom<RawPolytope> for HPolytope {
    type Error = Error;

    fn try_from(raw: RawPolytope) -> Result<Self> {
        let mut poly = HPolytope::from_rows(raw.dim, raw.rows)?;
        if let Some(origins) = raw.origins {
            if origins.len() != poly.rows.len() {
                return Err(Error::DimensionMismatch {
                    expected: poly.rows.len(),
                    got: origins.len(),
                });
            }
            poly.origins = Some(origins);
        }
        Ok(poly)
    }
}

impl HPolytope {
    /// An empty row list (the whole space).
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameters("dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            rows: Vec::new(),
            origins: Some(Vec::new()),
        })
    }

    /// Builds a polytope whose rows are all tagged as scenario rows.
    pub fn from_rows(dim: usize, rows: Vec<Halfspace>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameters("dimension must be positive".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        Ok(Self {
            dim,
            rows,
            origins: None,
        })
    }

    /// Axis-aligned box `lower <= x <= upper`, tagged deterministic.
    pub fn from_box(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        let dim = lower.len();
        let mut poly = HPolytope::new(dim)?;
        for k in 0..dim {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            poly.push(Halfspace::new(e, upper[k])?, RowOrigin::Deterministic)?;
        }
        for k in 0..dim {
            let mut e = vec![0.0; dim];
            e[k] = -1.0;
            poly.push(Halfspace::new(e, -lower[k])?, RowOrigin::Deterministic)?;
        }
        Ok(poly)
    }

    pub fn push(&mut self, row: Halfspace, origin: RowOrigin) -> Result<()> {
        if row.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: row.dim(),
            });
        }
        let n = self.rows.len();
        self.origins
            .get_or_insert_with(|| (0..n).map(RowOrigin::Scenario).collect())
            .push(origin);
        self.rows.push(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Halfspace] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn origin(&self, i: usize) -> RowOrigin {
        match &self.origins {
            Some(o) => o[i],
            None => RowOrigin::Scenario(i),
        }
    }

    /// True iff `a_row . x <= b_row + tol` for every row.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim && self.rows.iter().all(|r| r.contains(x, tol))
    }

    /// Largest row excess `max_i (a_i . x - b_i)`, or `-inf` with no rows.
    pub fn max_excess(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.excess(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The polytope restricted to the given row indices, origins preserved.
    pub fn subset(&self, indices: &[usize]) -> HPolytope {
        HPolytope {
            dim: self.dim,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            origins: Some(indices.iter().map(|&i| self.origin(i)).collect()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("polytope serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidParameters(e.to_string()))
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
