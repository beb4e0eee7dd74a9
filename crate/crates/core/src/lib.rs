//! Scenario-sampled polytopic feasibility sets and their a posteriori
//! violation certificates.
//!
//! The crate is organized bottom-up:
//!
//! * [`polytope`]: H-representation polytopes, a dense simplex LP solver,
//!   redundancy elimination (facet counting), vertex enumeration in low
//!   dimension and the product-structure fast path.
//! * [`scenario_bounds`]: the violation level table `k -> eps(k)` and
//!   certificates for sets and points.
//! * [`sampling`]: seeded generators for the random 2-D halfspace model and
//!   the EV uncertainty model.
//! * [`violation`]: Monte-Carlo estimates of point and set violation,
//!   gridding, hit-and-run and the vertex bound.
//! * [`ev_game`]: the EV charging aggregative game, its reduced constraints
//!   and a relaxed Jacobi best-response equilibrium solver.

pub mod error;
pub mod ev_game;
pub mod numeric;
pub mod polytope;
pub mod sampling;
pub mod scenario_bounds;
pub mod violation;

pub use error::{Error, Result};
pub use ev_game::{
    best_response, residual, solve_equilibrium, AgentConstraints, BestResponse,
    EquilibriumResult, GameConfig, ReducedConstraints,
};
pub use polytope::{
    chebyshev_center, reduce, reduce_product, solve_lp, vertices, AgentBlock, HPolytope,
    Halfspace, LpSolution, ProductStructure, ReductionReport, RowOrigin, Sense, VRep,
};
pub use sampling::{EvScenario, ScenarioModel, ScenarioSet};
pub use scenario_bounds::{certify_point, certify_set, Certificate, EpsilonTable, Subject};
pub use violation::{point_violation, set_violation, vertex_bound, ViolationEstimate};
