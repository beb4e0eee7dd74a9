//! EV charging aggregative game over scenario-reduced constraint sets.
//!
//! Agent `m` chooses a charging schedule `x^m` in `R^d` and pays
//! `x^m . (A0 (x^m + sigma_{-m}) + b0)` where `A0 = diag(price_diag)`,
//! `b0 = price_offset` and `sigma_{-m}` is the sum of the other schedules.
//! After `N` scenarios the feasible set of agent `m` is
//!
//! ```text
//! lower_t <= x_t <= upper_nominal_t + min_i delta_u[i][m][t],
//! sum_t x_t >= max_i (1 - delta_e[i][m]) * E_nom[m].
//! ```
//!
//! Best responses solve a separable QP with one coupling row via a scalar
//! multiplier search; the equilibrium is found by relaxed Jacobi iteration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::{AgentBlock, HPolytope, ProductStructure, RowOrigin};
use crate::sampling::EvScenario;
use crate::violation::EvModel;

/// Default 12-step price profile: cheap at both ends, peaks mid-morning and
/// early evening.
pub const DEFAULT_PRICE_PROFILE: [f64; 12] = [
    0.10, 0.15, 0.40, 0.80, 0.70, 0.45, 0.40, 0.60, 0.95, 0.85, 0.35, 0.12,
];

pub const DEFAULT_UPPER_NOMINAL: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    pub m_agents: usize,
    pub horizon: usize,
    pub price_diag: Vec<f64>,
    pub price_offset: Vec<f64>,
    pub x_upper_nominal: Vec<f64>,
    pub x_lower: Vec<f64>,
    /// Jacobi step size; `None` picks `min(1, 4 / (M + 2))`.
    pub relaxation: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            m_agents: 10,
            horizon: 12,
            price_diag: DEFAULT_PRICE_PROFILE.to_vec(),
            price_offset: vec![0.0; 12],
            x_upper_nominal: vec![DEFAULT_UPPER_NOMINAL; 12],
            x_lower: vec![0.0; 12],
            relaxation: None,
            tol: 1e-9,
            max_iters: 10_000,
        }
    }
}

impl GameConfig {
    /// Default settings with uniform bounds for `m_agents x horizon`; the
    /// price profile is resampled linearly onto the horizon.
    pub fn with_size(m_agents: usize, horizon: usize) -> Self {
        let price_diag = (0..horizon)
            .map(|t| {
                if horizon == 1 {
                    return DEFAULT_PRICE_PROFILE[0];
                }
                let s = t as f64 * 11.0 / (horizon - 1) as f64;
                let i = (s.floor() as usize).min(10);
                let w = s - i as f64;
                DEFAULT_PRICE_PROFILE[i] * (1.0 - w) + DEFAULT_PRICE_PROFILE[i + 1] * w
            })
            .collect();
        Self {
            m_agents,
            horizon,
            price_diag,
            price_offset: vec![0.0; horizon],
            x_upper_nominal: vec![DEFAULT_UPPER_NOMINAL; horizon],
            x_lower: vec![0.0; horizon],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameters(msg));
        if self.m_agents == 0 || self.horizon == 0 {
            return bad("game needs at least one agent and one time step".into());
        }
        for (name, v) in [
            ("price_diag", &self.price_diag),
            ("price_offset", &self.price_offset),
            ("x_upper_nominal", &self.x_upper_nominal),
            ("x_lower", &self.x_lower),
        ] {
            if v.len() != self.horizon {
                return bad(format!("{name} has length {}, expected {}", v.len(), self.horizon));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return bad(format!("{name} has non-finite entries"));
            }
        }
        if self.price_diag.iter().any(|&a| a <= 0.0) {
            return bad("price_diag must be strictly positive".into());
        }
        if self.x_lower.iter().zip(&self.x_upper_nominal).any(|(l, u)| l > u) {
            return bad("x_lower exceeds x_upper_nominal".into());
        }
        if let Some(a) = self.relaxation {
            if !(a > 0.0 && a <= 1.0) {
                return bad(format!("relaxation must lie in (0, 1], got {a}"));
            }
        }
        if !(self.tol >= 0.0) || self.max_iters == 0 {
            return bad("tol must be nonnegative and max_iters positive".into());
        }
        Ok(())
    }

    pub fn effective_relaxation(&self) -> f64 {
        self.relaxation
            .unwrap_or_else(|| (4.0 / (self.m_agents as f64 + 2.0)).min(1.0))
    }

    /// The per-scenario violation model for a flattened schedule.
    pub fn violation_model(&self, energy_nominal: &[f64]) -> EvModel {
        EvModel {
            upper_nominal: self.x_upper_nominal.clone(),
            lower: self.x_lower.clone(),
            energy_nominal: energy_nominal.to_vec(),
        }
    }
}

/// One agent's reduced constraint set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConstraints {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub energy: f64,
    /// Scenario attaining each upper bound.
    pub upper_source: Vec<usize>,
    /// Scenario attaining the energy requirement.
    pub energy_source: usize,
}

impl AgentConstraints {
    pub fn is_feasible(&self) -> bool {
        self.lower.iter().zip(&self.upper).all(|(l, u)| l <= u)
            && self.upper.iter().sum::<f64>() >= self.energy
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.upper.len()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol)
            && x.iter().sum::<f64>() >= self.energy - tol
    }

    fn block(&self) -> AgentBlock {
        AgentBlock {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            energy: Some(self.energy),
            upper_origin: self.upper_source.iter().map(|&i| RowOrigin::Scenario(i)).collect(),
            lower_origin: vec![RowOrigin::Deterministic; self.lower.len()],
            energy_origin: RowOrigin::Scenario(self.energy_source),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedConstraints {
    pub n_scenarios: usize,
    pub agents: Vec<AgentConstraints>,
}

impl ReducedConstraints {
    /// Product metadata for the fast facet count. Upper and energy rows are
    /// scenario rows; lower bounds are deterministic.
    pub fn product_structure(&self) -> ProductStructure {
        ProductStructure::new(self.agents.iter().map(AgentConstraints::block).collect())
    }

    pub fn polytope(&self) -> Result<HPolytope> {
        self.product_structure().flatten()
    }

    /// Membership of a flattened (agent-major) schedule.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let d = self.agents.first().map_or(0, |a| a.upper.len());
        x.len() == d * self.agents.len()
            && self
                .agents
                .iter()
                .zip(x.chunks_exact(d))
                .all(|(a, xs)| a.contains(xs, tol))
    }

    pub fn infeasible_agents(&self) -> Vec<usize> {
        (0..self.agents.len())
            .filter(|&m| !self.agents[m].is_feasible())
            .collect()
    }
}

/// Streaming min/max over scenarios, so large scenario sets need not be
/// held in memory.
#[derive(Debug, Clone)]
pub struct ConstraintAccumulator {
    config: GameConfig,
    energy_nominal: Vec<f64>,
    min_delta_u: Vec<Vec<f64>>,
    min_source: Vec<Vec<usize>>,
    max_energy: Vec<f64>,
    energy_source: Vec<usize>,
    count: usize,
}

impl ConstraintAccumulator {
    pub fn new(config: &GameConfig, energy_nominal: &[f64]) -> Result<Self> {
        config.validate()?;
        if energy_nominal.len() != config.m_agents {
            return Err(Error::DimensionMismatch {
                expected: config.m_agents,
                got: energy_nominal.len(),
            });
        }
        let (m, d) = (config.m_agents, config.horizon);
        Ok(Self {
            config: config.clone(),
            energy_nominal: energy_nominal.to_vec(),
            min_delta_u: vec![vec![f64::INFINITY; d]; m],
            min_source: vec![vec![0; d]; m],
            max_energy: vec![f64::NEG_INFINITY; m],
            energy_source: vec![0; m],
            count: 0,
        })
    }

    pub fn add(&mut self, s: &EvScenario) -> Result<()> {
        let (m_agents, d) = (self.config.m_agents, self.config.horizon);
        if s.delta_u.len() != m_agents || s.delta_e.len() != m_agents {
            return Err(Error::DimensionMismatch {
                expected: m_agents,
                got: s.delta_u.len(),
            });
        }
        let i = self.count;
        for m in 0..m_agents {
            if s.delta_u[m].len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: s.delta_u[m].len(),
                });
            }
            for t in 0..d {
                if s.delta_u[m][t] < self.min_delta_u[m][t] {
                    self.min_delta_u[m][t] = s.delta_u[m][t];
                    self.min_source[m][t] = i;
                }
            }
            let e = (1.0 - s.delta_e[m]) * self.energy_nominal[m];
            if e > self.max_energy[m] {
                self.max_energy[m] = e;
                self.energy_source[m] = i;
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<ReducedConstraints> {
        if self.count == 0 {
            return Err(Error::InvalidParameters("no scenarios".into()));
        }
        let cfg = &self.config;
        let agents: Vec<AgentConstraints> = (0..cfg.m_agents)
            .map(|m| AgentConstraints {
                lower: cfg.x_lower.clone(),
                upper: (0..cfg.horizon)
                    .map(|t| cfg.x_upper_nominal[t] + self.min_delta_u[m][t])
                    .collect(),
                energy: self.max_energy[m],
                upper_source: self.min_source[m].clone(),
                energy_source: self.energy_source[m],
            })
            .collect();
        let reduced = ReducedConstraints {
            n_scenarios: self.count,
            agents,
        };
        let bad = reduced.infeasible_agents();
        if !bad.is_empty() {
            return Err(Error::InfeasibleInstance(bad));
        }
        Ok(reduced)
    }
}

/// Intersects the per-scenario constraint sets of every agent.
pub fn reduce_constraints(
    config: &GameConfig,
    scenarios: &[EvScenario],
    energy_nominal: &[f64],
) -> Result<ReducedConstraints> {
    let mut acc = ConstraintAccumulator::new(config, energy_nominal)?;
    for s in scenarios {
        acc.add(s)?;
    }
    acc.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub x: Vec<f64>,
    /// Multiplier of the energy row.
    pub multiplier: f64,
}

/// Minimizes `sum_t a_t x_t^2 + c_t x_t` over `l <= x <= u`,
/// `sum_t x_t >= energy`. Returns `None` when the set is empty.
pub fn solve_box_energy_qp(
    a: &[f64],
    c: &[f64],
    lower: &[f64],
    upper: &[f64],
    energy: f64,
) -> Option<BestResponse> {
    let d = a.len();
    if lower.iter().zip(upper).any(|(l, u)| l > u) || upper.iter().sum::<f64>() < energy {
        return None;
    }
    let x_at = |mu: f64| -> Vec<f64> {
        (0..d)
            .map(|t| ((mu - c[t]) / (2.0 * a[t])).clamp(lower[t], upper[t]))
            .collect()
    };
    let total = |mu: f64| x_at(mu).iter().sum::<f64>();

    let x0 = x_at(0.0);
    if x0.iter().sum::<f64>() >= energy {
        return Some(BestResponse { x: x0, multiplier: 0.0 });
    }
    // At `hi` every coordinate sits at its upper bound.
    let mut lo = 0.0;
    let mut hi = (0..d)
        .map(|t| c[t] + 2.0 * a[t] * upper[t])
        .fold(0.0, f64::max);
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if total(mid) < energy {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Exact solve on the linear piece containing the root.
    let mid = 0.5 * (lo + hi);
    let (mut clipped, mut num, mut den) = (0.0, 0.0, 0.0);
    for t in 0..d {
        let raw = (mid - c[t]) / (2.0 * a[t]);
        if raw <= lower[t] {
            clipped += lower[t];
        } else if raw >= upper[t] {
            clipped += upper[t];
        } else {
            num += c[t] / (2.0 * a[t]);
            den += 1.0 / (2.0 * a[t]);
        }
    }
    let slack = 1e-9 * hi.abs().max(1.0);
    let mu = if den > 0.0 {
        let exact = (energy - clipped + num) / den;
        if exact >= lo - slack && exact <= hi + slack {
            exact
        } else {
            hi
        }
    } else {
        hi
    };
    // Rounding can leave the exact root a few ulps short of the energy row.
    let mut mu = mu;
    for _ in 0..64 {
        if total(mu) >= energy || mu >= hi {
            break;
        }
        mu = mu.next_up();
    }
    let mu = if total(mu) < energy { hi.max(mu) } else { mu };
    Some(BestResponse { x: x_at(mu), multiplier: mu })
}

fn linear_cost(config: &GameConfig, others_sum: &[f64]) -> Vec<f64> {
    (0..config.horizon)
        .map(|t| config.price_diag[t] * others_sum[t] + config.price_offset[t])
        .collect()
}

/// Agent `m`'s best response to the others' total schedule.
pub fn best_response(
    config: &GameConfig,
    constraints: &ReducedConstraints,
    m: usize,
    others_sum: &[f64],
) -> Result<BestResponse> {
    let ac = constraints
        .agents
        .get(m)
        .ok_or_else(|| Error::InvalidParameters(format!("no agent {m}")))?;
    if others_sum.len() != config.horizon {
        return Err(Error::DimensionMismatch {
            expected: config.horizon,
            got: others_sum.len(),
        });
    }
    let c = linear_cost(config, others_sum);
    solve_box_energy_qp(&config.price_diag, &c, &ac.lower, &ac.upper, ac.energy)
        .ok_or(Error::InfeasibleAgent(m))
}

/// `J_m = x^m . (A0 (x^m + sigma_{-m}) + b0)`.
pub fn agent_cost(config: &GameConfig, x: &[f64], others_sum: &[f64]) -> f64 {
    (0..config.horizon)
        .map(|t| x[t] * (config.price_diag[t] * (x[t] + others_sum[t]) + config.price_offset[t]))
        .sum()
}

fn column_sum(x: &[Vec<f64>], d: usize) -> Vec<f64> {
    let mut s = vec![0.0; d];
    for row in x {
        for t in 0..d {
            s[t] += row[t];
        }
    }
    s
}

fn others(total: &[f64], own: &[f64]) -> Vec<f64> {
    total.iter().zip(own).map(|(s, x)| s - x).collect()
}

/// Best responses to `x` and the largest unilateral cost improvement.
fn sweep(
    config: &GameConfig,
    constraints: &ReducedConstraints,
    x: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, f64)> {
    let total = column_sum(x, config.horizon);
    let results: Vec<Result<(Vec<f64>, f64)>> = (0..x.len())
        .into_par_iter()
        .map(|m| {
            let sigma = others(&total, &x[m]);
            let br = best_response(config, constraints, m, &sigma)?;
            let gain = agent_cost(config, &x[m], &sigma) - agent_cost(config, &br.x, &sigma);
            Ok((br.x, gain))
        })
        .collect();
    let mut responses = Vec::with_capacity(x.len());
    let mut worst = f64::NEG_INFINITY;
    for r in results {
        let (br, gain) = r?;
        worst = worst.max(gain);
        responses.push(br);
    }
    Ok((responses, worst))
}

fn check_schedule(config: &GameConfig, constraints: &ReducedConstraints, x: &[Vec<f64>]) -> Result<()> {
    if x.len() != config.m_agents || constraints.agents.len() != config.m_agents {
        return Err(Error::DimensionMismatch {
            expected: config.m_agents,
            got: x.len().min(constraints.agents.len()),
        });
    }
    if let Some(row) = x.iter().find(|r| r.len() != config.horizon) {
        return Err(Error::DimensionMismatch {
            expected: config.horizon,
            got: row.len(),
        });
    }
    Ok(())
}

/// Largest cost decrease any single agent can obtain by deviating.
pub fn residual(config: &GameConfig, constraints: &ReducedConstraints, x: &[Vec<f64>]) -> Result<f64> {
    check_schedule(config, constraints, x)?;
    Ok(sweep(config, constraints, x)?.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    /// Schedules, one row per agent.
    pub x: Vec<Vec<f64>>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub relaxation: f64,
}

impl EquilibriumResult {
    /// Agent-major concatenation of the schedules.
    pub fn flatten(&self) -> Vec<f64> {
        self.x.concat()
    }
}

/// Relaxed Jacobi best response: every agent moves a fraction `alpha`
/// towards its best response to the previous iterate. Starts from each
/// agent's best response to an empty grid.
pub fn solve_equilibrium(config: &GameConfig, constraints: &ReducedConstraints) -> Result<EquilibriumResult> {
    config.validate()?;
    if constraints.agents.len() != config.m_agents {
        return Err(Error::DimensionMismatch {
            expected: config.m_agents,
            got: constraints.agents.len(),
        });
    }
    let bad = constraints.infeasible_agents();
    if !bad.is_empty() {
        return Err(Error::InfeasibleInstance(bad));
    }
    let alpha = config.effective_relaxation();
    let zero = vec![0.0; config.horizon];
    let mut x = (0..config.m_agents)
        .map(|m| best_response(config, constraints, m, &zero).map(|br| br.x))
        .collect::<Result<Vec<_>>>()?;
    let mut iterations = 1;
    loop {
        let (responses, res) = sweep(config, constraints, &x)?;
        if res <= config.tol || iterations >= config.max_iters {
            return Ok(EquilibriumResult {
                x,
                residual: res,
                iterations,
                converged: res <= config.tol,
                relaxation: alpha,
            });
        }
        for (row, br) in x.iter_mut().zip(&responses) {
            for (v, b) in row.iter_mut().zip(br) {
                *v = (1.0 - alpha) * *v + alpha * b;
            }
        }
        iterations += 1;
    }
}

/// Extreme schedules of the reduced set: everything at the upper bounds and
/// greedy fills that meet the energy row exactly in four time orders (forward,
/// backward, cheapest first, dearest first). The same order is used for all
/// agents.
pub fn extreme_schedules(config: &GameConfig, constraints: &ReducedConstraints) -> Vec<Vec<f64>> {
    let d = config.horizon;
    let forward: Vec<usize> = (0..d).collect();
    let backward: Vec<usize> = (0..d).rev().collect();
    let mut cheap = forward.clone();
    cheap.sort_by(|&i, &j| config.price_diag[i].total_cmp(&config.price_diag[j]).then(i.cmp(&j)));
    let dear: Vec<usize> = cheap.iter().rev().copied().collect();

    let mut out = vec![constraints.agents.iter().flat_map(|a| a.upper.clone()).collect()];
    for order in [forward, backward, cheap, dear] {
        let mut flat = Vec::with_capacity(d * constraints.agents.len());
        for a in &constraints.agents {
            let mut x = a.lower.clone();
            let mut need = a.energy - x.iter().sum::<f64>();
            for &t in &order {
                if need <= 0.0 {
                    break;
                }
                let add = (a.upper[t] - a.lower[t]).min(need);
                x[t] += add;
                need -= add;
            }
            flat.extend(x);
        }
        out.push(flat);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::{reduce, reduce_product, Halfspace};
    use crate::sampling::{sample_ev_nominals, sample_ev_scenarios};
    use proptest::prelude::*;

    fn single_agent(lower: &[f64], upper: &[f64], energy: f64) -> ReducedConstraints {
        ReducedConstraints {
            n_scenarios: 1,
            agents: vec![AgentConstraints {
                lower: lower.to_vec(),
                upper: upper.to_vec(),
                energy,
                upper_source: vec![0; upper.len()],
                energy_source: 0,
            }],
        }
    }

    #[test]
    fn hand_kkt_example() {
        let br = solve_box_energy_qp(&[1.0, 1.0], &[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0], 1.5).unwrap();
        assert!((br.x[0] - 0.75).abs() < 1e-12);
        assert!((br.x[1] - 0.75).abs() < 1e-12);
        assert!((br.multiplier - 1.5).abs() < 1e-12);
    }

    #[test]
    fn inactive_energy_row() {
        let br = solve_box_energy_qp(&[1.0, 2.0], &[-1.0, 8.0], &[0.0, 0.0], &[3.0, 3.0], 0.0).unwrap();
        assert_eq!(br.multiplier, 0.0);
        assert_eq!(br.x, vec![0.5, 0.0]);
        assert!(solve_box_energy_qp(&[1.0], &[0.0], &[0.0], &[1.0], 1.5).is_none());
    }

    #[test]
    fn kinks_are_solved_exactly() {
        // Second coordinate saturates; the first takes the rest.
        let br = solve_box_energy_qp(&[1.0, 1.0], &[0.0, -10.0], &[0.0, 0.0], &[5.0, 1.0], 3.0).unwrap();
        assert!((br.x[0] - 2.0).abs() < 1e-12);
        assert_eq!(br.x[1], 1.0);
        assert!((br.multiplier - 4.0).abs() < 1e-10);
    }

    #[test]
    fn identity_and_min_reduction() {
        let cfg = GameConfig::with_size(2, 3);
        let zero = EvScenario {
            delta_u: vec![vec![0.0; 3]; 2],
            delta_e: vec![0.0; 2],
        };
        let rc = reduce_constraints(&cfg, std::slice::from_ref(&zero), &[10.0, 12.0]).unwrap();
        assert_eq!(rc.agents[0].upper, cfg.x_upper_nominal);
        assert_eq!(rc.agents[1].energy, 12.0);

        let lower_noise = EvScenario {
            delta_u: vec![vec![-0.5; 3]; 2],
            delta_e: vec![-0.1; 2],
        };
        let rc = reduce_constraints(&cfg, &[zero, lower_noise], &[10.0, 12.0]).unwrap();
        assert_eq!(rc.agents[0].upper, vec![5.5; 3]);
        assert_eq!(rc.agents[0].upper_source, vec![1; 3]);
        assert!((rc.agents[0].energy - 11.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_agents_are_named() {
        let cfg = GameConfig::with_size(3, 2);
        let s = EvScenario {
            delta_u: vec![vec![0.0; 2]; 3],
            delta_e: vec![0.0; 3],
        };
        assert_eq!(
            reduce_constraints(&cfg, &[s], &[5.0, 13.0, 20.0]),
            Err(Error::InfeasibleInstance(vec![1, 2]))
        );
    }

    #[test]
    fn flattened_lp_agrees_with_reduction() {
        let cfg = GameConfig::with_size(2, 3);
        let nominals = sample_ev_nominals(5, 2).unwrap();
        let nominals: Vec<f64> = nominals.iter().map(|e| e * 0.3).collect();
        let set = sample_ev_scenarios(6, 2000, 2, 3).unwrap();
        let rc = reduce_constraints(&cfg, &set.draws, &nominals).unwrap();

        // Every scenario row, one per (scenario, agent, t) plus energy rows.
        let mut poly = HPolytope::new(6).unwrap();
        for (i, s) in set.draws.iter().enumerate() {
            for m in 0..2 {
                for t in 0..3 {
                    let mut a = vec![0.0; 6];
                    a[3 * m + t] = 1.0;
                    let b = cfg.x_upper_nominal[t] + s.delta_u[m][t];
                    poly.push(Halfspace::new(a, b).unwrap(), RowOrigin::Scenario(i)).unwrap();
                }
                let mut a = vec![0.0; 6];
                a[3 * m..3 * m + 3].iter_mut().for_each(|v| *v = -1.0);
                let e = (1.0 - s.delta_e[m]) * nominals[m];
                poly.push(Halfspace::new(a, -e).unwrap(), RowOrigin::Scenario(i)).unwrap();
            }
        }
        for k in 0..6 {
            let mut a = vec![0.0; 6];
            a[k] = -1.0;
            poly.push(Halfspace::new(a, 0.0).unwrap(), RowOrigin::Deterministic).unwrap();
        }
        let lp = reduce(&poly).unwrap();
        let fast = reduce_product(&rc.product_structure()).unwrap();
        assert_eq!(lp.facet_count, fast.facet_count);
        assert_eq!(lp.scenario_facet_count, fast.scenario_facet_count);
        for &i in &lp.kept_rows {
            let row = &poly.rows()[i];
            let k = row.a().iter().position(|&v| v != 0.0).unwrap();
            let (m, t) = (k / 3, k % 3);
            if row.a()[k] > 0.0 {
                assert_eq!(row.b(), rc.agents[m].upper[t]);
            } else if row.a().iter().filter(|&&v| v != 0.0).count() == 3 {
                assert_eq!(-row.b(), rc.agents[m].energy);
            } else {
                assert_eq!(row.b(), 0.0);
            }
        }
    }

    fn symmetric_instance(m: usize) -> (GameConfig, ReducedConstraints) {
        let cfg = GameConfig::with_size(m, 4);
        let agent = AgentConstraints {
            lower: vec![0.0; 4],
            upper: vec![3.0, 2.5, 2.0, 3.0],
            energy: 8.0,
            upper_source: vec![0; 4],
            energy_source: 0,
        };
        (
            cfg,
            ReducedConstraints {
                n_scenarios: 1,
                agents: vec![agent; m],
            },
        )
    }

    #[test]
    fn single_agent_game_is_its_best_response() {
        let (cfg, rc) = symmetric_instance(1);
        let res = solve_equilibrium(&cfg, &rc).unwrap();
        let br = best_response(&cfg, &rc, 0, &[0.0; 4]).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        assert_eq!(res.x[0], br.x);
        assert!(res.residual.abs() <= 1e-12);
    }

    #[test]
    fn symmetric_agents_share_a_schedule() {
        let (mut cfg, rc) = symmetric_instance(5);
        cfg.tol = 1e-12;
        let res = solve_equilibrium(&cfg, &rc).unwrap();
        assert!(res.converged, "residual {}", res.residual);
        for row in &res.x {
            for t in 0..4 {
                assert!((row[t] - res.x[0][t]).abs() < 1e-6);
            }
        }
        assert!(rc.contains(&res.flatten(), 1e-9));
    }

    #[test]
    fn perturbed_agent_has_positive_residual() {
        let (cfg, rc) = symmetric_instance(3);
        let res = solve_equilibrium(&cfg, &rc).unwrap();
        assert!(residual(&cfg, &rc, &res.x).unwrap() <= 1e-6);
        let mut x = res.x.clone();
        // Shift charge between two interior steps, keeping the energy row.
        let up = (0..4).find(|&t| x[1][t] + 0.1 <= rc.agents[1].upper[t]).unwrap();
        let down = (0..4).find(|&t| t != up && x[1][t] >= 0.1).unwrap();
        x[1][up] += 0.1;
        x[1][down] -= 0.1;
        assert!(rc.contains(&x.concat(), 1e-9));
        assert!(residual(&cfg, &rc, &x).unwrap() > 0.0);
    }

    #[test]
    fn cheapest_steps_charge_at_their_bounds() {
        let mut cfg = GameConfig::with_size(3, 4);
        cfg.price_diag = vec![1.0, 1.0, 3.0, 3.0];
        let agent = AgentConstraints {
            lower: vec![0.0; 4],
            upper: vec![2.0; 4],
            energy: 6.0,
            upper_source: vec![0; 4],
            energy_source: 0,
        };
        let rc = ReducedConstraints {
            n_scenarios: 1,
            agents: vec![agent; 3],
        };
        let res = solve_equilibrium(&cfg, &rc).unwrap();
        assert!(res.converged);
        for row in &res.x {
            assert!((row[0] - 2.0).abs() < 1e-9);
            assert!((row[1] - 2.0).abs() < 1e-9);
            assert!((row[2] - 1.0).abs() < 1e-6);
            assert!((row[3] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn extreme_schedules_are_feasible() {
        let (cfg, rc) = symmetric_instance(2);
        for x in extreme_schedules(&cfg, &rc) {
            assert!(rc.contains(&x, 1e-12));
        }
    }

    #[test]
    fn single_agent_helper_feasibility() {
        let rc = single_agent(&[0.0], &[1.0], 2.0);
        assert!(!rc.agents[0].is_feasible());
        assert_eq!(rc.infeasible_agents(), vec![0]);
    }

    fn qp_instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
        (1usize..6).prop_flat_map(|d| {
            (
                prop::collection::vec(0.1f64..3.0, d),
                prop::collection::vec(-2.0f64..2.0, d),
                prop::collection::vec(0.5f64..3.0, d),
                0.0f64..1.0,
            )
                .prop_map(|(a, c, u, frac)| {
                    let e = frac * u.iter().sum::<f64>();
                    (a, c, u, e)
                })
        })
    }

    proptest! {
        #[test]
        fn total_is_monotone_in_multiplier(
            (a, c, u, _e) in qp_instance(),
            mu1 in -5.0f64..10.0,
            mu2 in -5.0f64..10.0,
        ) {
            let (lo, hi) = if mu1 <= mu2 { (mu1, mu2) } else { (mu2, mu1) };
            let total = |mu: f64| -> f64 {
                (0..a.len()).map(|t| ((mu - c[t]) / (2.0 * a[t])).clamp(0.0, u[t])).sum()
            };
            prop_assert!(total(lo) <= total(hi));
        }

        #[test]
        fn best_response_beats_feasible_perturbations((a, c, u, e) in qp_instance()) {
            let l = vec![0.0; a.len()];
            let br = solve_box_energy_qp(&a, &c, &l, &u, e).unwrap();
            let cost = |x: &[f64]| -> f64 { (0..a.len()).map(|t| a[t] * x[t] * x[t] + c[t] * x[t]).sum() };
            let f0 = cost(&br.x);
            let d = a.len();
            let mut dirs: Vec<Vec<f64>> = Vec::new();
            for i in 0..d {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; d];
                    v[i] = s;
                    dirs.push(v);
                }
                for j in 0..d {
                    if i != j {
                        let mut v = vec![0.0; d];
                        v[i] = 1.0;
                        v[j] = -1.0;
                        dirs.push(v);
                    }
                }
            }
            for v in dirs {
                let y: Vec<f64> = br.x.iter().zip(&v).map(|(x, s)| x + 1e-3 * s).collect();
                let feasible = y.iter().zip(&u).all(|(&v, &ub)| v >= 0.0 && v <= ub)
                    && y.iter().sum::<f64>() >= e;
                if feasible {
                    prop_assert!(cost(&y) >= f0 - 1e-8);
                }
            }
        }
    }
}
