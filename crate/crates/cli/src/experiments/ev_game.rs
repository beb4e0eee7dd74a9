//! EV charging game: reduced constraints, facet count, equilibrium and
//! violation estimates for a list of sample sizes.
//!
//! Scenario sets for different `N` are prefixes of one stream, and the test
//! multisample is streamed in chunks so full-scale sizes fit in memory.

use polycert_core::ev_game::{
    extreme_schedules, ConstraintAccumulator, GameConfig, ReducedConstraints,
};
use polycert_core::polytope::reduce_product;
use polycert_core::sampling::{derive_seed, sample_ev_nominals, test_seed, EvScenarioSampler};
use polycert_core::scenario_bounds::{certify_point, certify_set, CertifyOptions};
use polycert_core::violation::{
    count_violations, estimate_from_counts, hit_and_run, EstimateMethod, HitAndRunParams,
    ViolationEstimate,
};
use polycert_core::{solve_equilibrium, EpsilonTable, Error as CoreError};
use serde::{Deserialize, Serialize};

use super::require;
use crate::error::{CliError, CliResult};
use crate::output::{num, RunDir};

/// Sub-stream offsets for seeds derived from the run seed.
const NOMINAL_STREAM: u64 = 1 << 20;
const HIT_AND_RUN_STREAM: u64 = 2 << 20;

/// Residual the equilibrium must reach.
pub const RESIDUAL_TARGET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub seed: u64,
    pub n_samples: Vec<usize>,
    pub n_test: usize,
    pub beta: f64,
    pub config: GameConfig,
    pub hit_and_run_points: usize,
    pub hit_and_run_burn_in: usize,
    pub hit_and_run_thin: usize,
    pub nominal_retries: usize,
    pub test_chunk: usize,
    pub count_deterministic: bool,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            seed: 1,
            n_samples: vec![2000, 5000, 10_000],
            n_test: 100_000,
            beta: 1e-5,
            config: GameConfig::default(),
            hit_and_run_points: 100,
            hit_and_run_burn_in: 1000,
            hit_and_run_thin: 20,
            nominal_retries: 10,
            test_chunk: 10_000,
            count_deterministic: false,
        }
    }
}

impl Params {
    pub fn full_scale() -> Self {
        Self {
            n_samples: vec![2000, 20_000, 200_000],
            n_test: 2_000_000,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub n_samples: usize,
    pub facet_count: usize,
    pub support_count: usize,
    pub epsilon: f64,
    pub set_violation: ViolationEstimate,
    pub ne_violation: ViolationEstimate,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub ordering_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub n_test: usize,
    pub beta: f64,
    pub nominal_seed: u64,
    pub nominal_attempts: usize,
    pub energy_nominal: Vec<f64>,
    pub relaxation: f64,
    pub rows: Vec<Row>,
    pub epsilon_decreasing: bool,
    pub all_converged: bool,
}

impl Summary {
    pub fn failed_checks(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.rows {
            if !r.ordering_holds {
                out.push(format!(
                    "N={}: ordering ne {} <= set {} <= eps {} fails",
                    r.n_samples, r.ne_violation.value, r.set_violation.value, r.epsilon
                ));
            }
            if r.residual > RESIDUAL_TARGET {
                out.push(format!("N={}: equilibrium residual {}", r.n_samples, r.residual));
            }
        }
        if !self.epsilon_decreasing {
            out.push("eps(F_N) is not decreasing in N".into());
        }
        out
    }
}

pub fn schedule_file(n: usize) -> String {
    format!("schedule_N{n}.csv")
}

/// Reduced constraints for each sample size (ascending), from one scenario
/// stream. Fails with an infeasible-instance error when some agent's set is
/// empty.
pub fn reduced_for_sizes(
    config: &GameConfig,
    seed: u64,
    sizes: &[usize],
    energy_nominal: &[f64],
) -> polycert_core::Result<Vec<ReducedConstraints>> {
    let mut acc = ConstraintAccumulator::new(config, energy_nominal)?;
    let mut sampler = EvScenarioSampler::new(seed, config.m_agents, config.horizon)?;
    let mut out = Vec::with_capacity(sizes.len());
    let mut drawn = 0;
    for &n in sizes {
        while drawn < n {
            acc.add(&sampler.next().expect("sampler is endless"))?;
            drawn += 1;
        }
        out.push(acc.clone().finish()?);
    }
    Ok(out)
}

pub fn run(p: &Params, dir: &mut RunDir) -> CliResult<Summary> {
    p.config.validate()?;
    require(!p.n_samples.is_empty(), "at least one sample size is required")?;
    require(p.n_samples.iter().all(|&n| n > 0), "sample sizes must be positive")?;
    require(p.n_test > 0, "n_test must be positive")?;
    require(p.test_chunk > 0, "test chunk must be positive")?;
    let cfg = &p.config;
    let mut sizes = p.n_samples.clone();
    sizes.sort_unstable();
    sizes.dedup();

    let mut found = None;
    for attempt in 0..=p.nominal_retries {
        let nominal_seed = derive_seed(p.seed, NOMINAL_STREAM + attempt as u64);
        let nominals = sample_ev_nominals(nominal_seed, cfg.m_agents)?;
        match reduced_for_sizes(cfg, p.seed, &sizes, &nominals) {
            Ok(r) => {
                found = Some((attempt, nominal_seed, nominals, r));
                break;
            }
            Err(CoreError::InfeasibleInstance(agents)) => {
                log::warn!("nominal draw {attempt} infeasible for agents {agents:?}, redrawing");
            }
            Err(e) => return Err(e.into()),
        }
    }
    let (attempt, nominal_seed, nominals, reduced) = found.ok_or_else(|| {
        CliError::Infeasible(format!(
            "no feasible nominal energies after {} draws",
            p.nominal_retries + 1
        ))
    })?;

    let opts = CertifyOptions {
        count_deterministic: p.count_deterministic,
    };
    struct Stage {
        n: usize,
        facet_count: usize,
        support_count: usize,
        epsilon: f64,
        eq: polycert_core::EquilibriumResult,
        candidates: Vec<Vec<f64>>,
    }
    let mut stages = Vec::with_capacity(sizes.len());
    for (i, (&n, rc)) in sizes.iter().zip(&reduced).enumerate() {
        let report = reduce_product(&rc.product_structure())?;
        let table = EpsilonTable::new(n, p.beta)?;
        let cert = certify_set(&table, &report, opts)?;
        let eq = solve_equilibrium(cfg, rc)?;
        let poly = rc.polytope()?;
        let x_ne = eq.flatten();
        match certify_point(&table, &poly, &report, &x_ne, opts) {
            Ok(_) => {}
            Err(CoreError::PointNotInSet) => {
                return Err(CliError::Invariant(format!("N={n}: equilibrium outside the reduced set")))
            }
            Err(e) => return Err(e.into()),
        }
        let mut candidates = vec![x_ne];
        candidates.extend(extreme_schedules(cfg, rc));
        if p.hit_and_run_points > 0 {
            let hr = HitAndRunParams {
                n_points: p.hit_and_run_points,
                seed: derive_seed(p.seed, HIT_AND_RUN_STREAM + i as u64),
                burn_in: p.hit_and_run_burn_in,
                thin: p.hit_and_run_thin,
            };
            candidates.extend(hit_and_run(&poly, &report.interior_point, hr)?);
        }
        log::info!(
            "N={n}: F_N={} k={} eps={} residual={:e} after {} iterations",
            report.facet_count,
            cert.k,
            cert.epsilon,
            eq.residual,
            eq.iterations
        );
        stages.push(Stage {
            n,
            facet_count: report.facet_count,
            support_count: cert.k,
            epsilon: cert.epsilon,
            eq,
            candidates,
        });
    }

    let model = cfg.violation_model(&nominals);
    let mut counts: Vec<Vec<u64>> = stages.iter().map(|s| vec![0; s.candidates.len()]).collect();
    let mut sampler = EvScenarioSampler::new(test_seed(p.seed), cfg.m_agents, cfg.horizon)?;
    let mut remaining = p.n_test;
    while remaining > 0 {
        let take = remaining.min(p.test_chunk);
        let chunk: Vec<_> = sampler.by_ref().take(take).collect();
        for (s, c) in stages.iter().zip(counts.iter_mut()) {
            for (acc, k) in c.iter_mut().zip(count_violations(&model, &s.candidates, &chunk)) {
                *acc += k;
            }
        }
        remaining -= take;
    }

    let mut rows = Vec::with_capacity(stages.len());
    for (s, c) in stages.iter().zip(&counts) {
        let set = estimate_from_counts(&s.candidates, c, p.n_test, EstimateMethod::HitAndRun)?;
        let ne = estimate_from_counts(&s.candidates[..1], &c[..1], p.n_test, EstimateMethod::Point)?;
        rows.push(Row {
            n_samples: s.n,
            facet_count: s.facet_count,
            support_count: s.support_count,
            epsilon: s.epsilon,
            ordering_holds: ne.value <= set.value && set.value <= s.epsilon,
            set_violation: set,
            ne_violation: ne,
            residual: s.eq.residual,
            iterations: s.eq.iterations,
            converged: s.eq.converged,
        });
    }

    dir.csv(
        "ev_game.csv",
        &[
            "n_samples",
            "facet_count",
            "k",
            "epsilon",
            "set_violation",
            "ne_violation",
            "set_wilson_high",
            "residual",
            "iterations",
        ],
        rows.iter().map(|r| {
            vec![
                r.n_samples.to_string(),
                r.facet_count.to_string(),
                r.support_count.to_string(),
                num(r.epsilon),
                num(r.set_violation.value),
                num(r.ne_violation.value),
                num(r.set_violation.wilson_high),
                num(r.residual),
                r.iterations.to_string(),
            ]
        }),
    )?;
    for (s, rc) in stages.iter().zip(&reduced) {
        let mut lines = Vec::new();
        for (m, (row, a)) in s.eq.x.iter().zip(&rc.agents).enumerate() {
            for t in 0..cfg.horizon {
                lines.push(vec![m.to_string(), t.to_string(), num(row[t]), num(a.upper[t]), num(a.lower[t])]);
            }
        }
        dir.csv(&schedule_file(s.n), &["agent", "t", "x", "upper", "lower"], lines)?;
    }

    let summary = Summary {
        seed: p.seed,
        n_test: p.n_test,
        beta: p.beta,
        nominal_seed,
        nominal_attempts: attempt + 1,
        energy_nominal: nominals,
        relaxation: cfg.effective_relaxation(),
        epsilon_decreasing: rows.windows(2).all(|w| w[1].epsilon < w[0].epsilon),
        all_converged: rows.iter().all(|r| r.converged),
        rows,
    };
    dir.json("summary.json", &summary)?;
    Ok(summary)
}
