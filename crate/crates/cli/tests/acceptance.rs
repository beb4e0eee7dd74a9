//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::fs;
use std::panic;
use std::path::Path;
use std::time::{Duration, Instant};

use polycert_cli::experiments::{epsilon_curve, ev_game, polytope_2d, validate_bound};
use polycert_cli::{replay, run, ExperimentSpec, MANIFEST_FILE};
use polycert_core::ev_game::{solve_box_energy_qp, GameConfig};
use polycert_core::numeric::CompensatedSum;
use polycert_core::polytope::{reduce, reduce_product, AgentBlock, ProductStructure, RowOrigin};
use polycert_core::sampling::{derive_seed, sample_ev_scenarios};
use polycert_core::EpsilonTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().expect("temporary directory")
}

/// `ln C(n, k)` for all `k` from ratios of consecutive binomials.
fn log_binomials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = CompensatedSum::new();
    out.push(0.0);
    for j in 0..n {
        acc.add(((n - j) as f64).ln() - ((j + 1) as f64).ln());
        out.push(acc.value());
    }
    out
}

fn criterion_1() -> Check {
    let mut worst: f64 = 0.0;
    let mut build_time = Duration::ZERO;
    for n in [100usize, 2000, 20_000, 200_000] {
        for beta in [1e-3, 1e-6] {
            let start = Instant::now();
            let t = EpsilonTable::new(n, beta).map_err(|e| e.to_string())?;
            if n == 200_000 {
                build_time = build_time.max(start.elapsed());
            }
            let lb = log_binomials(n);
            let sum: CompensatedSum = (0..n)
                .map(|k| (lb[k] + (n - k) as f64 * t.log_complement(k, true)).exp())
                .collect();
            let rel = ((sum.value() - beta) / beta).abs();
            worst = worst.max(rel);
            ensure(rel <= 1e-6, format!("N={n} beta={beta}: relative error {rel:e}"))?;
            ensure(t.eps(n) == 1.0, format!("N={n}: eps(N) != 1"))?;
        }
    }
    ensure(
        build_time < Duration::from_secs(5),
        format!("N=200000 table took {build_time:?}"),
    )?;
    Ok(format!(
        "max relative error {worst:.1e}, N=200000 built in {:.3}s",
        build_time.as_secs_f64()
    ))
}

fn criterion_2() -> Check {
    // 50-digit evaluation.
    #[allow(clippy::excessive_precision)]
    const ORACLE: f64 = 0.419_210_394_379_987_365_302_843_654_644_49;
    let t = EpsilonTable::new(100, 1e-6).map_err(|e| e.to_string())?;
    let got = t.eps(10);
    // Exact binomial, then a single pow.
    let binom: u128 = (0..10u128).fold(1, |acc, j| acc * (100 - j) / (j + 1));
    ensure(binom == 17_310_309_456_440, format!("C(100,10) = {binom}"))?;
    let direct = 1.0 - (1e-6 / (100.0 * binom as f64)).powf(1.0 / 90.0);
    ensure((got - ORACLE).abs() <= 1e-12, format!("eps(10) = {got}, oracle {ORACLE}"))?;
    ensure((direct - ORACLE).abs() <= 1e-12, format!("direct route {direct}"))?;
    Ok(format!("eps(10) = {got:.17}, |error| = {:.1e}", (got - ORACLE).abs()))
}

fn criterion_3() -> Check {
    let dir = tmp();
    let spec = ExperimentSpec::ValidateBound(validate_bound::Params::default());
    let start = Instant::now();
    let (outcome, _) = run(&spec, dir.path()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let polycert_cli::Outcome::ValidateBound(s) = outcome else {
        return Err("unexpected outcome".into());
    };
    for g in &s.groups {
        ensure(
            g.worst_violation <= g.epsilon,
            format!("k={}: worst violation {} > eps {}", g.k, g.worst_violation, g.epsilon),
        )?;
    }
    ensure(elapsed < Duration::from_secs(120), format!("runtime {elapsed:?}"))?;
    let tightest = s
        .groups
        .iter()
        .map(|g| g.epsilon - g.worst_violation)
        .fold(f64::INFINITY, f64::min);
    Ok(format!(
        "{} polytopes in {} groups (k {}..{}), smallest slack {tightest:.4}, {:.1}s",
        s.n_polytopes,
        s.groups.len(),
        s.groups.first().map_or(0, |g| g.k),
        s.groups.last().map_or(0, |g| g.k),
        elapsed.as_secs_f64()
    ))
}

fn criterion_4() -> Check {
    let dir = tmp();
    let spec = ExperimentSpec::Polytope2d(polytope_2d::Params::default());
    let (outcome, _) = run(&spec, dir.path()).map_err(|e| e.to_string())?;
    let polycert_cli::Outcome::Polytope2d(s) = outcome else {
        return Err("unexpected outcome".into());
    };
    ensure(
        s.argmax_vertex_distance <= s.grid_step,
        format!(
            "argmax {:?} is {} from the nearest vertex (step {})",
            s.set_violation.argmax_point, s.argmax_vertex_distance, s.grid_step
        ),
    )?;
    ensure(
        s.set_violation.value <= s.vertex_bound.bound + s.lemma_margin,
        format!(
            "set estimate {} exceeds 3 x vertex estimate {} + margin {}",
            s.set_violation.value, s.vertex_bound.bound, s.lemma_margin
        ),
    )?;
    ensure(s.vertex_count == s.facet_count, "vertex count differs from facet count")?;
    Ok(format!(
        "F_N = K_N = {}, {} grid points, V = {} at distance {} from a vertex, bound {}",
        s.facet_count, s.grid_points, s.set_violation.value, s.argmax_vertex_distance, s.vertex_bound.bound
    ))
}

fn box_product(m: usize, d: usize, seed: u64) -> Result<ProductStructure, String> {
    let cfg = GameConfig::with_size(m, d);
    let set = sample_ev_scenarios(seed, 2000, m, d).map_err(|e| e.to_string())?;
    let agents = (0..m)
        .map(|a| {
            let upper: Vec<f64> = (0..d)
                .map(|t| {
                    let min = set.draws.iter().map(|s| s.delta_u[a][t]).fold(f64::INFINITY, f64::min);
                    cfg.x_upper_nominal[t] + min
                })
                .collect();
            AgentBlock::new(cfg.x_lower.clone(), upper, None).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProductStructure::new(agents))
}

fn random_product(rng: &mut ChaCha8Rng) -> ProductStructure {
    let m = rng.random_range(1..=3);
    let agents = (0..m)
        .map(|_| {
            let d = rng.random_range(1..=4);
            let lower: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(0.2..2.0)).collect();
            let (sl, su): (f64, f64) = (lower.iter().sum(), upper.iter().sum());
            let energy = match rng.random_range(0..4) {
                0 => None,
                1 => Some(sl - rng.random_range(0.0..1.0)),
                _ => Some(sl + (su - sl) * rng.random_range(0.02..0.97)),
            };
            let mut b = AgentBlock::new(lower, upper, energy).expect("valid block");
            for o in b.lower_origin.iter_mut() {
                *o = RowOrigin::Deterministic;
            }
            b
        })
        .collect();
    ProductStructure::new(agents)
}

fn criterion_5() -> Check {
    for (m, d) in [(2usize, 3usize), (10, 12)] {
        let s = box_product(m, d, derive_seed(5, m as u64))?;
        let fast = reduce_product(&s).map_err(|e| e.to_string())?;
        ensure(fast.facet_count == 2 * m * d, format!("({m},{d}): F_N = {}", fast.facet_count))?;
        let lp = reduce(&s.flatten().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure(lp.facet_count == 2 * m * d, format!("({m},{d}): LP F_N = {}", lp.facet_count))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut removed = 0;
    for i in 0..100 {
        let s = random_product(&mut rng);
        let fast = reduce_product(&s).map_err(|e| e.to_string())?;
        let lp = reduce(&s.flatten().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure(
            fast.kept_rows == lp.kept_rows && fast.facet_count == lp.facet_count,
            format!("instance {i}: fast {:?} vs LP {:?}", fast.kept_rows, lp.kept_rows),
        )?;
        removed += lp.removed_rows.len();
    }
    Ok(format!(
        "F_N = 12 and 240 for (2,3) and (10,12); 100 random products agree ({removed} redundant rows)"
    ))
}

fn criterion_6() -> Check {
    let dir = tmp();
    let params = ev_game::Params::default();
    let spec = ExperimentSpec::EvGame(params.clone());
    let (outcome, _) = run(&spec, dir.path()).map_err(|e| e.to_string())?;
    let polycert_cli::Outcome::EvGame(s) = outcome else {
        return Err("unexpected outcome".into());
    };
    ensure(
        params.config.m_agents == 10 && params.config.horizon == 12 && params.beta == 1e-5,
        "unexpected defaults",
    )?;
    let mut parts = Vec::new();
    for r in &s.rows {
        ensure(r.residual <= 1e-6, format!("N={}: residual {:e}", r.n_samples, r.residual))?;
        ensure(
            r.ne_violation.value <= r.set_violation.value && r.set_violation.value <= r.epsilon,
            format!(
                "N={}: {} <= {} <= {} fails",
                r.n_samples, r.ne_violation.value, r.set_violation.value, r.epsilon
            ),
        )?;
        parts.push(format!(
            "N={} F={} k={} eps={:.4} V(set)={:.4} V(NE)={:.4}",
            r.n_samples, r.facet_count, r.support_count, r.epsilon, r.set_violation.value, r.ne_violation.value
        ));
    }
    ensure(
        s.rows.windows(2).all(|w| w[1].epsilon < w[0].epsilon),
        "eps(F_N) not decreasing in N",
    )?;

    // The full-scale path with a small test set.
    let big = ev_game::Params {
        n_samples: vec![200_000],
        n_test: 2000,
        ..ev_game::Params::full_scale()
    };
    let dir = tmp();
    let (outcome, _) = run(&ExperimentSpec::EvGame(big), dir.path()).map_err(|e| e.to_string())?;
    let polycert_cli::Outcome::EvGame(b) = outcome else {
        return Err("unexpected outcome".into());
    };
    parts.push(format!("N=200000 accepted (eps={:.4})", b.rows[0].epsilon));
    Ok(parts.join("; "))
}

fn quad_cost(a: &[f64], c: &[f64], x: &[f64]) -> f64 {
    (0..x.len()).map(|t| a[t] * x[t] * x[t] + c[t] * x[t]).sum()
}

/// Brute-force minimizer: a 200 x 200 lattice over the feasible box, then
/// the same lattice over shrinking windows around the incumbent. The energy
/// row gets its own zoomed 1-D grid since lattice points rarely land on it.
fn grid_minimizer(a: &[f64], c: &[f64], lower: &[f64], upper: &[f64], energy: f64) -> Option<Vec<f64>> {
    const POINTS: usize = 200;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let offer = |x: Vec<f64>, best: &mut Option<(f64, Vec<f64>)>| {
        let f = quad_cost(a, c, &x);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            *best = Some((f, x));
        }
    };

    let mut lattice: Option<(f64, Vec<f64>)> = None;
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    for _ in 0..8 {
        let h: Vec<f64> = (0..2).map(|k| (hi[k] - lo[k]) / (POINTS - 1) as f64).collect();
        for i in 0..POINTS {
            for j in 0..POINTS {
                let x = vec![lo[0] + i as f64 * h[0], lo[1] + j as f64 * h[1]];
                if x[0] + x[1] >= energy {
                    offer(x, &mut lattice);
                }
            }
        }
        let (_, x) = lattice.as_ref()?;
        for k in 0..2 {
            lo[k] = (x[k] - 10.0 * h[k]).max(lower[k]);
            hi[k] = (x[k] + 10.0 * h[k]).min(upper[k]);
        }
    }

    // x1 = energy - x0 on the segment inside the box.
    let (seg_lo, seg_hi) = ((energy - upper[1]).max(lower[0]), (energy - lower[1]).min(upper[0]));
    if seg_lo <= seg_hi {
        let (mut lo, mut hi) = (seg_lo, seg_hi);
        for _ in 0..8 {
            let h = (hi - lo) / (POINTS - 1) as f64;
            for i in 0..POINTS {
                let x0 = lo + i as f64 * h;
                offer(vec![x0, energy - x0], &mut best);
            }
            let x0 = best.as_ref()?.1[0];
            lo = (x0 - 10.0 * h).max(seg_lo);
            hi = (x0 + 10.0 * h).min(seg_hi);
        }
    }
    if let Some((_, x)) = lattice {
        offer(x, &mut best);
    }
    best.map(|(_, x)| x)
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut worst_arg, mut worst_gap): (f64, f64) = (0.0, 0.0);
    for i in 0..50 {
        let a: Vec<f64> = (0..2).map(|_| rng.random_range(0.1..3.0)).collect();
        let c: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
        let lower = vec![0.0, 0.0];
        let upper: Vec<f64> = (0..2).map(|_| rng.random_range(0.5..3.0)).collect();
        let energy = rng.random_range(0.0..0.95) * (upper[0] + upper[1]);
        let br = solve_box_energy_qp(&a, &c, &lower, &upper, energy).ok_or("infeasible instance")?;
        let grid = grid_minimizer(&a, &c, &lower, &upper, energy).ok_or("empty grid")?;
        let arg = (0..2).map(|k| (br.x[k] - grid[k]).abs()).fold(0.0, f64::max);
        let gap = (quad_cost(&a, &c, &br.x) - quad_cost(&a, &c, &grid)).abs();
        ensure(arg <= 1e-3, format!("instance {i}: argument error {arg:e}"))?;
        ensure(gap <= 1e-6, format!("instance {i}: cost gap {gap:e}"))?;
        ensure(
            quad_cost(&a, &c, &br.x) <= quad_cost(&a, &c, &grid) + 1e-12,
            format!("instance {i}: grid point beats the best response by {:e}", quad_cost(&a, &c, &br.x) - quad_cost(&a, &c, &grid)),
        )?;
        worst_arg = worst_arg.max(arg);
        worst_gap = worst_gap.max(gap);
    }
    Ok(format!("50 instances, max argument error {worst_arg:.1e}, max cost gap {worst_gap:.1e}"))
}

fn same_files(a: &Path, b: &Path, names: &[String]) -> Result<(), String> {
    for name in names {
        let x = fs::read(a.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let y = fs::read(b.join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(x == y, format!("{name} differs after replay"))?;
    }
    Ok(())
}

fn criterion_8() -> Check {
    let specs = vec![
        ExperimentSpec::EpsilonCurve(epsilon_curve::Params::default()),
        ExperimentSpec::Polytope2d(polytope_2d::Params {
            seed: 8,
            grid_target: 10_000,
            ..polytope_2d::Params::default()
        }),
        ExperimentSpec::ValidateBound(validate_bound::Params {
            seed: 8,
            n_polytopes: 3,
            n_samples: 500,
            n_test: 5000,
            grid_target: 2000,
            ..validate_bound::Params::default()
        }),
        ExperimentSpec::EvGame(ev_game::Params {
            seed: 8,
            n_samples: vec![300, 1000],
            n_test: 5000,
            test_chunk: 1500,
            ..ev_game::Params::default()
        }),
    ];
    let mut files = 0;
    for spec in specs {
        let first = tmp();
        let second = tmp();
        let (_, manifest) = run(&spec, first.path()).map_err(|e| e.to_string())?;
        let (_, again) = replay(&first.path().join(MANIFEST_FILE), second.path()).map_err(|e| e.to_string())?;
        ensure(manifest == again, "replayed manifest differs")?;
        let csvs: Vec<String> = manifest.outputs.iter().filter(|n| n.ends_with(".csv")).cloned().collect();
        same_files(first.path(), second.path(), &manifest.outputs)?;
        same_files(first.path(), second.path(), &[MANIFEST_FILE.to_string()])?;
        files += csvs.len();
    }
    Ok(format!("4 experiments replayed, {files} CSV files byte-identical"))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Check); 8] = [
        (1, "epsilon identity", criterion_1),
        (2, "epsilon spot value", criterion_2),
        (3, "2-D bound validation", criterion_3),
        (4, "2-D vertex argmax and vertex bound", criterion_4),
        (5, "facet-count formulas", criterion_5),
        (6, "EV certificate chain", criterion_6),
        (7, "best-response oracle", criterion_7),
        (8, "replay determinism", criterion_8),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, name, f) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(f).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {id} ({name}): {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id} ({name}): {why} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
