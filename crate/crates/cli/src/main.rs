use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polycert_cli::experiments::{epsilon_curve, ev_game, polytope_2d, validate_bound};
use polycert_cli::{replay, run_checked, CliError, CliResult, ExperimentSpec, Outcome};
use polycert_core::ev_game::GameConfig;
use polycert_core::polytope::{reduce, HPolytope, VRep, DEFAULT_VERTEX_DIM_CAP};

#[derive(Parser)]
#[command(name = "polycert", version, about = "Scenario polytope certificates and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory for CSV, summary and manifest files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Confidence parameter.
    #[arg(long)]
    beta: Option<f64>,
    /// Use the larger settings of the published experiments.
    #[arg(long)]
    full_scale: bool,
    /// Count facets of the deterministic set towards k as well.
    #[arg(long)]
    count_deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// eps(k) curves, one CSV per sample size.
    EpsilonCurve {
        #[arg(long, value_delimiter = ',')]
        n_samples: Option<Vec<usize>>,
        #[command(flatten)]
        common: Common,
    },
    /// Violation map of one random 2-D polytope.
    #[command(name = "polytope-2d")]
    Polytope2d {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
        #[arg(long)]
        grid_step: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Worst empirical violation per facet count against eps(k).
    ValidateBound {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_polytopes: Option<usize>,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// EV charging game certificates for a list of sample sizes.
    EvGame {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        n_samples: Option<Vec<usize>>,
        #[arg(long)]
        n_test: Option<usize>,
        /// Game configuration as JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        m_agents: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run an experiment from its manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long, default_value = "replay")]
        out: PathBuf,
    },
    /// Reduce an H-polytope given as JSON and print the report.
    Reduce {
        input: PathBuf,
        /// Also enumerate vertices (dimension at most 4).
        #[arg(long)]
        vertices: bool,
    },
}

fn spec(command: Command) -> CliResult<(ExperimentSpec, PathBuf)> {
    Ok(match command {
        Command::EpsilonCurve { n_samples, common } => {
            let mut p = epsilon_curve::Params::default();
            if let Some(n) = n_samples {
                p.n_samples = n;
            }
            if let Some(b) = common.beta {
                p.beta = b;
            }
            (ExperimentSpec::EpsilonCurve(p), common.out)
        }
        Command::Polytope2d {
            seed,
            n_samples,
            n_test,
            grid_step,
            common,
        } => {
            let mut p = polytope_2d::Params::default();
            p.seed = seed.unwrap_or(p.seed);
            p.n_samples = n_samples.unwrap_or(p.n_samples);
            p.n_test = n_test.unwrap_or(p.n_test);
            p.beta = common.beta.unwrap_or(p.beta);
            p.grid_step = grid_step;
            p.count_deterministic = common.count_deterministic;
            (ExperimentSpec::Polytope2d(p), common.out)
        }
        Command::ValidateBound {
            seed,
            n_polytopes,
            n_samples,
            n_test,
            common,
        } => {
            let mut p = validate_bound::Params::default();
            if common.full_scale {
                p.n_polytopes = 50;
            }
            p.seed = seed.unwrap_or(p.seed);
            p.n_polytopes = n_polytopes.unwrap_or(p.n_polytopes);
            p.n_samples = n_samples.unwrap_or(p.n_samples);
            p.n_test = n_test.unwrap_or(p.n_test);
            p.beta = common.beta.unwrap_or(p.beta);
            p.count_deterministic = common.count_deterministic;
            (ExperimentSpec::ValidateBound(p), common.out)
        }
        Command::EvGame {
            seed,
            n_samples,
            n_test,
            config,
            m_agents,
            horizon,
            common,
        } => {
            let mut p = if common.full_scale {
                ev_game::Params::full_scale()
            } else {
                ev_game::Params::default()
            };
            if m_agents.is_some() || horizon.is_some() {
                p.config = GameConfig::with_size(
                    m_agents.unwrap_or(p.config.m_agents),
                    horizon.unwrap_or(p.config.horizon),
                );
            }
            if let Some(path) = config {
                let text = fs::read_to_string(&path)?;
                p.config = serde_json::from_str(&text)
                    .map_err(|e| CliError::Params(format!("cannot parse {}: {e}", path.display())))?;
            }
            p.seed = seed.unwrap_or(p.seed);
            if let Some(n) = n_samples {
                p.n_samples = n;
            }
            p.n_test = n_test.unwrap_or(p.n_test);
            p.beta = common.beta.unwrap_or(p.beta);
            p.count_deterministic = common.count_deterministic;
            (ExperimentSpec::EvGame(p), common.out)
        }
        Command::Replay { .. } | Command::Reduce { .. } => unreachable!("handled before"),
    })
}

fn reduce_file(input: PathBuf, with_vertices: bool) -> CliResult<()> {
    let text = fs::read_to_string(&input)?;
    let poly = HPolytope::from_json(&text)?;
    let report = reduce(&poly)?;
    let mut value = serde_json::to_value(&report)?;
    if with_vertices {
        let v = VRep::from_report(&poly, &report, DEFAULT_VERTEX_DIM_CAP)?;
        value["vertices"] = serde_json::to_value(&v.vertices)?;
    }
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn report(outcome: &Outcome) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(outcome)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reduce { input, vertices } => reduce_file(input, vertices),
        Command::Replay { manifest, out } => replay(&manifest, &out).and_then(|(o, _)| report(&o)),
        command => spec(command).and_then(|(s, out)| {
            let (outcome, _) = run_checked(&s, &out)?;
            report(&outcome)?;
            log::info!("results written to {}", out.display());
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
