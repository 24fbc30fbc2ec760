use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use densemss::checks::run_checks;
use densemss::harness::{performance_profile, read_runs_csv, write_profile_csv};
use densemss::{emit, problem, run_grid, solve, GridConfig, InitOption, Metric, SolverKind, TrConfig};

#[derive(Parser)]
#[command(name = "bench", version, about = "MSS trust-region benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solver grid and write runs.csv, profiles and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute a performance profile from an existing runs.csv.
    Profile {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, default_value = "fevals")]
        metric: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gradient checks and randomized invariant sweeps.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve a single suite problem and print the report.
    Solve {
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value = "mss")]
        solver: String,
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, default_value = "half-sum-bb")]
        option: String,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, jobs, seed } => {
            let mut cfg = GridConfig::from_path(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let records = run_grid(&cfg, jobs)?;
            let summary = emit(&records, &out)?;
            for s in &summary.solvers {
                println!(
                    "{:28} solved {:3}/{:3}  common fevals {:8}",
                    s.label, s.solved, s.runs, s.common_fevals
                );
            }
            println!("{} commonly solved problems; output in {}", summary.common_problems.len(), out.display());
        }
        Command::Profile { runs, metric, out } => {
            let metric: Metric = metric.parse()?;
            let records = read_runs_csv(&runs)?;
            let curves = performance_profile(&records, metric)?;
            write_profile_csv(&curves, &out)?;
            println!("wrote {} curves to {}", curves.len(), out.display());
        }
        Command::Check { seed } => {
            let outcomes = run_checks(seed);
            let mut failed = 0;
            for c in &outcomes {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                bail!("{failed} check(s) failed");
            }
        }
        Command::Solve { problem: name, n, solver, m, option } => {
            let p = problem(&name, n)?;
            let solver: SolverKind = solver.parse().map_err(anyhow::Error::msg)?;
            let option: InitOption = option.parse()?;
            let cfg = TrConfig { solver, m, option, ..TrConfig::default() };
            let r = solve(&p, &cfg).with_context(|| format!("solving {name}"))?;
            println!(
                "{name} n={n} {solver}: {} iters={} fevals={} |g|={:e} f={:e} fallbacks={} {:.1} ms",
                r.status, r.iters, r.fevals, r.final_gnorm, r.final_f, r.fallback_steps, r.wall_ms
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
