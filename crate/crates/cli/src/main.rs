//! `eeuler`: runs Einstein–Euler scenarios and writes monitors, dumps, norm
//! reports and plots.

mod commands;
mod error;
mod plot;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use einstein_euler::wsobolev::inequalities::TestFamily;

use commands::Options;
use error::CliError;

#[derive(Parser)]
#[command(name = "eeuler", version, about = "Einstein-Euler scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Treat an `s` outside the well-posedness window as an error.
    #[arg(long, global = true)]
    strict_window: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a scenario and write monitors, dumps, plots and a summary.
    Run { scenario: PathBuf },
    /// Weighted Sobolev norms of the initial data.
    CheckNorms { scenario: PathBuf },
    /// Run at successively doubled resolutions and report observed orders.
    Convergence {
        scenario: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: u32,
    },
    /// Dump the assembled 55×55 matrices at one grid point.
    Matrices {
        scenario: PathBuf,
        /// Grid index `i,j,k`.
        #[arg(long, value_parser = parse_point)]
        point: [usize; 3],
    },
    /// Empirical checks of the weighted Sobolev inequalities.
    Inequalities {
        #[arg(long, default_value = "mixed")]
        family: String,
        /// Adiabatic exponent for the fractional-power probe. Even integer
        /// values of 2/(γ−1) make the power smooth and nothing blows up.
        #[arg(long, default_value_t = 5.0 / 3.0)]
        gamma: f64,
    },
}

fn parse_point(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected i,j,k, got '{s}'"));
    }
    let mut out = [0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|e| format!("'{p}': {e}"))?;
    }
    Ok(out)
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let opts = Options { out: cli.out.clone(), seed: cli.seed, threads: cli.threads, strict_window: cli.strict_window };
    match &cli.command {
        Command::Run { scenario } => {
            let sc = scenario::load_scenario(scenario)?;
            let summary = commands::run(&sc, &base_dir(scenario), &opts)?;
            for c in &summary.checks {
                println!("{:<20} {:>12.4e}  bound {:>10.3e}  {}", c.name, c.value, c.bound, if c.pass { "ok" } else { "FAILED" });
            }
            println!("summary written to {}", opts.out.join("summary.json").display());
            if !summary.pass {
                return Err(CliError::CheckFailed(summary.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect()));
            }
        }
        Command::CheckNorms { scenario } => {
            let sc = scenario::load_scenario(scenario)?;
            for r in commands::check_norms(&sc, &base_dir(scenario), &opts)? {
                if r.value != 0.0 {
                    let tail = r.tail.map(|t| format!("{t:.1e}")).unwrap_or_default();
                    println!("{:<10} {:>14.6e}  tail {tail}", r.function, r.value);
                }
            }
        }
        Command::Convergence { scenario, levels } => {
            let sc = scenario::load_scenario(scenario)?;
            commands::convergence(&sc, &base_dir(scenario), *levels, &opts)?;
        }
        Command::Matrices { scenario, point } => {
            let sc = scenario::load_scenario(scenario)?;
            let dir = commands::matrices(&sc, &base_dir(scenario), *point, &opts)?;
            println!("matrices written to {}", dir.display());
        }
        Command::Inequalities { family, gamma } => {
            let fam: TestFamily = family.parse().map_err(|e| CliError::invalid("family", e))?;
            let s = commands::run_inequalities(fam, *gamma, &opts)?;
            for r in &s.results {
                println!("{:<22} worst {:>10.4}  bound {:>8.3}  {}", r.name, r.worst, r.bound, if r.pass { "ok" } else { "FAILED" });
            }
            println!("random monotonicity violations: {} of {}", s.random_monotonicity_violations, commands::RANDOM_MEMBERS);
            if !s.pass {
                return Err(CliError::CheckFailed(s.results.iter().filter(|r| !r.pass).map(|r| r.name.clone()).collect()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
