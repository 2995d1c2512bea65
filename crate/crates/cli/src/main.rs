//! `moment-solve`: run, verify, and list the registered vanishing-moment
//! benchmark cases.
//!
//! Exit codes: 0 converged/pass, 2 partial (a continuation stage, sweep K,
//! or verify check failed), 1 error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use moment_core::harness::{registry, run_case, verify_case, RunConfig, RunStatus};

#[derive(Parser)]
#[command(name = "moment-solve", version, about = "Vanishing-moment solver for fully nonlinear PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run from a `key = value` config file.
    Run {
        /// Path to the config file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a registered case with optional overrides.
    Case {
        /// Case name (see `list`).
        name: String,
        /// Nodes per axis.
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated epsilon schedule, e.g. `1e-1,1e-2,1e-3`.
        #[arg(long, value_delimiter = ',')]
        eps_schedule: Option<Vec<f64>>,
        /// Override the auxiliary boundary value (default: per-stage eps²).
        #[arg(long)]
        aux_value: Option<f64>,
        /// Output directory (default `runs/<name>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Gauss curvature (test6 only).
        #[arg(long)]
        gauss_k: Option<f64>,
    },
    /// Run a case's registered acceptance checks.
    Verify {
        /// Case name (see `list`).
        name: String,
    },
    /// List the registered cases.
    List,
}

fn run(command: Command) -> Result<RunStatus, moment_core::Error> {
    match command {
        Command::Run { config } => {
            let cfg = RunConfig::parse_file(&config)?;
            let out = run_case(&cfg)?;
            println!(
                "{}: {} (manifest: {})",
                cfg.problem,
                match out.status {
                    RunStatus::Converged => "converged",
                    RunStatus::Partial => "partial",
                },
                out.manifest_path.display()
            );
            Ok(out.status)
        }
        Command::Case {
            name,
            n,
            eps_schedule,
            aux_value,
            out,
            gauss_k,
        } => {
            let mut cfg = RunConfig::new(name);
            cfg.n = n.map(|v| vec![v]);
            cfg.eps_schedule = eps_schedule;
            cfg.aux_value = aux_value;
            cfg.out_dir = out;
            cfg.gauss_k = gauss_k;
            let outcome = run_case(&cfg)?;
            println!(
                "{}: {} (manifest: {})",
                cfg.problem,
                match outcome.status {
                    RunStatus::Converged => "converged",
                    RunStatus::Partial => "partial",
                },
                outcome.manifest_path.display()
            );
            Ok(outcome.status)
        }
        Command::Verify { name } => {
            let (ok, lines) = verify_case(&name)?;
            for line in lines {
                println!("{line}");
            }
            Ok(if ok { RunStatus::Converged } else { RunStatus::Partial })
        }
        Command::List => {
            for case in registry() {
                println!(
                    "{:8} {}-d n={:<4} eps={:<7} {}",
                    case.name, case.dim, case.default_n, case.default_eps, case.description
                );
            }
            Ok(RunStatus::Converged)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(RunStatus::Converged) => ExitCode::SUCCESS,
        Ok(RunStatus::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
