use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use krylov_lie::scenario::{builtin_names, resolve, run, write_outputs, RunOptions, Scenario};
use krylov_lie::Error;
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "krylov-lie", version, about = "Exact Krylov dynamics on rank-one Lie algebras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run built-in scenarios or JSON configs.
    Run {
        #[arg(required = true)]
        targets: Vec<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Integration tolerance override.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        no_oracle: bool,
    },
    /// List built-in scenarios.
    List,
}

enum Outcome {
    Pass,
    Fail,
    Usage,
}

fn run_one(target: &str, out: &Path, opts: &RunOptions) -> (Outcome, String) {
    let result = resolve(target).and_then(Scenario::new).and_then(|s| {
        let report = run(&s, opts)?;
        write_outputs(&report, out)?;
        Ok(report)
    });
    match result {
        Ok(report) if report.passed() => {
            let last = report.grid.len() - 1;
            (Outcome::Pass, format!("{}: ok (K_final = {:.10})", report.name, report.total_complexity(last)))
        }
        Ok(report) => {
            let mut msg = format!("{}: FAILED", report.name);
            for c in report.failed_checks() {
                msg.push_str(&format!("\n  {}: {:e} > {:e}", c.name, c.value, c.tolerance));
            }
            (Outcome::Fail, msg)
        }
        Err(e @ Error::Config(_)) => (Outcome::Usage, format!("{target}: {e}")),
        Err(e) => (Outcome::Fail, format!("{target}: {e}")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::List => {
            for (name, desc) in builtin_names() {
                println!("{name:<20} {desc}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { targets, out, tol, no_oracle } => {
            if let Some(t) = tol {
                if !(t.is_finite() && t > 0.0) {
                    eprintln!("--tol must be positive and finite");
                    return ExitCode::from(2);
                }
            }
            let threads = std::env::var("KRYLOV_LIE_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(n) = threads.filter(|n| *n > 0) {
                builder = builder.num_threads(n);
            }
            let pool = match builder.build() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("thread pool: {e}");
                    return ExitCode::from(2);
                }
            };
            let opts = RunOptions { tol, oracle: !no_oracle };
            let results: Vec<(Outcome, String)> =
                pool.install(|| targets.par_iter().map(|t| run_one(t, &out, &opts)).collect());
            let mut code = 0;
            for (outcome, msg) in results {
                match outcome {
                    Outcome::Pass => println!("{msg}"),
                    Outcome::Fail => {
                        eprintln!("{msg}");
                        code = code.max(1);
                    }
                    Outcome::Usage => {
                        eprintln!("{msg}");
                        code = 2;
                    }
                }
            }
            ExitCode::from(code)
        }
    }
}
