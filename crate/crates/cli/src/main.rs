use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::bail;
use clap::{Parser, Subcommand};
use ptobs::output;
use ptobs::runner::execute;
use ptobs::scenario::{self, BUILTINS};

/// Exit codes: 0 ok, 2 validation (bad scenario or CLI usage), 3 runtime
/// (integration blow-up, I/O).
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ptobs",
    version,
    about = "Observer experiments on triangular plants: run JSON scenarios into CSV trajectories, certificate/metrics reports and gnuplot scripts"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file (or a built-in scenario by name)
    Run {
        /// Path to a scenario JSON file, or a built-in name (see `ptobs scenarios list`)
        scenario: String,
        /// Output directory (default: runs/<scenario name>)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario's noise seed
        #[arg(long)]
        seed: Option<u64>,
        /// Emit the configuration echo and gain certificates only; skip the simulation
        #[arg(long)]
        check_only: bool,
    },
    /// Built-in scenario catalogue
    Scenarios {
        #[command(subcommand)]
        cmd: ScenariosCmd,
    },
    /// Re-emit the gnuplot script for an existing run directory
    Plot {
        /// Directory containing a run manifest (run.json)
        run_dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum ScenariosCmd {
    /// List built-in scenario names
    List,
    /// Print a built-in scenario's JSON
    Show { name: String },
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run { scenario, out, seed, check_only } => cmd_run(&scenario, out, seed, check_only),
        Cmd::Scenarios { cmd: ScenariosCmd::List } => {
            for (name, _) in BUILTINS {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Cmd::Scenarios { cmd: ScenariosCmd::Show { name } } => match scenario::builtin(&name) {
            Some(src) => {
                print!("{src}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: no built-in scenario named `{name}`");
                ExitCode::from(EXIT_VALIDATION)
            }
        },
        Cmd::Plot { run_dir } => cmd_plot(&run_dir),
    }
}

fn cmd_run(name: &str, out: Option<PathBuf>, seed: Option<u64>, check_only: bool) -> ExitCode {
    let mut ls = match scenario::load(name) {
        Ok(ls) => ls,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    if let Some(s) = seed {
        ls.set_seed(s);
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from("runs").join(&ls.scenario.name));
    match execute(&ls, &out_dir, check_only) {
        Ok(outcome) => {
            println!("report: {}", outcome.report_path.display());
            for p in &outcome.csv_paths {
                println!("csv: {}", p.display());
            }
            if let Some(p) = &outcome.plot_path {
                println!("plot: {}", p.display());
            }
            if outcome.blew_up {
                eprintln!(
                    "error: integration reached a non-finite state; see the blowup block in the report"
                );
                ExitCode::from(EXIT_RUNTIME)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn cmd_plot(run_dir: &Path) -> ExitCode {
    match plot_existing(run_dir) {
        Ok(path) => {
            println!("plot: {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn plot_existing(run_dir: &Path) -> anyhow::Result<PathBuf> {
    let manifest = output::read_manifest(run_dir)?;
    if manifest.csv.is_empty() {
        bail!("run directory has no CSV artifacts (was this a --check-only run?)");
    }
    let script = output::plot_script(&manifest.scenario.name, &manifest.csv);
    let file = manifest
        .plot_script
        .as_deref()
        .unwrap_or(manifest.scenario.output.plot_script.as_str());
    let path = run_dir.join(file);
    std::fs::write(&path, script)?;
    Ok(path)
}
