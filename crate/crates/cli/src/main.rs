//! Command line front end: run scenario suites, inspect them, export fields.
//!
//! Exit codes: `0` every executed scenario passed, `1` at least one check or
//! certificate failed, `2` configuration or I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use harnack_core::heat::write_csv;
use harnack_core::runner::{
    bundled_config, configure_threads, run_config, solve_scenario, Overrides,
};
use harnack_core::scenario::{ConfigFile, Scenario};
use harnack_core::Result;

#[derive(Parser)]
#[command(
    name = "harnacklab",
    version,
    about = "Certify curvature conditions for evolving weighted manifolds, solve the \
             associated heat flows, and sweep gradient/Harnack-type bounds against them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify, solve, sweep every configured check, and report.
    Run {
        /// Scenario TOML (defaults to the bundled suite).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for report.json and per-scenario field CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run only the scenario with this name.
        #[arg(long)]
        scenario: Option<String>,
        /// Replace every scenario's Monte Carlo seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for path ensembles (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Multiply every margin tolerance (e.g. 10 to triage a red run).
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
    /// List scenario names with their descriptions.
    ListScenarios {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print one scenario's resolved configuration as JSON.
    Describe {
        name: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Solve one scenario and write its space-time field as CSV.
    DumpField {
        name: String,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Keep every n-th time row.
        #[arg(long, default_value_t = 1)]
        stride_t: usize,
        /// Keep every n-th space node.
        #[arg(long, default_value_t = 1)]
        stride_x: usize,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p),
        None => bundled_config(),
    }
}

fn find_scenario<'c>(cfg: &'c ConfigFile, name: &str) -> Result<&'c Scenario> {
    cfg.scenarios
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| {
            harnack_core::CoreError::Config(format!(
                "no scenario named '{name}' (available: {})",
                cfg.scenarios
                    .iter()
                    .map(|s| s.name.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            scenario,
            seed,
            threads,
            tolerance_scale,
        } => {
            if let Some(n) = threads {
                configure_threads(n)?;
            }
            let cfg = load_config(&config)?;
            let ov = Overrides {
                seed,
                tolerance_scale,
            };
            let run = run_config(&cfg, scenario.as_deref(), out.as_deref(), &ov)?;
            for line in run.summary_lines() {
                println!("{line}");
            }
            if let Some(dir) = &out {
                println!("artifacts written to {}", dir.display());
            }
            Ok(if run.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::ListScenarios { config } => {
            let cfg = load_config(&config)?;
            for sc in &cfg.scenarios {
                println!(
                    "{:<28} {}",
                    sc.name,
                    sc.description.as_deref().unwrap_or("")
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Describe { name, config } => {
            let cfg = load_config(&config)?;
            let sc = find_scenario(&cfg, &name)?;
            let json = serde_json::to_string_pretty(sc).map_err(|e| {
                harnack_core::CoreError::Config(format!("could not serialize scenario: {e}"))
            })?;
            println!("{json}");
            Ok(ExitCode::SUCCESS)
        }
        Command::DumpField {
            name,
            out,
            config,
            stride_t,
            stride_x,
        } => {
            let cfg = load_config(&config)?;
            let sc = find_scenario(&cfg, &name)?;
            let field = solve_scenario(sc)?;
            write_csv(&field, &out, stride_t, stride_x)?;
            println!(
                "wrote {} ({} time rows x {} nodes before striding)",
                out.display(),
                field.n_t(),
                field.n_x()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
