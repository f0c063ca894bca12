use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mpchem::boxmodel::{self, plot_table, read_csv, Representation, RunOptions};
use mpchem::config::{self, Severity};
use mpchem::core::{Core, CoreOptions};
use mpchem::state::serialize_state;

#[derive(Parser)]
#[command(
    name = "boxmodel",
    version,
    about = "Box model driver for the mpchem chemistry engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write a CSV time series.
    Run {
        /// Mechanism configuration files, merged in order.
        #[arg(long, num_args = 1.., required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_parser = parse_rep, default_value = "modes")]
        representation: Representation,
        #[arg(long)]
        output: PathBuf,
        /// Seed for particle sampling.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured relative tolerance.
        #[arg(long)]
        rtol: Option<f64>,
        /// Overrides the scenario's computational particle count.
        #[arg(long)]
        particles: Option<usize>,
        /// Also write the final state vector and environment as a binary buffer.
        #[arg(long)]
        dump_state: Option<PathBuf>,
    },
    /// Check configuration files and report diagnostics.
    Validate {
        #[arg(long, num_args = 1.., required = true)]
        config: Vec<PathBuf>,
    },
    /// Print a gnuplot-ready table of selected columns from one or more runs.
    Plot {
        /// Output CSVs; use `label=path` to name runs.
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<String>,
        /// Comma-separated species names.
        #[arg(long, value_delimiter = ',', required = true)]
        species: Vec<String>,
    },
}

fn parse_rep(s: &str) -> Result<Representation, String> {
    s.parse()
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run {
            config,
            scenario,
            representation,
            output,
            seed,
            rtol,
            particles,
            dump_state,
        } => {
            let opts = RunOptions {
                seed,
                rel_tol: rtol,
                n_particles: particles,
            };
            let out = boxmodel::run_scenario(&config, &scenario, &output, representation, &opts)?;
            if let Some(path) = dump_state {
                let env = boxmodel::Scenario::load(&scenario)?.environment();
                std::fs::write(&path, serialize_state(&out.final_state, &env))?;
            }
            eprintln!(
                "{} rows written to {} ({} steps, {} Jacobian evaluations)",
                out.rows.len(),
                output.display(),
                out.stats.steps,
                out.stats.jacobian_evaluations
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config: paths } => {
            let cfg = config::load_config_files(&paths)?;
            let diags = config::validate(&cfg);
            for d in &diags {
                println!("{d}");
            }
            if config::has_errors(&diags) {
                return Ok(ExitCode::FAILURE);
            }
            let core = Core::from_config(cfg, CoreOptions::default())?;
            let warnings = diags
                .iter()
                .filter(|d| d.severity == Severity::Warning)
                .count();
            println!(
                "ok: {} state variables, {} processes, {} Jacobian non-zeros, {warnings} warnings",
                core.n_total(),
                core.n_processes(),
                core.nnz()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { input, species } => {
            let mut runs = Vec::new();
            for spec in &input {
                let (label, path) = match spec.split_once('=') {
                    Some((l, p)) => (l.to_string(), PathBuf::from(p)),
                    None => {
                        let p = PathBuf::from(spec);
                        let label = p
                            .file_stem()
                            .map(|s| s.to_string_lossy().into_owned())
                            .unwrap_or_default();
                        (label, p)
                    }
                };
                runs.push((label, read_csv(&path)?));
            }
            print!("{}", plot_table(&runs, &species)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
