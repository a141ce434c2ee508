use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trustnet::commands::{self, cmd_oracle, cmd_run, cmd_sweep, cmd_theory};
use trustnet::config::{ConfigError, RunConfig};
use trustnet::{presets, CliError};
use trustnet_core::meanfield::DEFAULT_BINS;

#[derive(Parser)]
#[command(name = "trustnet", version, about = "Trust and risk-perception network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Flat JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Name of a bundled preset (see `trustnet presets`).
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<RunConfig, ConfigError> {
        match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path),
            (None, Some(name)) => presets::load(name),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a config (all seeds of its ensemble) and write CSV and JSON outputs.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        ensemble: Option<u64>,
        /// Also write the final effective trust of every touched pair.
        #[arg(long)]
        dump_trust: bool,
    },
    /// Run a config once per value of one field.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Config field to vary, e.g. `r_alpha`, `K` or `p`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print closed-form exponent and period (and C_inf when --v is given).
    Theory {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        v: Option<f64>,
    },
    /// Solve the mean-field fixed point and compare its slope with theory.
    Oracle {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        v: f64,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        grid: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = commands::ORACLE_MAX_ITER)]
        max_iter: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// List bundled presets.
    Presets,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            source,
            seed,
            steps,
            out,
            ensemble,
            dump_trust,
        } => {
            let mut cfg = source.load()?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(steps) = steps {
                cfg.steps = steps;
            }
            if let Some(out) = out {
                cfg.outputs = out;
            }
            if let Some(ensemble) = ensemble {
                cfg.ensemble = ensemble;
            }
            let summary = cmd_run(&cfg, dump_trust)?;
            print!("{}", commands::run_digest(&summary));
            println!("outputs={}", cfg.outputs.display());
        }
        Command::Sweep {
            source,
            param,
            values,
            out,
        } => {
            let mut cfg = source.load()?;
            if let Some(out) = out {
                cfg.outputs = out;
            }
            let path = cmd_sweep(&cfg, &param, &values)?;
            println!("sweep={}", path.display());
        }
        Command::Theory { a, r, v } => {
            print!("{}", commands::render(&cmd_theory(a, r, v)?));
        }
        Command::Oracle {
            a,
            r,
            v,
            grid,
            tol,
            max_iter,
            out,
        } => {
            let report = cmd_oracle(a, r, v, grid, tol, max_iter, &out)?;
            print!("{}", commands::render(&report.lines()));
            println!("csv={}", report.csv.display());
        }
        Command::Presets => {
            for name in presets::names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
