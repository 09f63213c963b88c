//! `rwie`: simulate the walk, run operator checks, export Walsh spectra, and run CLT experiments.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rwie_core::Error;

use crate::commands::Check;
use crate::config::{output_dir, ConfigError};

#[derive(Parser)]
#[command(name = "rwie", version, about = "Random walk in a dynamic random environment: simulation, operator checks, Walsh spectra and CLT diagnostics")]
struct Cli {
    /// Worker threads for replica and operator parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory. Falls back to `outputs.dir` in the config, then $RWIE_OUT_DIR, then ./rwie-out.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories; writes trajectory CSV (`t,zeta,x_1..`) and metadata.
    Simulate {
        /// Experiment config (JSON).
        config: PathBuf,
        /// Number of replicas to write (replica indices 0..R).
        #[arg(long, default_value_t = 1)]
        replicas: usize,
    },
    /// Operator-level checks; writes a bound ledger CSV.
    Operator {
        config: PathBuf,
        #[arg(long, value_enum)]
        check: Check,
    },
    /// Walsh spectrum of a torus function (`linear`, `cos1`, `constant:<c>`, `weierstrass:alpha=<a>`).
    Walsh {
        function: String,
        /// Coefficients for all gamma inside {0..depth-1}.
        #[arg(long)]
        depth: u32,
        /// Midpoint quadrature depth (default max(depth+4, 20)).
        #[arg(long)]
        quad: Option<u32>,
    },
    /// Limiting variance, covariance series and the CLT battery.
    Clt { config: PathBuf },
}

enum Failure {
    Config(ConfigError),
    Run(Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(ConfigError(vec![format!("--jobs: {e}")])))?;
    }
    match cli.command {
        Command::Simulate { config, replicas } => {
            let loaded = config::load(&config)?;
            if replicas == 0 {
                return Err(ConfigError(vec!["--replicas must be >= 1".into()]).into());
            }
            let out = output_dir(cli.out.as_deref(), Some(&loaded.config.outputs));
            commands::simulate(&loaded, &out, replicas)?;
            println!("simulate: wrote {} (config {})", out.display(), loaded.hash);
        }
        Command::Operator { config, check } => {
            let loaded = config::load(&config)?;
            let out = output_dir(cli.out.as_deref(), Some(&loaded.config.outputs));
            let ledger = commands::operator(&loaded, &out, check)?;
            let fails = ledger.failures();
            println!(
                "operator: {} rows, {} fail, {} not in regime -> {}",
                ledger.rows.len(),
                fails.len(),
                ledger.count(rwie_core::clt::bounds::Status::NotInRegime),
                out.display()
            );
            for r in fails.iter().take(20) {
                println!("  FAIL {} lhs={:e} rhs={:e}", r.check, r.lhs, r.rhs);
            }
        }
        Command::Walsh { function, depth, quad } => {
            let out = output_dir(cli.out.as_deref(), None);
            commands::walsh(&function, depth, quad, &out).map_err(|e| match e {
                Error::Malformed(_) | Error::Precondition(_) => Failure::Config(ConfigError(vec![e.to_string()])),
                e => Failure::Run(e),
            })?;
            println!("walsh: wrote {}", out.display());
        }
        Command::Clt { config } => {
            let loaded = config::load(&config)?;
            let out = output_dir(cli.out.as_deref(), Some(&loaded.config.outputs));
            commands::clt(&loaded, &out)?;
            println!("clt: wrote {} (config {})", out.display(), loaded.hash);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprint!("{e}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("{e}");
            match e {
                Error::InvalidParams(_) | Error::Malformed(_) | Error::Json(_) => ExitCode::from(2),
                Error::ZeroDispersion(_)
                | Error::NotInRegime(_)
                | Error::Precondition(_)
                | Error::NonConvergence { .. }
                | Error::NonGeometricDecay { .. } => ExitCode::from(3),
                Error::InvalidSpin(_) | Error::Io(_) => ExitCode::from(1),
            }
        }
    }
}
