//! `birkhoff`: pressure, entropy at infinity and Birkhoff-spectrum dimensions from a JSON config.
//!
//! Exit codes: 0 on success (solver warnings land in the `flags` column),
//! 1 when a solver fails, 2 when the config or arguments are invalid.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use birkhoff_core::MapFamily;
use clap::{Args, Parser, Subcommand};

use commands::Failure;
use config::{parse_vector, Config, SchemaError};

#[derive(Parser)]
#[command(
    name = "birkhoff",
    version,
    about = "Thermodynamic formalism for expanding interval maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config (`"schema": "1"`).
    #[arg(long)]
    config: PathBuf,
    /// Also write `<out>.csv`, `<out>.json` and `<out>.dat`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Truncation {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "n-max")]
    n_max: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Gurevich pressure of the config potential (zero when absent).
    Pressure {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trunc: Truncation,
    },
    /// Topological entropy from loop counts and the truncated Perron root.
    Entropy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trunc: Truncation,
    },
    /// `s_inf = inf { t : P(-t log|T'|) < inf }`.
    SInf {
        #[command(flatten)]
        common: Common,
    },
    /// Excursion-count estimates of the entropy at infinity and the escape certificate.
    DeltaInf {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trunc: Truncation,
    },
    /// Abramov identity on random Markov measures pushed to the split shifts.
    SuspensionCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Level-set dimension for the config potentials (digit frequencies when absent).
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Comma-separated targets; repeat for a grid.
        #[arg(long, value_parser = parse_vector)]
        gamma: Vec<Vec<f64>>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Digit-frequency spectrum.
    FreqSpectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_vector)]
        gamma: Vec<Vec<f64>>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Dimension of the transient set of `F_lambda`.
    TransientDim {
        #[arg(long, conflicts_with = "config")]
        lambda: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_threads() {
    if let Some(n) = std::env::var("BIRKHOFF_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn run(cli: Cli) -> Result<(output::Report, Option<PathBuf>), Failure> {
    let load = |c: &Common| Config::load(&c.config);
    Ok(match cli.command {
        Command::Pressure { common, trunc } => (
            commands::pressure(&load(&common)?, trunc.k, trunc.n_max)?,
            common.out,
        ),
        Command::Entropy { common, trunc } => (
            commands::entropy(&load(&common)?, trunc.k, trunc.n_max)?,
            common.out,
        ),
        Command::SInf { common } => (commands::s_inf(&load(&common)?)?, common.out),
        Command::DeltaInf { common, trunc } => (
            commands::delta_inf(&load(&common)?, trunc.k, trunc.n_max)?,
            common.out,
        ),
        Command::SuspensionCheck { common, k } => {
            (commands::suspension_check(&load(&common)?, k)?, common.out)
        }
        Command::Spectrum { common, gamma, k } => {
            (commands::spectrum(&load(&common)?, &gamma, k)?, common.out)
        }
        Command::FreqSpectrum { common, gamma, k } => {
            (commands::freq(&load(&common)?, &gamma, k)?, common.out)
        }
        Command::TransientDim {
            lambda,
            config,
            out,
        } => {
            let map = match (lambda, config) {
                (Some(lambda), _) => MapFamily::FLambda { lambda },
                (None, Some(path)) => Config::load(&path)?.map,
                (None, None) => {
                    return Err(SchemaError("lambda: give --lambda or --config".into()).into())
                }
            };
            (commands::transient(&map)?, out)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    match run(cli) {
        Ok((report, out)) => match report.emit(out.as_deref()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: writing output: {e}");
                ExitCode::from(1)
            }
        },
        Err(Failure::Schema(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver error: {e}");
            ExitCode::from(1)
        }
    }
}
