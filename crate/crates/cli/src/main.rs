mod commands;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Overrides};

/// Simulate square-root CIR and reflected OU processes and check their limits.
#[derive(Parser)]
#[command(name = "rou-cir-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file (or a previous run manifest).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated Hurst indices.
    #[arg(long, value_delimiter = ',')]
    hurst: Vec<f64>,
    /// Comma-separated epsilon values.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Time step; sets the step count to round(T / dt).
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon T.
    #[arg(long)]
    horizon: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            config: self.config.clone(),
            seed: self.seed,
            hurst: self.hurst.clone(),
            eps: self.eps.clone(),
            dt: self.dt,
            horizon: self.horizon,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheme and write path CSV(s) plus a manifest.
    Simulate {
        /// cir-euler, sqrt-implicit, rou-projected, ou or ou-squared-sum.
        #[arg(long)]
        scheme: String,
        #[command(flatten)]
        common: Common,
    },
    /// Square-root paths and their epsilon integrals, one panel per Hurst index.
    Figure1 {
        #[command(flatten)]
        common: Common,
    },
    /// Epsilon ladder against the projected reflected OU path.
    Figure2 {
        #[command(flatten)]
        common: Common,
    },
    /// Run an acceptance suite: noise, schemes, reflection, convergence or all.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { scheme, common } => commands::simulate(&common.overrides(), &scheme, &common.out),
        Command::Figure1 { common } => commands::figure1(&common.overrides(), &common.out),
        Command::Figure2 { common } => commands::figure2(&common.overrides(), &common.out),
        Command::Verify { suite } => commands::verify(&suite),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
