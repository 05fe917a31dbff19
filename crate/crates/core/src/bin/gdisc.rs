use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gdisc::experiment::{self, Command, ExperimentConfig};
use gdisc::Error;

/// Discretization bias of the g-formula under a bivariate OU process.
#[derive(Parser)]
#[command(name = "gdisc", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analytic θ^g_J, η and δ_J over a parameter sweep.
    BiasTable(RunArgs),
    /// Observed and counterfactual trajectory panels.
    Simulate(RunArgs),
    /// Bootstrap discretization-sensitivity (ζ) sweep.
    Zeta(RunArgs),
    /// Print the default configuration as TOML.
    DefaultConfig,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    /// flags > file > defaults
    fn resolve(&self) -> gdisc::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(threads) = self.threads {
            cfg.threads = threads;
        }
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::BiasTable(a) => (Command::BiasTable, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Zeta(a) => (Command::Zeta, a),
        Cmd::DefaultConfig => {
            return match ExperimentConfig::default().to_toml_string() {
                Ok(s) => {
                    print!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code(&e))
                }
            };
        }
    };
    match args.resolve().and_then(|cfg| experiment::run(cmd, &cfg)) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
