//! Binary entry point: argument parsing, configuration loading, and exit
//! code mapping. Exit 0 means success, 1 an operational failure, 2 a failed
//! check or mismatch, 3 an inconclusive verification.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use groundshot_cli::commands;
use groundshot_cli::config::{ExperimentConfig, DEFAULT_CONFIG};

#[derive(Parser)]
#[command(
    name = "groundshot",
    version,
    about = "Shooting laboratory for radial ground states of u'' + (N-1)/r u' + f(u) = 0"
)]
struct Cli {
    /// Configuration file; the embedded default (bare base family) is used
    /// when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides output.directory from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative integration tolerance override.
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    /// Absolute integration tolerance override.
    #[arg(long, global = true)]
    abs_tol: Option<f64>,
    /// Integration range override.
    #[arg(long, global = true)]
    r_max: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural hypotheses on the configured chain.
    Verify,
    /// Classify the shot from one initial value.
    Classify {
        #[arg(long)]
        alpha: f64,
    },
    /// Scan the initial-value range and bisect every classification change.
    GroundStates,
    /// Tune an alternating block chain with k sign alternations.
    Tune {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Rerun a built-in experiment and diff it against frozen results.
    Reproduce {
        #[arg(long)]
        example: u8,
    },
    /// Classify one probe per point of an (amplitude, eps) grid.
    Sweep,
    /// Write the embedded example configurations to the output directory.
    InitExamples,
}

fn run() -> anyhow::Result<i32> {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_toml_str(DEFAULT_CONFIG)?,
    };
    if let Some(rel_tol) = cli.rel_tol {
        config.solver.rel_tol = rel_tol;
    }
    if let Some(abs_tol) = cli.abs_tol {
        config.solver.abs_tol = abs_tol;
    }
    if let Some(r_max) = cli.r_max {
        config.solver.r_max = r_max;
    }
    config.validate()?;
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.directory));

    let exit = match cli.command {
        Command::Verify => commands::cmd_verify(&config, &out_dir)?.exit,
        Command::Classify { alpha } => commands::cmd_classify(&config, alpha, &out_dir)?.exit,
        Command::GroundStates => commands::cmd_ground_states(&config, &out_dir)?.exit,
        Command::Tune { k } => commands::cmd_tune(&config, k, &out_dir)?.exit,
        Command::Reproduce { example } => commands::cmd_reproduce(example, &out_dir)?.exit,
        Command::Sweep => commands::cmd_sweep(&config, &out_dir)?.exit,
        Command::InitExamples => {
            commands::cmd_init_examples(&out_dir)?;
            0
        }
    };
    Ok(exit)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code.clamp(0, u8::MAX as i32) as u8),
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(1)
        }
    }
}
