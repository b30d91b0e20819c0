mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spikeguard::attack::NoiseKind;

use crate::commands::Run;
use crate::config::{ExperimentConfig, Overrides};
use crate::error::CliError;

/// Event-camera noise filtering as a defense against adversarial attacks on
/// spiking networks.
#[derive(Parser)]
#[command(name = "spikeguard", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Summarise a dataset or a single recording.
    Ingest,
    /// Train a network and write a checkpoint.
    Train,
    /// Attack the test split and run the random-noise study.
    Attack {
        /// Checkpoint to attack; `<out>/checkpoint.json` by default.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Search filter parameters under each threat model.
    Defend {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Render SVG charts from defense grids and noise reports.
    Report {
        /// Defense grid CSV/JSON or noise CSV files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct OverrideArgs {
    /// Master seed; every stage derives its own stream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// N-MNIST root directory, or a single recording for `ingest`.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Training batch size.
    #[arg(long, global = true)]
    batch: Option<usize>,
    /// Training learning rate.
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Attack iterations per sample.
    #[arg(long, global = true)]
    attack_iters: Option<usize>,
    /// Attack step size, in event counts.
    #[arg(long, global = true)]
    attack_step: Option<f64>,
    /// `all` or comma-separated bin indices.
    #[arg(long, global = true)]
    mask: Option<String>,
    /// Spatial radius; also pins the search grid to this value.
    #[arg(long, global = true)]
    filter_s: Option<u32>,
    /// Temporal threshold in ms; also pins the search grid to this value.
    #[arg(long, global = true)]
    filter_t_ms: Option<f64>,
    /// Restrict the noise study to `uniform` or `normal`.
    #[arg(long, global = true, value_parser = parse_noise)]
    noise: Option<NoiseKind>,
    /// Restrict the noise study to a single magnitude.
    #[arg(long, global = true)]
    noise_magnitude: Option<f64>,
}

fn parse_noise(s: &str) -> Result<NoiseKind, String> {
    s.parse().map_err(|e: spikeguard::Error| e.to_string())
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            seed: a.seed,
            data: a.data,
            epochs: a.epochs,
            batch: a.batch,
            lr: a.lr,
            attack_iters: a.attack_iters,
            attack_step: a.attack_step,
            mask: a.mask,
            filter_s: a.filter_s,
            filter_t_ms: a.filter_t_ms,
            noise: a.noise,
            noise_magnitude: a.noise_magnitude,
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Command::Report { inputs } = &cli.command {
        return commands::report_cmd(&cli.out, inputs);
    }
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    cfg.apply(&cli.overrides.into());
    cfg.validate()?;
    let run = Run { cfg, out: cli.out };
    match &cli.command {
        Command::Ingest => commands::ingest(&run),
        Command::Train => commands::train_cmd(&run),
        Command::Attack { checkpoint } => commands::attack_cmd(&run, checkpoint.as_deref()),
        Command::Defend { checkpoint } => commands::defend_cmd(&run, checkpoint.as_deref()),
        Command::Report { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
