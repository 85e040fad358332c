//! `rops3d`: experiment front end for the rops3d toolkit.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "rops3d", version, about = "Local reference frames, RoPS descriptors and 3D object recognition experiments")]
struct Cli {
    /// Flat JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (also ROPS3D_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a ROPSLIB1 model library from the models.
    BuildLibrary {
        /// Also write a JSON dump next to the library.
        #[arg(long)]
        json: bool,
    },
    /// Dump descriptors at spread seed points of each model (CSV + JSON sidecar).
    Describe,
    /// LRF error histogram between each model and its decimated, noisy copy.
    LrfError,
    /// Recall vs 1-precision curves per noise level or per given scene.
    RpCurve,
    /// Compose synthetic scenes with ground-truth poses.
    SynthScene,
    /// Recognize library models in scenes.
    Recognize,
    /// Sweep statistics combination, bins, rotations and radius.
    SweepParams,
    /// Print the effective configuration as JSON.
    ShowConfig,
}

fn init_threads(cli: Option<usize>) -> Result<()> {
    let n = match cli {
        Some(n) => Some(n),
        None => match std::env::var("ROPS3D_THREADS") {
            Ok(v) => Some(v.trim().parse::<usize>().with_context(|| format!("ROPS3D_THREADS={v} is not a count"))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n.filter(|&n| n > 0) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&cli.overrides);
    cfg.validate()?;
    match cli.command {
        Command::BuildLibrary { json } => commands::build_library(&cfg, json),
        Command::Describe => commands::describe(&cfg),
        Command::LrfError => commands::lrf_error_cmd(&cfg),
        Command::RpCurve => commands::rp_curve_cmd(&cfg),
        Command::SynthScene => commands::synth_scene(&cfg),
        Command::Recognize => commands::recognize_cmd(&cfg),
        Command::SweepParams => commands::sweep_params(&cfg),
        Command::ShowConfig => {
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
