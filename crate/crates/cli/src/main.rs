//! `evonet`: synthesize cubes, evolve and train denoisers, denoise, score.
//!
//! Exit codes: 0 success, 1 runtime or data failure, 2 usage or config error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "evonet", version, about = "Evolutionary search for CNN hyperspectral denoisers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic hyperspectral cube in HSC1 format.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
        height: u32,
        #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
        width: u32,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
        bands: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the genetic search and write its history and best genome.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `[output] dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Maximum concurrent fitness evaluations (default: all cores).
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        jobs: Option<u32>,
    },
    /// Train a genome on the combined training and evaluation patches.
    Train {
        #[arg(long)]
        genome: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint path; the curve CSV and report JSON go next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        jobs: Option<u32>,
    },
    /// Denoise a whole cube with a trained checkpoint.
    Denoise {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        tile: usize,
        #[arg(long, default_value_t = 8)]
        overlap: usize,
    },
    /// Print MPSNR, MSSIM and MERGAS of a test cube against a clean cube.
    Metrics {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
}

/// A failure with its exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<evonet::Error> for Failure {
    fn from(e: evonet::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::Usage(e.0)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let jobs = |j: Option<u32>| j.map(|j| j as usize);
    let result = match cli.command {
        Command::Synth {
            out,
            height,
            width,
            bands,
            seed,
        } => commands::synth(&out, height as usize, width as usize, bands as usize, seed),
        Command::Evolve {
            config,
            out_dir,
            jobs: j,
        } => commands::evolve(&config, out_dir.as_deref(), jobs(j)),
        Command::Train {
            genome,
            config,
            out,
            jobs: j,
        } => commands::train(&genome, &config, &out, jobs(j)),
        Command::Denoise {
            model,
            input,
            out,
            tile,
            overlap,
        } => commands::denoise(&model, &input, &out, tile, overlap),
        Command::Metrics { clean, test } => commands::metrics(&clean, &test),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
