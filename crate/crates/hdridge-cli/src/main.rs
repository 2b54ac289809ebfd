//! Configuration-driven front end: `simulate`, `theory`, `sweep`, and
//! `blpc` subcommands, all reading a TOML config and writing CSV/JSON
//! outputs plus run metadata.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use commands::{cmd_blpc, cmd_simulate, cmd_sweep, cmd_theory, RunContext};
use config::{parse_config, OutputFormat};

#[derive(Parser)]
#[command(
    name = "hdridge",
    about = "Block-diagonal high-dimensional ridge prediction simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: CommandLine,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the TOML configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: config's [output].dir, else "out").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker count hint; HDRIDGE_THREADS is the fallback.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum CommandLine {
    /// Run one scenario and write results + summary.
    Simulate(CommonArgs),
    /// Evaluate theory curves over a grid.
    Theory(CommonArgs),
    /// Run a scenario across a grid axis.
    Sweep(CommonArgs),
    /// Per-block principal-component demo over tau and penalty grids.
    Blpc(CommonArgs),
}

fn env_threads() -> Option<usize> {
    std::env::var("HDRIDGE_THREADS").ok().and_then(|v| v.parse().ok())
}

fn build_context(args: &CommonArgs) -> anyhow::Result<(config::RunConfig, RunContext)> {
    let cfg = parse_config(&args.config)?;
    let output = cfg.output.clone();
    let out_dir = args
        .out
        .clone()
        .or_else(|| output.as_ref().and_then(|o| o.dir.clone().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let format = output.as_ref().and_then(|o| o.format).unwrap_or(OutputFormat::Csv);
    let threads = args
        .threads
        .or_else(|| output.as_ref().and_then(|o| o.threads))
        .or_else(env_threads);
    let config_dir = args
        .config
        .parent()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((
        cfg,
        RunContext { out_dir, format, threads, seed_override: args.seed, config_dir },
    ))
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        CommandLine::Simulate(args) => {
            let (cfg, ctx) = build_context(args)?;
            cmd_simulate(&cfg, &ctx)
        }
        CommandLine::Theory(args) => {
            let (cfg, ctx) = build_context(args)?;
            cmd_theory(&cfg, &ctx)
        }
        CommandLine::Sweep(args) => {
            let (cfg, ctx) = build_context(args)?;
            cmd_sweep(&cfg, &ctx)
        }
        CommandLine::Blpc(args) => {
            let (cfg, ctx) = build_context(args)?;
            cmd_blpc(&cfg, &ctx)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
