//! `ssc`: state evolution, potentials, thresholds and verification runs for
//! sparse superposition codes.
//!
//! Exit status: 0 on success, 1 when a threshold solve fails to bracket or a
//! verification check fails, 2 on invalid configuration or I/O errors.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Outcome;
use config::Overrides;

#[derive(Parser)]
#[command(name = "ssc", version, about = "State evolution and threshold saturation for sparse superposition codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and write the mmse and entropy tables.
    Tables(Overrides),
    /// Run underlying or coupled state evolution and write its trace.
    Se(Overrides),
    /// Write the potential curve and the free energy gap.
    Potential(Overrides),
    /// Solve for R_u, R_pot and R_c at one (B, snr).
    Thresholds(Overrides),
    /// Run the verification suite.
    Verify(Overrides),
    /// Threshold solves over lists of B and snr.
    Sweep(Overrides),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (overrides, run): (&Overrides, fn(&config::RunConfig) -> anyhow::Result<Outcome>) = match &cli.command {
        Command::Tables(o) => (o, commands::cmd_tables),
        Command::Se(o) => (o, commands::cmd_se),
        Command::Potential(o) => (o, commands::cmd_potential),
        Command::Thresholds(o) => (o, commands::cmd_thresholds),
        Command::Verify(o) => (o, commands::cmd_verify),
        Command::Sweep(o) => (o, commands::cmd_sweep),
    };
    let result = overrides.build().and_then(|mut cfg| {
        if matches!(cli.command, Command::Thresholds(_) | Command::Sweep(_)) {
            if cfg.rate.take().is_some() {
                log::warn!("threshold solves scan R; ignoring the configured rate");
            }
        } else if cfg.rate.is_none() {
            cfg.rate = Some(cfg.rate_or_default());
            log::info!("R not set; using C/2 = {}", cfg.rate_or_default());
        }
        let cfg = cfg.resolved();
        cfg.validate()?;
        run(&cfg)
    });
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
