//! `spbp`: run denoising and tracking experiments, sweep MH proposal scales
//! and compute chain autocorrelations. Outputs are CSV and PGM files.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::RunContext;
use config::DenoiseSection;

/// Default output root when neither `--out` nor the config's `out` is set.
const OUT_ROOT_VAR: &str = "SPBP_OUT";

#[derive(Debug, Parser)]
#[command(name = "spbp", version, about = "Particle belief propagation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for per-node updates (outputs do not depend on it).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; defaults to `$SPBP_OUT/<command>` or `spbp-out/<command>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Denoise noisy instances of a test image with each configured sampler.
    Denoise {
        #[command(flatten)]
        common: Common,
        /// `slice`, `mh` or `mh:<sigma>`.
        #[arg(long)]
        sampler: Option<String>,
        /// 10 instances at N = 100, M = 500, p = 5 with annealing 1 to 1e-4, both samplers.
        #[arg(long)]
        full_preset: bool,
    },
    /// Track the synthetic mesh for every (sampler, M) cell.
    Track {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sampler: Option<String>,
    },
    /// Sweep MH proposal scales on the denoising or tracking experiment.
    MhSweep {
        #[command(flatten)]
        common: Common,
    },
    /// Autocorrelation of recorded chains.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Trace CSVs; added to those listed in the config.
        traces: Vec<PathBuf>,
    },
}

fn context(common: &Common, cfg: &config::RunConfig, name: &str) -> RunContext {
    let out = common.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| {
        let root = std::env::var_os(OUT_ROOT_VAR).map_or_else(|| PathBuf::from("spbp-out"), PathBuf::from);
        root.join(name)
    });
    RunContext {
        seed: common.seed.unwrap_or(cfg.seed),
        workers: common.workers.or(cfg.workers).unwrap_or(1).max(1),
        out,
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Denoise { common, sampler, full_preset } => {
            let cfg = config::load(common.config.as_deref())?;
            let ctx = context(&common, &cfg, "denoise");
            let section = if full_preset { DenoiseSection::full_preset() } else { cfg.denoise };
            let samplers = commands::select_samplers(&section.samplers, sampler.as_deref())?;
            commands::cmd_denoise(&section, &samplers, &ctx)?;
        }
        Command::Track { common, sampler } => {
            let cfg = config::load(common.config.as_deref())?;
            let ctx = context(&common, &cfg, "track");
            let samplers = commands::select_samplers(&cfg.track.samplers, sampler.as_deref())?;
            commands::cmd_track(&cfg.track, &samplers, &ctx)?;
        }
        Command::MhSweep { common } => {
            let cfg = config::load(common.config.as_deref())?;
            let ctx = context(&common, &cfg, "mh-sweep");
            commands::cmd_mh_sweep(&cfg.mh_sweep, &cfg.denoise, &cfg.track, &ctx)?;
        }
        Command::Diagnose { common, traces } => {
            let cfg = config::load(common.config.as_deref())?;
            let ctx = context(&common, &cfg, "diagnose");
            let mut files = cfg.diagnose.traces.clone();
            files.extend(traces);
            return commands::cmd_diagnose(&files, cfg.diagnose.max_lag, &ctx);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("spbp: some chains were too short for autocorrelation");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("spbp: {e:#}");
            ExitCode::FAILURE
        }
    }
}
