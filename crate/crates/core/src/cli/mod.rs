//! Reproduction harness: configuration, presets, sweeps and dataset output.

pub mod config;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

use clap::Parser;

pub use config::{parse_config, ExperimentConfig, Format, Preset, ScanVariable, Spacing};
pub use output::{Dataset, Row};
pub use run::{derived_quantities, execute, run_preset, sweep, Derived, Metadata, RunOutput};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "bundlejc", version, about = "Driven n-photon Jaynes-Cummings bundle-emission simulator")]
pub struct Args {
    /// Experiment to run.
    pub preset: Preset,
    /// TOML configuration, or a metadata.json written by an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base seed for trajectories; overrides `seeds.base_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps and trajectory ensembles.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Print the resolved configuration and derived quantities, then exit.
    #[arg(long)]
    pub dry_run: bool,
}

/// Reads a config file. A JSON metadata sidecar is accepted and its embedded
/// resolved configuration is used.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let toml = v
            .get("config_toml")
            .and_then(|t| t.as_str())
            .ok_or_else(|| Error::Config(format!("{} has no config_toml entry", path.display())))?;
        return parse_config(toml);
    }
    parse_config(&text)
}

/// Entry point behind the binary.
pub fn main_with(args: Args) -> Result<()> {
    if let Some(k) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seeds.base_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.directory = out.to_string_lossy().into_owned();
    }
    let cfg = cfg.for_preset(args.preset)?;
    if args.dry_run {
        println!("{}", cfg.to_toml()?);
        println!("{}", serde_json::to_string_pretty(&derived_quantities(&cfg)?)?);
        return Ok(());
    }
    let written = run_preset(&cfg, Path::new(&cfg.output.directory))?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}
