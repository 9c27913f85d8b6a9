mod config;
mod manifest;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::error;
use stimeeg::synth::{gen_cohort, write_cohort, SynthSpec};

use config::{ConfigError, RunArgs, RunConfig};
use pipeline::Pipeline;

#[derive(Parser)]
#[command(name = "stimeeg", version, about = "EEG stimulation-response classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled cohort as EDF files with sidecars
    Synth(SynthArgs),
    /// Scan the dataset root and write manifest.json
    Ingest(RunArgs),
    /// Extract the feature grid into the cache and features/*.csv
    Features(RunArgs),
    /// Evaluate every grid cell and rank the families
    Rank(RunArgs),
    /// Evaluate stacked ensembles of the top-ranked families
    Ensemble(RunArgs),
    /// Hyperventilation slowing report
    Hv(RunArgs),
    /// Summary tables and ROC figures from existing reports
    Report(RunArgs),
    /// Every stage in order
    Run(RunArgs),
}

#[derive(clap::Args)]
struct SynthArgs {
    /// output directory for the EDF and sidecar files
    #[arg(long)]
    out: PathBuf,
    /// TOML generator settings; flags below override it
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    n_per_class: Option<usize>,
    #[arg(long)]
    photic_driving_gain: Option<f64>,
    #[arg(long)]
    hv_slowing_gain: Option<f64>,
    #[arg(long)]
    plv_coupling_gain: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| p.display().to_string())?;
            toml::from_str(&text).map_err(|e| ConfigError(format!("invalid synth spec {}: {}", p.display(), e.message())))?
        }
        None => SynthSpec::default(),
    };
    spec.n_per_class = a.n_per_class.unwrap_or(spec.n_per_class);
    spec.photic_driving_gain = a.photic_driving_gain.unwrap_or(spec.photic_driving_gain);
    spec.hv_slowing_gain = a.hv_slowing_gain.unwrap_or(spec.hv_slowing_gain);
    spec.plv_coupling_gain = a.plv_coupling_gain.unwrap_or(spec.plv_coupling_gain);
    spec.seed = a.seed.unwrap_or(spec.seed);
    spec.validate().map_err(|e| ConfigError(e.to_string()))?;
    let cohort = gen_cohort(&spec)?;
    let files = write_cohort(&cohort, &a.out)?;
    log::info!("wrote {} recordings to {}", files.len(), a.out.display());
    Ok(())
}

fn with_pipeline(args: &RunArgs, f: impl FnOnce(&Pipeline) -> Result<()>) -> Result<()> {
    let cfg = RunConfig::resolve(args)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global().context("thread pool")?;
    }
    f(&Pipeline::new(cfg))
}

fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Ingest(a) => with_pipeline(a, |p| p.ingest().map(|_| ())),
        Command::Features(a) => with_pipeline(a, |p| p.features(&p.manifest()?)),
        Command::Rank(a) => with_pipeline(a, |p| p.rank(&p.manifest()?).map(|_| ())),
        Command::Ensemble(a) => with_pipeline(a, |p| p.ensemble(&p.manifest()?)),
        Command::Hv(a) => with_pipeline(a, |p| p.hv(&p.manifest()?)),
        Command::Report(a) => with_pipeline(a, |p| p.report()),
        Command::Run(a) => with_pipeline(a, |p| p.run()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<ConfigError>() => {
            error!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
