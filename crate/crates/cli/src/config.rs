//! Run configuration: TOML file with sections, every key overridable by a
//! flag. Precedence is flag > file > profile default.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use stimeeg::features::{Combiner, Family};
use stimeeg::ingest::SegmentKind;
use stimeeg::preprocess::{MontageKind, PreprocessConfig, WINDOW_LENGTHS_S};
use stimeeg::stacking::DEFAULT_ALPHA;

/// Bad or unknown configuration; the binary exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 60 Hz notch, 250 Hz analysis rate
    Tuh,
    /// 50 Hz notch, 200 Hz analysis rate
    Emc,
}

impl Profile {
    pub fn preprocess(self) -> PreprocessConfig {
        match self {
            Profile::Tuh => PreprocessConfig::tuh(),
            Profile::Emc => PreprocessConfig::emc(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetSection {
    root: Option<PathBuf>,
    profile: Option<Profile>,
    ied_free_only: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreprocessSection {
    notch_hz: Option<f64>,
    target_fs: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    segments: Option<Vec<String>>,
    families: Option<Vec<String>>,
    montages: Option<Vec<String>>,
    windows: Option<Vec<u32>>,
    combiners: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluationSection {
    seeds: Option<Vec<u64>>,
    ensemble_sizes: Option<Vec<usize>>,
    alpha: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    out: Option<PathBuf>,
    threads: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    dataset: DatasetSection,
    #[serde(default)]
    preprocess: PreprocessSection,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    evaluation: EvaluationSection,
    #[serde(default)]
    output: OutputSection,
}

/// Flags shared by the pipeline subcommands. List flags take
/// comma-separated values.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset_root: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    #[arg(long)]
    pub notch_hz: Option<f64>,
    #[arg(long)]
    pub target_fs: Option<f64>,
    /// resting, ips, hv
    #[arg(long, value_delimiter = ',')]
    pub segments: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub montages: Option<Vec<String>>,
    /// window lengths in seconds
    #[arg(long, value_delimiter = ',')]
    pub windows: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub combiners: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub ensemble_sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// stacking barrier coefficient
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub ied_free_only: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// worker threads, 0 for one per core
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dataset_root: PathBuf,
    pub profile: Profile,
    pub preprocess: PreprocessConfig,
    pub segments: Vec<SegmentKind>,
    pub families: Vec<Family>,
    pub montages: Vec<MontageKind>,
    pub windows: Vec<u32>,
    pub combiners: Vec<Combiner>,
    pub ensemble_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub alpha: f64,
    pub ied_free_only: bool,
    pub out: PathBuf,
    pub threads: usize,
}

fn parse_list<T>(what: &str, items: &[String], parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, ConfigError> {
    let out: Vec<T> = items
        .iter()
        .map(|s| parse(s.trim()).ok_or_else(|| ConfigError(format!("unknown {what} `{s}`"))))
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(ConfigError(format!("empty {what} list")));
    }
    Ok(out)
}

fn read_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| ConfigError(format!("invalid config {}: {}", path.display(), e.message())))
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> Result<RunConfig, ConfigError> {
        let file = match &args.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let profile = args.profile.or(file.dataset.profile).unwrap_or(Profile::Emc);
        let mut preprocess = profile.preprocess();
        if let Some(v) = args.notch_hz.or(file.preprocess.notch_hz) {
            preprocess.notch_hz = v;
        }
        if let Some(v) = args.target_fs.or(file.preprocess.target_fs) {
            preprocess.target_fs = v;
        }
        let pick = |flag: &Option<Vec<String>>, file: &Option<Vec<String>>| flag.clone().or_else(|| file.clone());
        let segments = match pick(&args.segments, &file.grid.segments) {
            Some(v) => parse_list("segment", &v, SegmentKind::parse)?,
            None => SegmentKind::ALL.to_vec(),
        };
        let families = match pick(&args.families, &file.grid.families) {
            Some(v) => parse_list("family", &v, Family::parse)?,
            None => Family::ALL.to_vec(),
        };
        let montages = match pick(&args.montages, &file.grid.montages) {
            Some(v) => parse_list("montage", &v, MontageKind::parse)?,
            None => MontageKind::ALL.to_vec(),
        };
        let combiners = match pick(&args.combiners, &file.grid.combiners) {
            Some(v) => parse_list("combiner", &v, Combiner::parse)?,
            None => Combiner::ALL.to_vec(),
        };
        let windows = args.windows.clone().or(file.grid.windows).unwrap_or_else(|| WINDOW_LENGTHS_S.to_vec());
        if windows.is_empty() || windows.contains(&0) {
            return Err(ConfigError("windows must be a non-empty list of positive seconds".into()));
        }
        let ensemble_sizes = args.ensemble_sizes.clone().or(file.evaluation.ensemble_sizes).unwrap_or_else(|| (2..=10).collect());
        let seeds = args.seeds.clone().or(file.evaluation.seeds).unwrap_or_else(|| (0..5).collect());
        if seeds.is_empty() {
            return Err(ConfigError("seeds must not be empty".into()));
        }
        let alpha = args.alpha.or(file.evaluation.alpha).unwrap_or(DEFAULT_ALPHA);
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ConfigError(format!("alpha must be positive, got {alpha}")));
        }
        let dataset_root = args
            .dataset_root
            .clone()
            .or(file.dataset.root)
            .ok_or_else(|| ConfigError("dataset root not set (--dataset-root or [dataset] root)".into()))?;
        Ok(RunConfig {
            dataset_root,
            profile,
            preprocess,
            segments,
            families,
            montages,
            windows,
            combiners,
            ensemble_sizes,
            seeds,
            alpha,
            ied_free_only: args.ied_free_only.or(file.dataset.ied_free_only).unwrap_or(false),
            out: args.out.clone().or(file.output.out).unwrap_or_else(|| PathBuf::from("out")),
            threads: args.threads.or(file.output.threads).unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, text).unwrap();
        (dir, p)
    }

    #[test]
    fn flag_beats_file_beats_profile() {
        let (_d, p) = write("[dataset]\nroot = \"data\"\nprofile = \"tuh\"\n[preprocess]\ntarget_fs = 220.0\n");
        let args = RunArgs { config: Some(p.clone()), ..RunArgs::default() };
        let c = RunConfig::resolve(&args).unwrap();
        assert_eq!(c.preprocess.notch_hz, 60.0);
        assert_eq!(c.preprocess.target_fs, 220.0);
        let args = RunArgs { config: Some(p), target_fs: Some(200.0), profile: Some(Profile::Emc), ..RunArgs::default() };
        let c = RunConfig::resolve(&args).unwrap();
        assert_eq!((c.preprocess.notch_hz, c.preprocess.target_fs), (50.0, 200.0));
    }

    #[test]
    fn unknown_key_is_named() {
        let (_d, p) = write("[grid]\nfamilies = [\"Spectral\"]\nwindow = [10]\n");
        let e = RunConfig::resolve(&RunArgs { config: Some(p), ..RunArgs::default() }).unwrap_err();
        assert!(e.0.contains("window"), "{e}");
    }

    #[test]
    fn grid_names_are_parsed() {
        let args = RunArgs {
            dataset_root: Some("d".into()),
            families: Some(vec!["spectral".into(), "PLV".into()]),
            segments: Some(vec!["ips".into()]),
            ..RunArgs::default()
        };
        let c = RunConfig::resolve(&args).unwrap();
        assert_eq!(c.families, vec![Family::Spectral, Family::Plv]);
        assert_eq!(c.segments, vec![SegmentKind::Ips]);
        let bad = RunArgs { families: Some(vec!["Nope".into()]), ..args };
        assert!(RunConfig::resolve(&bad).unwrap_err().0.contains("Nope"));
    }
}
