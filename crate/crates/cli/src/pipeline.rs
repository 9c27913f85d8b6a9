//! Pipeline stages over an output directory. Every stage reads what earlier
//! stages left behind and recomputes only what is missing from the cache.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use stimeeg::evaluation::{
    ensemble_enrollment, predictions_csv, rank_configs, roc_csv, roc_svg, run_ensemble, run_single_config, summary_csv,
    EvalOptions, EvaluationReport, NoObserver, RankedConfig,
};
use stimeeg::features::{build_feature_matrices, FeatureConfig, FeatureError, FeatureMatrix};
use stimeeg::hvresponse::slowing_report;
use stimeeg::ingest::SegmentKind;
use stimeeg::preprocess::{preprocess_recording, PreprocessedRecording};

use crate::config::RunConfig;
use crate::manifest::{hex, load, scan, Manifest, MANIFEST_FILE};

pub struct Pipeline {
    cfg: RunConfig,
    prepared: OnceLock<Vec<PreprocessedRecording>>,
}

fn ensemble_file(k: usize) -> String {
    format!("ensemble-K{k}")
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Pipeline {
        Pipeline { cfg, prepared: OnceLock::new() }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.cfg.out.join(rel)
    }

    fn write(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        std::fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
    }

    pub fn ingest(&self) -> Result<Manifest> {
        let m = scan(&self.cfg.dataset_root, self.cfg.ied_free_only)
            .with_context(|| format!("scanning {}", self.cfg.dataset_root.display()))?;
        info!("{} subjects, {} exclusions", m.subjects.len(), m.exclusions.len());
        self.write(MANIFEST_FILE, m.to_json().as_bytes())?;
        Ok(m)
    }

    /// The manifest on disk when it belongs to this dataset root, else a
    /// fresh scan.
    pub fn manifest(&self) -> Result<Manifest> {
        if let Ok(text) = std::fs::read_to_string(self.path(MANIFEST_FILE)) {
            if let Ok(m) = serde_json::from_str::<Manifest>(&text) {
                if m.dataset_root == self.cfg.dataset_root {
                    return Ok(m);
                }
            }
        }
        self.ingest()
    }

    /// Dataset hash combined with the preprocessing settings.
    fn prep_hash(&self, m: &Manifest) -> String {
        let mut h = Sha256::new();
        h.update(m.dataset_hash.as_bytes());
        h.update(serde_json::to_vec(&self.cfg.preprocess).expect("config serializes"));
        hex(&h.finalize())
    }

    fn prepared(&self, m: &Manifest) -> Result<&[PreprocessedRecording]> {
        if let Some(p) = self.prepared.get() {
            return Ok(p);
        }
        info!("preprocessing {} recordings", m.subjects.len());
        let preps: Vec<PreprocessedRecording> = m
            .subjects
            .par_iter()
            .map(|s| {
                let (ing, sha) = load(&m.dataset_root, &s.file).map_err(|e| anyhow::anyhow!("{}: {e}", s.file))?;
                if sha != s.sha256 {
                    bail!("{} changed since ingest; rerun `ingest`", s.file);
                }
                let p = preprocess_recording(&ing.recording, &self.cfg.preprocess).with_context(|| s.file.clone())?;
                if p.rejected_windows > 0 {
                    info!("{}: {:.1}% of windows rejected", s.subject_id, 100.0 * p.rejection_fraction());
                }
                Ok(p)
            })
            .collect::<Result<_>>()?;
        Ok(self.prepared.get_or_init(|| preps))
    }

    fn cache_path(&self, m: &Manifest, config: &FeatureConfig, seg: SegmentKind) -> PathBuf {
        self.path(&format!("cache/{}.stfm", FeatureMatrix::cache_key(&self.prep_hash(m), config, seg)))
    }

    fn configs(&self) -> Vec<FeatureConfig> {
        let c = &self.cfg;
        let mut out = Vec::new();
        for &f in &c.families {
            for &mo in &c.montages {
                for &w in &c.windows {
                    for &cb in &c.combiners {
                        out.push(FeatureConfig::new(f, mo, w, cb));
                    }
                }
            }
        }
        out
    }

    /// Fill the feature cache for the whole grid and write one CSV per matrix.
    pub fn features(&self, m: &Manifest) -> Result<()> {
        let c = &self.cfg;
        for &seg in &c.segments {
            for &family in &c.families {
                for &montage in &c.montages {
                    for &w in &c.windows {
                        let cells: Vec<FeatureConfig> =
                            c.combiners.iter().map(|&cb| FeatureConfig::new(family, montage, w, cb)).collect();
                        let missing = cells.iter().any(|cfg| !self.cache_path(m, cfg, seg).exists());
                        if missing {
                            let preps = self.prepared(m)?;
                            match build_feature_matrices(preps, family, montage, w, seg, &c.combiners) {
                                Ok(mats) => {
                                    for mat in mats {
                                        mat.write_cache(&self.cache_path_create(m, &mat.config, seg)?)?;
                                    }
                                }
                                Err(FeatureError::NoSubjects(what)) => {
                                    warn!("no subject yields {what}, skipped");
                                    continue;
                                }
                                Err(e) => return Err(e.into()),
                            }
                        }
                        for cfg in &cells {
                            let csv = format!("features/{}/{}.csv", seg.name(), cfg.id());
                            if !self.path(&csv).exists() {
                                let mat = FeatureMatrix::read_cache(&self.cache_path(m, cfg, seg))?;
                                self.write(&csv, mat.to_csv().as_bytes())?;
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn cache_path_create(&self, m: &Manifest, config: &FeatureConfig, seg: SegmentKind) -> Result<PathBuf> {
        let p = self.cache_path(m, config, seg);
        std::fs::create_dir_all(p.parent().expect("cache dir"))?;
        Ok(p)
    }

    fn matrix(&self, m: &Manifest, config: &FeatureConfig, seg: SegmentKind) -> Result<Option<FeatureMatrix>> {
        let p = self.cache_path(m, config, seg);
        if !p.exists() {
            return Ok(None);
        }
        Ok(Some(FeatureMatrix::read_cache(&p)?))
    }

    fn eval_options(&self) -> EvalOptions {
        EvalOptions { seeds: self.cfg.seeds.clone(), alpha: self.cfg.alpha, ..EvalOptions::default() }
    }

    fn cached_report(
        &self,
        m: &Manifest,
        seg: SegmentKind,
        configs: &[FeatureConfig],
        compute: impl FnOnce() -> Result<EvaluationReport>,
    ) -> Result<EvaluationReport> {
        let mut h = Sha256::new();
        h.update(self.prep_hash(m).as_bytes());
        h.update(seg.name().as_bytes());
        for c in configs {
            h.update(b"\0");
            h.update(c.id().as_bytes());
        }
        h.update(serde_json::to_vec(&self.eval_options()).expect("options serialize"));
        let rel = format!("cache/report-{}.json", hex(&h.finalize()));
        if let Ok(text) = std::fs::read_to_string(self.path(&rel)) {
            if let Ok(r) = EvaluationReport::from_json(&text) {
                return Ok(r);
            }
        }
        let r = compute()?;
        self.write(&rel, r.to_json().as_bytes())?;
        Ok(r)
    }

    /// Stage 1: every grid cell evaluated on its own, then the best cell of
    /// each family ranked by mean AUC.
    pub fn rank(&self, m: &Manifest) -> Result<Vec<(SegmentKind, Vec<RankedConfig>)>> {
        self.features(m)?;
        let opts = self.eval_options();
        let mut out = Vec::new();
        for &seg in &self.cfg.segments {
            let mut reports = Vec::new();
            for cfg in self.configs() {
                let Some(mat) = self.matrix(m, &cfg, seg)? else { continue };
                let r = self.cached_report(m, seg, &[cfg], || Ok(run_single_config(&mat, &opts, &NoObserver)?))?;
                info!("{} {}: AUC {:.3}", seg.name(), cfg.id(), r.summary.auc.mean);
                self.write(&format!("reports/{}/single/{}.json", seg.name(), cfg.id()), r.to_json().as_bytes())?;
                reports.push(r);
            }
            if reports.is_empty() {
                warn!("{}: nothing to rank", seg.name());
                continue;
            }
            let ranked = rank_configs(&reports);
            self.write(
                &format!("reports/{}/ranking.json", seg.name()),
                serde_json::to_string_pretty(&ranked)?.as_bytes(),
            )?;
            out.push((seg, ranked));
        }
        Ok(out)
    }

    fn ranking(&self, m: &Manifest) -> Result<Vec<(SegmentKind, Vec<RankedConfig>)>> {
        let mut out = Vec::new();
        for &seg in &self.cfg.segments {
            match std::fs::read_to_string(self.path(&format!("reports/{}/ranking.json", seg.name()))) {
                Ok(text) => out.push((seg, serde_json::from_str(&text)?)),
                Err(_) => return self.rank(m),
            }
        }
        Ok(out)
    }

    /// Stacked ensembles of the top-ranked families, one per configured size.
    pub fn ensemble(&self, m: &Manifest) -> Result<()> {
        let opts = self.eval_options();
        for (seg, ranked) in self.ranking(m)? {
            for configs in ensemble_enrollment(&ranked, &self.cfg.ensemble_sizes) {
                let mats: Vec<FeatureMatrix> = configs
                    .iter()
                    .map(|c| self.matrix(m, c, seg)?.with_context(|| format!("missing features for {c}")))
                    .collect::<Result<_>>()?;
                let r = self.cached_report(m, seg, &configs, || Ok(run_ensemble(&mats, &opts, &NoObserver)?))?;
                info!("{} {}: AUC {:.3}", seg.name(), r.name, r.summary.auc.mean);
                self.write(
                    &format!("reports/{}/ensemble/{}.json", seg.name(), ensemble_file(configs.len())),
                    r.to_json().as_bytes(),
                )?;
            }
        }
        Ok(())
    }

    /// Slowing index over every recording with an HV segment.
    pub fn hv(&self, m: &Manifest) -> Result<()> {
        let preps = self.prepared(m)?;
        let recs: Vec<_> = preps.iter().map(|p| p.recording.clone()).collect();
        if !recs.iter().any(|r| r.segment(SegmentKind::Hv).is_some()) {
            warn!("no HV segments, slowing report skipped");
            return Ok(());
        }
        let report = slowing_report(&recs)?;
        info!("HV: {} responders, {} non-responders", report.responders().len(), report.non_responders().len());
        self.write("reports/hv/slowing.csv", report.to_csv().as_bytes())?;
        self.write("reports/hv/slowing.json", serde_json::to_string_pretty(&report)?.as_bytes())?;
        Ok(())
    }

    fn read_reports(&self, dir: &Path) -> Result<Vec<(String, EvaluationReport)>> {
        let mut files: Vec<PathBuf> = match std::fs::read_dir(dir) {
            Ok(rd) => rd.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.extension().is_some_and(|x| x == "json")).collect(),
            Err(_) => return Ok(Vec::new()),
        };
        files.sort();
        files
            .into_iter()
            .map(|p| {
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                let text = std::fs::read_to_string(&p)?;
                Ok((stem, EvaluationReport::from_json(&text).with_context(|| p.display().to_string())?))
            })
            .collect()
    }

    /// Summary table, per-report prediction and ROC tables, and ROC figures
    /// for the best single configuration and every ensemble.
    pub fn report(&self) -> Result<()> {
        let mut all = Vec::new();
        for seg in SegmentKind::ALL {
            let base = self.path(&format!("reports/{}", seg.name()));
            let singles = self.read_reports(&base.join("single"))?;
            let ensembles = self.read_reports(&base.join("ensemble"))?;
            for (kind, list) in [("single", &singles), ("ensemble", &ensembles)] {
                for (stem, r) in list {
                    let prefix = format!("reports/{}/{kind}/{stem}", seg.name());
                    self.write(&format!("{prefix}.predictions.csv"), predictions_csv(r).as_bytes())?;
                    self.write(&format!("{prefix}.roc.csv"), roc_csv(r).as_bytes())?;
                }
            }
            let best = singles.iter().max_by(|a, b| a.1.summary.auc.mean.total_cmp(&b.1.summary.auc.mean).then(b.0.cmp(&a.0)));
            if let Some((_, r)) = best {
                self.write(&format!("roc/{}-best-single.svg", seg.name()), roc_svg(r).as_bytes())?;
            }
            for (stem, r) in &ensembles {
                self.write(&format!("roc/{}-{stem}.svg", seg.name()), roc_svg(r).as_bytes())?;
            }
            all.extend(singles.into_iter().chain(ensembles).map(|(_, r)| r));
        }
        if all.is_empty() {
            warn!("no evaluation reports under {}", self.cfg.out.display());
        }
        self.write("reports/summary.csv", summary_csv(&all).as_bytes())
    }

    pub fn run(&self) -> Result<()> {
        let m = self.ingest()?;
        if m.subjects.is_empty() {
            warn!("empty dataset, nothing to run");
            return Ok(());
        }
        self.rank(&m)?;
        self.ensemble(&m)?;
        self.hv(&m)?;
        self.report()
    }
}
