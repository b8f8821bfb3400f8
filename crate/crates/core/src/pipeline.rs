//! End-to-end runs driven by a single TOML configuration.
//!
//! Stages run in order — procure (optional), normalize, taxonomy-map
//! (optional), match, unify, coverage — each writing its artifact into the
//! output directory. After every stage a manifest records, per stage, the
//! SHA-256 of each input and output file, the seed and the duration. A
//! failing stage halts the run; artifacts of completed stages stay on disk.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evaluation::coverage_report;
use crate::matcher::{
    default_grid, match_all, Algorithm, Decider, DecidedPair, FeatureBackend, PairFeaturizer, TrainConfig, WsaParams,
    DEFAULT_DECISION_THRESHOLD, DEFAULT_K,
};
use crate::model::{validate_dataset, SourceRanking, StandardPoi};
use crate::normalization::{standardize_all, AddressVocabulary, SourceProfile};
use crate::persistence::{self, DatasetFormat, Loaded};
use crate::procurement::{
    dedupe_by_id, fetch_grid, plan_initial_grid, PagedSourceConfig, RawRecord, StudyArea, DEFAULT_MIN_DIM_M,
};
use crate::similarity::DEFAULT_RADIUS_M;
use crate::taxonomy::{map_poi, EmbeddingStore, TargetTaxonomy, DEFAULT_THRESHOLD};
use crate::unification::{match_pairs, unify_dataset};

pub const DEFAULT_SEED: u64 = 42;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const STAGE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: String, message: String },
}

impl PipelineError {
    fn stage(stage: &str, e: impl std::fmt::Display) -> Self {
        PipelineError::Stage { stage: stage.to_string(), message: e.to_string() }
    }

    /// 2 for configuration problems, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { .. } => 1,
        }
    }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_tile_m() -> f64 {
    250.0
}
fn default_min_dim() -> f64 {
    DEFAULT_MIN_DIM_M
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_radius() -> f64 {
    DEFAULT_RADIUS_M
}
fn default_k() -> usize {
    DEFAULT_K
}
fn default_folds() -> usize {
    5
}
fn default_true() -> bool {
    true
}
fn default_decision() -> f64 {
    DEFAULT_DECISION_THRESHOLD
}
fn default_algorithm() -> Algorithm {
    Algorithm::GradientBoosting
}
fn default_backend() -> FeatureBackend {
    FeatureBackend::Hybrid
}
fn default_ranking() -> Vec<String> {
    SourceRanking::default_singapore().sources().to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub procure: Option<ProcureConfig>,
    #[serde(default)]
    pub normalize: NormalizeConfig,
    #[serde(default)]
    pub taxonomy: Option<TaxonomyConfig>,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    #[serde(default)]
    pub unify: UnifyConfig,
    #[serde(default)]
    pub coverage: CoverageConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcureConfig {
    /// GeoJSON polygon / multipolygon of the study area.
    #[serde(default)]
    pub area: Option<PathBuf>,
    /// `[south, west, north, east]`, used when `area` is absent.
    #[serde(default)]
    pub bbox: Option<[f64; 4]>,
    #[serde(default = "default_tile_m")]
    pub tile_width_m: f64,
    #[serde(default = "default_tile_m")]
    pub tile_height_m: f64,
    #[serde(default = "default_min_dim")]
    pub min_dim_m: f64,
    pub sources: Vec<ProcuredSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcuredSource {
    #[serde(flatten)]
    pub source: PagedSourceConfig,
    /// Source profile for standardisation; the GeoJSON layout by default.
    #[serde(default)]
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizeConfig {
    /// Fallback for records without a date; today when absent.
    #[serde(default)]
    pub extraction_date: Option<NaiveDate>,
    #[serde(default)]
    pub vocabulary: Option<PathBuf>,
    /// Raw dumps to standardise.
    #[serde(default)]
    pub inputs: Vec<RawInput>,
    /// Datasets already in the standard schema (GeoJSON or NDJSON).
    #[serde(default)]
    pub standardized: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInput {
    pub source_id: String,
    pub path: PathBuf,
    #[serde(default)]
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyConfig {
    pub embeddings: PathBuf,
    #[serde(default)]
    pub subwords: Option<PathBuf>,
    pub targets: PathBuf,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    #[serde(default = "default_backend")]
    pub backend: FeatureBackend,
    pub alpha: f64,
    pub beta: f64,
    pub v_threshold: f64,
}

/// Exactly one of `model` (a trained model file), `labels` (train one from
/// labelled pairs over the run's own POIs) or `baseline` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchConfig {
    #[serde(default = "default_radius")]
    pub radius_m: f64,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub baseline: Option<BaselineConfig>,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default = "default_backend")]
    pub backend: FeatureBackend,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_true")]
    pub rebalance: bool,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_decision")]
    pub decision_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnifyConfig {
    #[serde(default = "default_ranking")]
    pub ranking: Vec<String>,
}

impl Default for UnifyConfig {
    fn default() -> Self {
        Self { ranking: default_ranking() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self { enabled: true }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output_dir);
        if let Some(p) = &mut self.procure {
            p.area.iter_mut().for_each(|a| resolve(base, a));
            for s in &mut p.sources {
                s.source.file.iter_mut().for_each(|f| resolve(base, f));
                s.profile.iter_mut().for_each(|f| resolve(base, f));
            }
        }
        let n = &mut self.normalize;
        n.vocabulary.iter_mut().for_each(|v| resolve(base, v));
        for i in &mut n.inputs {
            resolve(base, &mut i.path);
            i.profile.iter_mut().for_each(|f| resolve(base, f));
        }
        n.standardized.iter_mut().for_each(|s| resolve(base, s));
        if let Some(t) = &mut self.taxonomy {
            resolve(base, &mut t.embeddings);
            resolve(base, &mut t.targets);
            t.subwords.iter_mut().for_each(|s| resolve(base, s));
        }
        let m = &mut self.matching;
        m.model.iter_mut().for_each(|p| resolve(base, p));
        m.labels.iter_mut().for_each(|p| resolve(base, p));
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        let m = &self.matching;
        let deciders = [m.model.is_some(), m.labels.is_some(), m.baseline.is_some()].iter().filter(|&&x| x).count();
        if deciders != 1 {
            return bad("[match] needs exactly one of `model`, `labels` or `baseline`".into());
        }
        if m.radius_m.is_nan() || m.radius_m <= 0.0 {
            return bad(format!("[match] radius_m must be positive, got {}", m.radius_m));
        }
        if !(0.0..=1.0).contains(&m.decision_threshold) {
            return bad(format!("[match] decision_threshold {} outside [0, 1]", m.decision_threshold));
        }
        if m.k == 0 || m.folds < 2 {
            return bad("[match] k must be at least 1 and folds at least 2".into());
        }
        if let Some(b) = &m.baseline {
            WsaParams::new(b.alpha, b.beta, b.v_threshold).map_err(|e| PipelineError::Config(format!("[match.baseline] {e}")))?;
        }
        if let Some(t) = &self.taxonomy {
            if !(t.threshold > 0.0 && t.threshold <= 1.0) {
                return bad(format!("[taxonomy] threshold {} outside (0, 1]", t.threshold));
            }
        }
        if let Some(p) = &self.procure {
            if p.area.is_none() && p.bbox.is_none() {
                return bad("[procure] needs `area` or `bbox`".into());
            }
            if !(p.tile_width_m > 0.0 && p.tile_height_m > 0.0 && p.min_dim_m > 0.0) {
                return bad("[procure] tile sizes and min_dim_m must be positive".into());
            }
            for s in &p.sources {
                s.source.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
            }
        }
        if self.procure.is_none() && self.normalize.inputs.is_empty() && self.normalize.standardized.is_empty() {
            return bad("no inputs: configure [procure] sources or [normalize] inputs / standardized".into());
        }
        SourceRanking::new(self.unify.ranking.iter()).map_err(|e| PipelineError::Config(format!("[unify] {e}")))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Execution order, starting at 0.
    pub position: usize,
    pub version: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub seed: u64,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub manifest: Manifest,
    pub poi_count: usize,
    pub match_count: usize,
    pub unified_count: usize,
    pub flagged_count: usize,
    pub truncation_warnings: usize,
    pub record_issues: usize,
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    manifest: Manifest,
}

impl Run<'_> {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    /// Runs one stage and records it. Outputs are file names inside the
    /// output directory; inputs are paths.
    fn stage<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&Self) -> Result<(T, Vec<PathBuf>, Vec<String>), PipelineError>,
    ) -> Result<T, PipelineError> {
        log::info!("stage {name}: start");
        let started = Instant::now();
        let result = f(self);
        let (value, inputs, outputs) = match result {
            Ok(v) => v,
            Err(e) => {
                self.write_manifest()?;
                return Err(e);
            }
        };
        let hash = |p: &Path| sha256_file(p).map_err(|e| PipelineError::stage(name, format!("{}: {e}", p.display())));
        let mut record = StageRecord {
            position: self.manifest.stages.len(),
            version: STAGE_VERSION.to_string(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            seed: self.cfg.seed,
            duration_ms: started.elapsed().as_millis() as u64,
        };
        for p in inputs {
            record.inputs.insert(p.display().to_string(), hash(&p)?);
        }
        for o in outputs {
            let h = hash(&self.out(&o))?;
            record.outputs.insert(o, h);
        }
        log::info!("stage {name}: done in {} ms", record.duration_ms);
        self.manifest.stages.insert(name.to_string(), record);
        self.write_manifest()?;
        Ok(value)
    }

    fn write_manifest(&self) -> Result<(), PipelineError> {
        persistence::save_json(&self.manifest, &self.out(MANIFEST_FILE)).map_err(|e| PipelineError::stage("manifest", e))
    }
}

fn file_name(prefix: &str, source: &str, ext: &str) -> String {
    let safe: String = source.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    format!("{prefix}-{safe}.{ext}")
}

fn load_profile(path: Option<&Path>, source_id: &str) -> Result<SourceProfile, String> {
    match path {
        Some(p) => {
            let profile = SourceProfile::load(p).map_err(|e| e.to_string())?;
            if profile.source_id != source_id {
                return Err(format!("{}: profile is for `{}`, not `{source_id}`", p.display(), profile.source_id));
            }
            Ok(profile)
        }
        None => Ok(SourceProfile::geojson_default(source_id)),
    }
}

fn study_area(p: &ProcureConfig) -> Result<StudyArea, String> {
    match (&p.area, p.bbox) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            StudyArea::from_geojson(&doc).map_err(|e| e.to_string())
        }
        (None, Some([s, w, n, e])) => StudyArea::rectangle(s, w, n, e).map_err(|e| e.to_string()),
        (None, None) => Err("no study area".into()),
    }
}

/// Executes every configured stage in order.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport, PipelineError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", cfg.output_dir.display())))?;
    let mut run = Run { cfg, manifest: Manifest { seed: cfg.seed, stages: BTreeMap::new() } };
    let mut truncation_warnings = 0;
    let mut record_issues = 0;

    // Raw inputs for normalisation: (source, records, profile path, input path).
    let mut raw_sets: Vec<(String, Vec<RawRecord>, Option<PathBuf>, PathBuf)> = Vec::new();
    if let Some(p) = &cfg.procure {
        let procured = run.stage("procure", |r| {
            let area = study_area(p).map_err(|e| PipelineError::stage("procure", e))?;
            let tiles = plan_initial_grid(&area, p.tile_width_m, p.tile_height_m).map_err(|e| PipelineError::stage("procure", e))?;
            let mut inputs: Vec<PathBuf> = p.area.iter().cloned().collect();
            let mut outputs = Vec::new();
            let mut sets = Vec::new();
            let mut warnings = 0;
            for s in &p.sources {
                let source = s.source.open().map_err(|e| PipelineError::stage("procure", e))?;
                let outcome = fetch_grid(&tiles, source.as_ref(), &s.source, p.min_dim_m).map_err(|e| PipelineError::stage("procure", e))?;
                warnings += outcome.warnings.len();
                let records = dedupe_by_id(outcome.records);
                log::info!("procured {} records from {} in {} queries", records.len(), s.source.source_id, outcome.queries);
                let name = file_name("raw", &s.source.source_id, "ndjson");
                let path = r.out(&name);
                persistence::save_raw(&records, &path).map_err(|e| PipelineError::stage("procure", e))?;
                inputs.extend(s.source.file.iter().cloned());
                outputs.push(name);
                sets.push((s.source.source_id.clone(), records, s.profile.clone(), path));
            }
            Ok(((sets, warnings), inputs, outputs))
        })?;
        raw_sets.extend(procured.0);
        truncation_warnings = procured.1;
    }

    let pois: Vec<StandardPoi> = run.stage("normalize", |r| {
        let n = &cfg.normalize;
        let err = |e: String| PipelineError::stage("normalize", e);
        let vocab = match &n.vocabulary {
            Some(v) => AddressVocabulary::load(v).map_err(|e| err(format!("{}: {e}", v.display())))?,
            None => AddressVocabulary::default(),
        };
        let date = n.extraction_date.unwrap_or_else(|| chrono::Utc::now().date_naive());
        let mut inputs: Vec<PathBuf> = n.vocabulary.iter().cloned().collect();
        let mut outputs = Vec::new();
        let mut issues = 0;
        let mut sets = std::mem::take(&mut raw_sets);
        for i in &n.inputs {
            let loaded = persistence::load_raw(&i.path, &i.source_id).map_err(|e| err(e.to_string()))?;
            for issue in &loaded.issues {
                log::warn!("{}: {issue}", i.path.display());
            }
            issues += loaded.issues.len();
            sets.push((i.source_id.clone(), loaded.records, i.profile.clone(), i.path.clone()));
        }
        let mut all: Vec<StandardPoi> = Vec::new();
        for (source_id, records, profile, path) in sets {
            let profile_value = load_profile(profile.as_deref(), &source_id).map_err(err)?;
            let (pois, errors) = standardize_all(&records, &profile_value, date, &vocab);
            for e in &errors {
                log::warn!("{}: {e}", path.display());
            }
            issues += errors.len();
            let name = file_name("std", &source_id, "ndjson");
            persistence::save_dataset(&pois, &r.out(&name), DatasetFormat::Ndjson).map_err(|e| err(e.to_string()))?;
            inputs.push(path);
            inputs.extend(profile);
            outputs.push(name);
            all.extend(pois);
        }
        for path in &n.standardized {
            let loaded: Loaded<StandardPoi> =
                persistence::load_dataset(path, DatasetFormat::from_path(path)).map_err(|e| err(e.to_string()))?;
            for issue in &loaded.issues {
                log::warn!("{}: {issue}", path.display());
            }
            issues += loaded.issues.len();
            inputs.push(path.clone());
            all.extend(loaded.records);
        }
        let problems = validate_dataset(&all);
        if !problems.is_empty() {
            return Err(err(format!("{} invalid records, first: {}", problems.len(), problems[0])));
        }
        all.sort_by(|a, b| a.id.cmp(&b.id));
        record_issues = issues;
        Ok((all, inputs, outputs))
    })?;

    let pois = match &cfg.taxonomy {
        None => pois,
        Some(t) => run.stage("taxonomy-map", |r| {
            let err = |e: String| PipelineError::stage("taxonomy-map", e);
            let mut store = EmbeddingStore::load(&t.embeddings).map_err(|e| err(format!("{}: {e}", t.embeddings.display())))?;
            let mut inputs = vec![t.embeddings.clone(), t.targets.clone()];
            if let Some(sw) = &t.subwords {
                let file = fs::File::open(sw).map_err(|e| err(format!("{}: {e}", sw.display())))?;
                store = store.with_subwords(std::io::BufReader::new(file)).map_err(|e| err(e.to_string()))?;
                inputs.push(sw.clone());
            }
            let targets = TargetTaxonomy::load(&t.targets, &store).map_err(|e| err(format!("{}: {e}", t.targets.display())))?;
            let mapped: Vec<StandardPoi> = pois.iter().map(|p| map_poi(p, &targets, &store, t.threshold).0).collect();
            let name = "mapped.ndjson".to_string();
            persistence::save_dataset(&mapped, &r.out(&name), DatasetFormat::Ndjson).map_err(|e| err(e.to_string()))?;
            Ok((mapped, inputs, vec![name]))
        })?,
    };

    let decided: Vec<DecidedPair> = run.stage("match", |r| {
        let m = &cfg.matching;
        let err = |e: String| PipelineError::stage("match", e);
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        let decider = if let Some(b) = &m.baseline {
            let params = WsaParams::new(b.alpha, b.beta, b.v_threshold).map_err(|e| err(e.to_string()))?;
            Decider::Wsa { params, backend: b.backend }
        } else if let Some(path) = &m.model {
            inputs.push(path.clone());
            Decider::Model(persistence::load_model(path).map_err(|e| err(e.to_string()))?)
        } else {
            let path = m.labels.as_ref().expect("validated");
            inputs.push(path.clone());
            let labels = persistence::load_labeled_pairs(path).map_err(|e| err(e.to_string()))?;
            let train = PairFeaturizer::new(&pois, m.backend, m.radius_m).featurize_listed(&labels).map_err(err)?;
            let tc = TrainConfig {
                algorithm: m.algorithm,
                backend: m.backend,
                k: m.k,
                rebalance: m.rebalance,
                grid: default_grid(m.algorithm),
                folds: m.folds,
                seed: cfg.seed,
                decision_threshold: m.decision_threshold,
            };
            let model = crate::matcher::train_match_model(&train, &tc).map_err(|e| err(e.to_string()))?;
            persistence::save_model(&model, &r.out("model.json")).map_err(|e| err(e.to_string()))?;
            outputs.push("model.json".to_string());
            Decider::Model(model)
        };
        let decided = match_all(&pois, &decider, m.radius_m).map_err(|e| err(e.to_string()))?;
        persistence::save_decided_pairs(&decided, &r.out("pairs.csv")).map_err(|e| err(e.to_string()))?;
        outputs.push("pairs.csv".to_string());
        Ok((decided, inputs, outputs))
    })?;
    let match_count = decided.iter().filter(|d| d.is_match()).count();

    let ranking = SourceRanking::new(cfg.unify.ranking.iter())
        .map_err(|e| PipelineError::Config(e.to_string()))?
        .extended(pois.iter().map(|p| p.source.as_str()).collect::<BTreeSet<_>>());
    let unified = run.stage("unify", |r| {
        let unified = unify_dataset(&pois, &match_pairs(&decided), &ranking).map_err(|e| PipelineError::stage("unify", e))?;
        persistence::save_dataset(&unified, &r.out("unified.geojson"), DatasetFormat::GeoJson)
            .map_err(|e| PipelineError::stage("unify", e))?;
        Ok((unified, Vec::new(), vec!["unified.geojson".to_string()]))
    })?;

    if cfg.coverage.enabled {
        run.stage("coverage", |r| {
            let report = coverage_report(&pois, Some(&unified), &ranking);
            persistence::write_text(&r.out("coverage.csv"), &report.to_csv()).map_err(|e| PipelineError::stage("coverage", e))?;
            Ok(((), Vec::new(), vec!["coverage.csv".to_string()]))
        })?;
    }

    Ok(PipelineReport {
        poi_count: pois.len(),
        match_count,
        unified_count: unified.len(),
        flagged_count: unified.iter().filter(|u| u.poi.requires_verification).count(),
        truncation_warnings,
        record_issues,
        manifest: run.manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let cfg = PipelineConfig::from_toml(
            r#"
output_dir = "out"
[normalize]
standardized = ["a.ndjson"]
[match]
baseline = { alpha = 0.8, beta = 0.2, v_threshold = 0.85 }
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.matching.radius_m, 100.0);
        assert_eq!(cfg.matching.k, 10);
        assert_eq!(cfg.matching.baseline.as_ref().unwrap().backend, FeatureBackend::Hybrid);
        assert_eq!(cfg.unify.ranking, ["onemap", "sla", "google", "here", "osm"]);
        assert!(cfg.coverage.enabled);

        for bad in [
            "output_dir = 'o'\n[normalize]\nstandardized = ['a']\n[match]\n",
            "output_dir = 'o'\n[normalize]\nstandardized = ['a']\n[match]\nmodel = 'm'\nlabels = 'l'\n",
            "output_dir = 'o'\n[match]\nmodel = 'm'\n",
            "output_dir = 'o'\n[normalize]\nstandardized = ['a']\n[match]\nmodel = 'm'\nradius_m = 0\n",
            "output_dir = 'o'\nbogus = 1\n[normalize]\nstandardized = ['a']\n[match]\nmodel = 'm'\n",
            "output_dir = 'o'\n[normalize]\nstandardized = ['a']\n[taxonomy]\nembeddings='e'\ntargets='t'\nthreshold=1.5\n[match]\nmodel = 'm'\n",
        ] {
            let e = PipelineConfig::from_toml(bad).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{bad}: {e}");
        }
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let mut cfg = PipelineConfig::from_toml(
            "output_dir = 'out'\n[normalize]\nstandardized = ['/abs.ndjson', 'rel.ndjson']\n[match]\nmodel = 'm.json'\n",
        )
        .unwrap();
        cfg.resolve_paths(Path::new("/cfg"));
        assert_eq!(cfg.output_dir, Path::new("/cfg/out"));
        assert_eq!(cfg.normalize.standardized, [PathBuf::from("/abs.ndjson"), PathBuf::from("/cfg/rel.ndjson")]);
        assert_eq!(cfg.matching.model.as_deref(), Some(Path::new("/cfg/m.json")));
    }

    #[test]
    fn file_names_are_sanitised() {
        assert_eq!(file_name("std", "my source/1", "ndjson"), "std-my_source_1.ndjson");
    }
}
