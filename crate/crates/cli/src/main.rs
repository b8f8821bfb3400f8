//! `poiconflate` — command-line front end for every pipeline stage.
//!
//! Exit status: 0 on success, 1 when a stage fails, 2 for configuration or
//! usage errors.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use chrono::{NaiveDate, Utc};
use clap::{Args, Parser, Subcommand};
use poiconflate::evaluation::{coverage_report, evaluate_pairs, generate_fixture, FixtureConfig};
use poiconflate::matcher::{
    default_grid, match_all, train_match_model, Algorithm, Decider, FeatureBackend, PairFeaturizer, TrainConfig,
    WsaParams,
};
use poiconflate::model::{SourceRanking, StandardPoi};
use poiconflate::normalization::{standardize_all, AddressVocabulary, SourceProfile};
use poiconflate::persistence::{self, DatasetFormat, Loaded};
use poiconflate::pipeline::{run_pipeline, PipelineConfig, PipelineError};
use poiconflate::procurement::{
    dedupe_by_id, fetch_grid, plan_initial_grid, PagedSourceConfig, StudyArea, DEFAULT_MIN_DIM_M,
};
use poiconflate::taxonomy::{map_poi, EmbeddingStore, TargetTaxonomy, DEFAULT_THRESHOLD};
use poiconflate::unification::{match_pairs, unify_dataset, UnifiedPoi};
use poiconflate::verification::{
    append_audit, list_flagged, load_audit, read_resolutions_csv, replay, resolve_flag, review_interactive, Suggester,
};
use serde_json::Value;

#[derive(Parser, Debug)]
#[command(name = "poiconflate", version, about = "Point-of-interest conflation across heterogeneous sources")]
struct Cli {
    /// Seed for every randomised step.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Log verbosity (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fetch every record of a paged source inside a study area.
    Procure(ProcureArgs),
    /// Convert raw records into the standard schema.
    Normalize(NormalizeArgs),
    /// Map source place types onto the target taxonomy.
    TaxonomyMap(TaxonomyArgs),
    /// Train a match classifier from labelled pairs.
    Train(TrainArgs),
    /// Decide every candidate pair within the search radius.
    Match(MatchArgs),
    /// Merge matched POIs into unified records.
    Unify(UnifyArgs),
    /// List, resolve or replay verification flags.
    Verify(VerifyArgs),
    /// Score predicted pairs against ground-truth labels.
    Evaluate(EvaluateArgs),
    /// Per-source attribute completeness.
    Coverage(CoverageArgs),
    /// Write a synthetic multi-source corpus with ground-truth labels.
    Fixture(FixtureArgs),
    /// Run the whole pipeline from a TOML configuration.
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct ProcureArgs {
    #[arg(long)]
    source_id: String,
    /// Newline-delimited GeoJSON served as a paged source.
    #[arg(long, conflicts_with = "base_url")]
    file: Option<PathBuf>,
    #[arg(long)]
    base_url: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    api_key_env: Option<String>,
    /// GeoJSON polygon of the study area.
    #[arg(long, conflicts_with = "bbox")]
    area: Option<PathBuf>,
    /// south,west,north,east
    #[arg(long, value_delimiter = ',', num_args = 4)]
    bbox: Option<Vec<f64>>,
    #[arg(long, default_value_t = 250.0)]
    tile_m: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_DIM_M)]
    min_dim: f64,
    #[arg(long, default_value_t = 20)]
    page_size: usize,
    #[arg(long, default_value_t = 60)]
    cap: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct NormalizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    source_id: String,
    /// Source profile (TOML); the GeoJSON layout when absent.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Address vocabulary (TOML).
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Extraction date for records without one (default: today).
    #[arg(long)]
    date: Option<NaiveDate>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TaxonomyArgs {
    #[arg(long = "in", required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Word vectors, one `token v1 v2 ...` per line.
    #[arg(long)]
    embeddings: PathBuf,
    /// Optional character n-gram table in the same layout.
    #[arg(long)]
    subwords: Option<PathBuf>,
    /// Target labels, one per line.
    #[arg(long)]
    targets: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Writes every label mapping with its scores as NDJSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Labelled pairs: id_a,id_b,label
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    pois: Vec<PathBuf>,
    #[arg(long, default_value = "gb")]
    algo: Algorithm,
    #[arg(long, default_value = "hybrid")]
    backend: FeatureBackend,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Train a single model on the imbalanced data.
    #[arg(long)]
    no_rebalance: bool,
    #[arg(long, default_value_t = 100.0)]
    radius: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MatchArgs {
    #[arg(long, required = true, num_args = 1..)]
    pois: Vec<PathBuf>,
    #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
    model: Option<PathBuf>,
    /// Weighted-sum baseline over this feature backend.
    #[arg(long, requires_all = ["alpha", "beta", "vthreshold"])]
    baseline: Option<FeatureBackend>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    vthreshold: Option<f64>,
    #[arg(long, default_value_t = 100.0)]
    radius: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct UnifyArgs {
    #[arg(long, required = true, num_args = 1..)]
    pois: Vec<PathBuf>,
    #[arg(long)]
    pairs: PathBuf,
    /// Source authority, most trusted first.
    #[arg(long, value_delimiter = ',')]
    ranking: Option<Vec<String>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Unified (or standard) records.
    #[arg(long = "in")]
    input: PathBuf,
    /// Apply resolutions from `poi_id,action,labels` CSV.
    #[arg(long, conflicts_with_all = ["replay", "interactive"])]
    resolutions: Option<PathBuf>,
    /// Re-apply an existing audit log.
    #[arg(long, conflicts_with = "interactive")]
    replay: Option<PathBuf>,
    /// Review flagged records at the terminal.
    #[arg(long)]
    interactive: bool,
    /// Suggestion sources for interactive review.
    #[arg(long, requires = "targets")]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long, default_value = "operator")]
    operator: String,
    /// Audit log to append resolutions to.
    #[arg(long)]
    audit: Option<PathBuf>,
    /// Where to write the updated records.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct CoverageArgs {
    #[arg(long = "in", required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long)]
    unified: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    ranking: Option<Vec<String>>,
    /// Write CSV here instead of printing a table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FixtureArgs {
    #[arg(long, default_value_t = 1227)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    sources: usize,
    #[arg(long, default_value_t = 0.14)]
    dup_rate: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
}

/// An error with the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

type CliResult = Result<(), Failure>;

trait Classify<T> {
    /// Bad flags, profiles or configuration: exit status 2.
    fn config(self) -> Result<T, Failure>;
    /// Unreadable inputs or a failure while running: exit status 1.
    fn stage(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 2, error: e.into() })
    }
    fn stage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 1, error: e.into() })
    }
}

fn load_pois(paths: &[PathBuf]) -> Result<Vec<StandardPoi>, Failure> {
    let mut out = Vec::new();
    for p in paths {
        let loaded: Loaded<StandardPoi> = persistence::load_dataset(p, DatasetFormat::from_path(p)).stage()?;
        report_issues(p, &loaded.issues);
        out.extend(loaded.records);
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = out.iter().find(|p| !seen.insert(p.id.as_str())) {
        return Err(anyhow!("duplicate POI id {}", dup.id)).stage();
    }
    Ok(out)
}

fn report_issues<E: std::fmt::Display>(path: &Path, issues: &[E]) {
    for i in issues {
        log::warn!("{}: {i}", path.display());
    }
    if !issues.is_empty() {
        eprintln!("{}: {} record(s) skipped", path.display(), issues.len());
    }
}

fn ranking_for(list: &Option<Vec<String>>, pois: &[StandardPoi]) -> Result<SourceRanking, Failure> {
    let base = match list {
        Some(l) => SourceRanking::new(l.iter()).config()?,
        None => SourceRanking::default_singapore(),
    };
    Ok(base.extended(pois.iter().map(|p| p.source.as_str()).collect::<BTreeSet<_>>()))
}

fn procure(a: ProcureArgs) -> CliResult {
    let mut cfg = PagedSourceConfig::capped(&a.source_id);
    cfg.page_size = a.page_size;
    cfg.max_results_per_query = a.cap;
    cfg.file = a.file;
    cfg.base_url = a.base_url;
    cfg.api_key_env = a.api_key_env;
    let area = match (&a.area, &a.bbox) {
        (Some(path), _) => {
            let doc: Value = serde_json::from_str(&fs::read_to_string(path).with_context(|| path.display().to_string()).config()?)
                .with_context(|| path.display().to_string())
                .config()?;
            StudyArea::from_geojson(&doc).config()?
        }
        (None, Some(b)) => StudyArea::rectangle(b[0], b[1], b[2], b[3]).config()?,
        (None, None) => return Err(anyhow!("one of --area or --bbox is required")).config(),
    };
    let source = cfg.open().stage()?;
    let tiles = plan_initial_grid(&area, a.tile_m, a.tile_m).config()?;
    let outcome = fetch_grid(&tiles, source.as_ref(), &cfg, a.min_dim).stage()?;
    for w in &outcome.warnings {
        eprintln!("warning: truncated at {} records in tile {}", w.returned, w.tile.label());
    }
    let records = dedupe_by_id(outcome.records);
    persistence::save_raw(&records, &a.out).stage()?;
    println!(
        "{} records from {} queries ({} tiles subdivided, {} truncation warnings)",
        records.len(),
        outcome.queries,
        outcome.subdivided.len(),
        outcome.warnings.len()
    );
    Ok(())
}

fn normalize(a: NormalizeArgs) -> CliResult {
    let profile = match &a.profile {
        Some(p) => SourceProfile::load(p).config()?,
        None => SourceProfile::geojson_default(&a.source_id),
    };
    let vocab = match &a.vocab {
        Some(v) => AddressVocabulary::load(v).with_context(|| v.display().to_string()).config()?,
        None => AddressVocabulary::default(),
    };
    let loaded = persistence::load_raw(&a.input, &a.source_id).stage()?;
    report_issues(&a.input, &loaded.issues);
    let date = a.date.unwrap_or_else(|| Utc::now().date_naive());
    let (pois, errors) = standardize_all(&loaded.records, &profile, date, &vocab);
    report_issues(&a.input, &errors);
    persistence::save_dataset(&pois, &a.out, DatasetFormat::from_path(&a.out)).stage()?;
    println!("{} records standardised, {} rejected", pois.len(), errors.len() + loaded.issues.len());
    Ok(())
}

fn load_store(embeddings: &Path, subwords: Option<&Path>) -> Result<EmbeddingStore, Failure> {
    let mut store = EmbeddingStore::load(embeddings).with_context(|| embeddings.display().to_string()).stage()?;
    if let Some(sw) = subwords {
        let file = fs::File::open(sw).with_context(|| sw.display().to_string()).stage()?;
        store = store.with_subwords(BufReader::new(file)).stage()?;
    }
    Ok(store)
}

fn taxonomy_map(a: TaxonomyArgs) -> CliResult {
    if !(a.threshold > 0.0 && a.threshold <= 1.0) {
        return Err(anyhow!("--threshold must be in (0, 1]")).config();
    }
    let pois = load_pois(&a.input)?;
    let store = load_store(&a.embeddings, a.subwords.as_deref())?;
    let targets = TargetTaxonomy::load(&a.targets, &store).with_context(|| a.targets.display().to_string()).stage()?;
    for label in targets.unvectorizable() {
        log::warn!("target label `{label}` has no vector; only exact matches can reach it");
    }
    let mut mapped = Vec::with_capacity(pois.len());
    let mut report = String::new();
    for p in &pois {
        let (m, mappings) = map_poi(p, &targets, &store, a.threshold);
        for mapping in mappings {
            let line = serde_json::json!({ "poi_id": p.id, "mapping": mapping });
            report.push_str(&line.to_string());
            report.push('\n');
        }
        mapped.push(m);
    }
    persistence::save_dataset(&mapped, &a.out, DatasetFormat::from_path(&a.out)).stage()?;
    if let Some(r) = &a.report {
        persistence::write_text(r, &report).stage()?;
    }
    let flagged = mapped.iter().filter(|p| p.requires_verification).count();
    println!("{} records mapped, {flagged} flagged for verification", mapped.len());
    Ok(())
}

fn train(a: TrainArgs, seed: u64) -> CliResult {
    let pois = load_pois(&a.pois)?;
    let labels = persistence::load_labeled_pairs(&a.pairs).stage()?;
    let pairs = PairFeaturizer::new(&pois, a.backend, a.radius).featurize_listed(&labels).map_err(|e| anyhow!(e)).stage()?;
    let mut cfg = TrainConfig::new(a.algo, seed);
    cfg.backend = a.backend;
    cfg.k = a.k;
    cfg.folds = a.folds;
    cfg.rebalance = !a.no_rebalance;
    cfg.grid = default_grid(a.algo);
    let model = train_match_model(&pairs, &cfg).stage()?;
    persistence::save_model(&model, &a.out).stage()?;
    println!(
        "trained {} ({} sub-models, {:?}), cross-validated balanced accuracy {:.4}",
        model.algorithm,
        model.sub_models.len(),
        model.hyperparams,
        model.cv_score.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn run_match(a: MatchArgs) -> CliResult {
    let decider = match (&a.model, a.baseline) {
        (Some(m), _) => Decider::Model(persistence::load_model(m).stage()?),
        (None, Some(backend)) => {
            let (Some(alpha), Some(beta), Some(v)) = (a.alpha, a.beta, a.vthreshold) else {
                return Err(anyhow!("--baseline needs --alpha, --beta and --vthreshold")).config();
            };
            Decider::Wsa { params: WsaParams::new(alpha, beta, v).config()?, backend }
        }
        (None, None) => return Err(anyhow!("one of --model or --baseline is required")).config(),
    };
    if a.radius.is_nan() || a.radius <= 0.0 {
        return Err(anyhow!("--radius must be positive")).config();
    }
    let pois = load_pois(&a.pois)?;
    let decided = match_all(&pois, &decider, a.radius).stage()?;
    persistence::save_decided_pairs(&decided, &a.out).stage()?;
    let matches = decided.iter().filter(|d| d.is_match()).count();
    println!("{} candidate pairs, {matches} matches", decided.len());
    Ok(())
}

fn unify(a: UnifyArgs) -> CliResult {
    let pois = load_pois(&a.pois)?;
    let decided = persistence::load_feature_pairs(&a.pairs).stage()?;
    let ranking = ranking_for(&a.ranking, &pois)?;
    let unified = unify_dataset(&pois, &match_pairs(&decided), &ranking).stage()?;
    persistence::save_dataset(&unified, &a.out, DatasetFormat::from_path(&a.out)).stage()?;
    println!("{} records unified into {}", pois.len(), unified.len());
    Ok(())
}

fn verify(a: VerifyArgs) -> CliResult {
    let loaded: Loaded<UnifiedPoi> = persistence::load_dataset(&a.input, DatasetFormat::from_path(&a.input)).stage()?;
    report_issues(&a.input, &loaded.issues);
    let mut records = loaded.records;
    records.iter_mut().for_each(UnifiedPoi::ensure_provenance);
    let mut new_entries = Vec::new();
    if let Some(path) = &a.resolutions {
        let file = fs::File::open(path).with_context(|| path.display().to_string()).stage()?;
        let resolutions = read_resolutions_csv(file).stage()?;
        let now = Utc::now();
        for (id, res) in resolutions {
            new_entries.push(resolve_flag(&mut records, &id, &res, &a.operator, now).stage()?);
        }
    } else if let Some(path) = &a.replay {
        let entries = load_audit(path).stage()?;
        replay(&mut records, &entries).stage()?;
        println!("replayed {} audit entries", entries.len());
    } else if a.interactive {
        let store = a.embeddings.as_deref().map(|e| load_store(e, None)).transpose()?;
        let taxonomy = match (&store, &a.targets) {
            (Some(s), Some(t)) => Some(TargetTaxonomy::load(t, s).with_context(|| t.display().to_string()).stage()?),
            _ => None,
        };
        let suggester = match (&taxonomy, &store) {
            (Some(taxonomy), Some(store)) => Some(Suggester { taxonomy, store }),
            _ => None,
        };
        let stdin = io::stdin();
        new_entries = review_interactive(&mut records, suggester.as_ref(), &a.operator, stdin.lock(), io::stdout()).stage()?;
    }
    if !new_entries.is_empty() {
        match &a.audit {
            Some(path) => append_audit(path, &new_entries).stage()?,
            None => log::warn!("{} resolutions applied without an --audit log", new_entries.len()),
        }
    }
    let flagged = list_flagged(&records);
    if a.resolutions.is_none() && a.replay.is_none() && !a.interactive {
        let mut stdout = io::stdout().lock();
        for (r, reasons) in &flagged {
            let reasons: Vec<&str> = reasons.iter().map(|r| r.as_str()).collect();
            let unmapped: Vec<&str> = r.poi.unmapped_types.iter().map(String::as_str).collect();
            let line = format!("{}\t{}\t{}\t{}", r.poi.id, r.poi.name.as_deref().unwrap_or(""), reasons.join(","), unmapped.join("|"));
            // A closed pipe (e.g. `| head`) just ends the listing.
            if writeln!(stdout, "{line}").is_err() {
                break;
            }
        }
    }
    if let Some(out) = &a.out {
        persistence::save_dataset(&records, out, DatasetFormat::from_path(out)).stage()?;
    }
    eprintln!("{} resolutions applied, {} records still flagged", new_entries.len(), flagged.len());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CliResult {
    let decided = persistence::load_feature_pairs(&a.pairs).stage()?;
    let truth = persistence::load_labeled_pairs(&a.labels).stage()?;
    let pairs: Vec<_> = decided.into_iter().map(|d| d.pair).collect();
    let e = evaluate_pairs(&pairs, &truth).stage()?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&e).stage()?);
    } else {
        let c = e.counts;
        println!("tp {} tn {} fp {} fn {}", c.tp, c.tn, c.fp, c.fn_);
        println!("overall accuracy  {:.4}", e.overall_accuracy);
        match e.balanced_accuracy {
            Some(b) => println!("balanced accuracy {b:.4}"),
            None => println!("balanced accuracy undefined (single class)"),
        }
        if e.undecided_labelled > 0 {
            println!("{} labelled pairs had no decision and count as non-matches", e.undecided_labelled);
        }
    }
    Ok(())
}

fn coverage(a: CoverageArgs) -> CliResult {
    let pois = load_pois(&a.input)?;
    let unified = match &a.unified {
        Some(u) => {
            let loaded: Loaded<UnifiedPoi> = persistence::load_dataset(u, DatasetFormat::from_path(u)).stage()?;
            report_issues(u, &loaded.issues);
            Some(loaded.records)
        }
        None => None,
    };
    let ranking = ranking_for(&a.ranking, &pois)?;
    let report = coverage_report(&pois, unified.as_deref(), &ranking);
    match &a.csv {
        Some(path) => persistence::write_text(path, &report.to_csv()).stage()?,
        None => print!("{}", report.to_text()),
    }
    Ok(())
}

fn fixture(a: FixtureArgs, seed: u64) -> CliResult {
    let cfg = FixtureConfig::new(seed, a.n, a.sources, a.dup_rate);
    let f = generate_fixture(&cfg).map_err(|e| anyhow!(e)).config()?;
    fs::create_dir_all(&a.out).with_context(|| a.out.display().to_string()).stage()?;
    for (source, features) in f.raw_features() {
        let text: String = features.iter().map(|v| format!("{v}\n")).collect();
        persistence::write_text(&a.out.join(format!("raw-{source}.ndjson")), &text).stage()?;
        let pois: Vec<StandardPoi> = f.pois.iter().filter(|p| p.source == source).cloned().collect();
        persistence::save_dataset(&pois, &a.out.join(format!("std-{source}.ndjson")), DatasetFormat::Ndjson).stage()?;
    }
    persistence::save_labeled_pairs(&f.pairs, &a.out.join("labels.csv")).stage()?;
    persistence::save_json(&cfg, &a.out.join("fixture.json")).stage()?;
    println!(
        "{} POIs ({} places), {} labelled pairs, {} matches ({:.2}%)",
        f.pois.len(),
        f.entity_count(),
        f.pairs.len(),
        f.match_count(),
        100.0 * f.match_rate()
    );
    Ok(())
}

fn run(a: RunArgs) -> CliResult {
    let cfg = PipelineConfig::load(&a.config).map_err(|e| Failure { code: e.exit_code() as u8, error: e.into() })?;
    let report = run_pipeline(&cfg).map_err(|e: PipelineError| Failure { code: e.exit_code() as u8, error: e.into() })?;
    println!(
        "{} POIs, {} matches, {} unified records ({} flagged); outputs in {}",
        report.poi_count,
        report.match_count,
        report.unified_count,
        report.flagged_count,
        cfg.output_dir.display()
    );
    if report.truncation_warnings > 0 {
        eprintln!("warning: {} truncated tiles during procurement", report.truncation_warnings);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let seed = cli.seed;
    let result = match cli.command {
        Command::Procure(a) => procure(a),
        Command::Normalize(a) => normalize(a),
        Command::TaxonomyMap(a) => taxonomy_map(a),
        Command::Train(a) => train(a, seed),
        Command::Match(a) => run_match(a),
        Command::Unify(a) => unify(a),
        Command::Verify(a) => verify(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Coverage(a) => coverage(a),
        Command::Fixture(a) => fixture(a, seed),
        Command::Run(a) => run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
