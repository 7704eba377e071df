//! Command-line surface: `build`, `classify`, `evaluate`, `rc-curve`, and
//! `synth`, driven by a strict declarative TOML config.
//!
//! Configuration precedence: command-line flags override config-file keys,
//! which override built-in defaults. Unknown config keys are errors. The one
//! global seed deterministically derives every internal seed (archive build,
//! augmentation, trial sampling, synthesis), so a run is reproducible from
//! `(config, flags)` alone at any thread count.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 config/validation failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{
    build_archive, load_archive, save_archive, ArchiveError, BuildConfig, BuildTrace,
    SignatureArchive,
};
use crate::data::{
    self, apply_normalization, load_feature_csv, DataError, FamilySpec, FeatureTable, RareFamily,
    TrialConfig,
};
use crate::eval::{
    classification_metrics, risk_coverage_curve, EvalError, EvalReport, GroundTruthSet,
    NovelAccounting, RiskCoverageCurve, NOVEL_MARKER,
};
use crate::inference::{
    classify, AugmentationConfig, InferenceError, Metric, MetricParams, Outcome,
    PredictionRecord,
};
use crate::linalg::LinalgError;
use crate::plot::render_rc_curve_svg;
use crate::rank::{EnsembleConfig, RankError, RankSelectionReport};
use crate::rng::derive_seed;

const SEED_BUILD: u64 = 1;
const SEED_AUG: u64 = 2;
const SEED_TRIAL: u64 = 3;
const SEED_SYNTH: u64 = 4;

/// Errors surfaced to the operator; the variant decides the exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Config or validation failure: exit code 2.
    #[error("config: {0}")]
    Config(String),
    /// Runtime failure: exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    /// Single-line rendering for machine-parsable stderr.
    pub fn single_line(&self) -> String {
        let text = self.to_string();
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

impl From<ArchiveError> for CliError {
    fn from(e: ArchiveError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<RankError> for CliError {
    fn from(e: RankError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidParameter(_) | DataError::Config(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io error: {e}"))
    }
}

// ------------------------------------------------------------------ config

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Z-score, clamp, and remap features into [0, 1] at build time. Turn
    /// off for tables that are already nonnegative and comparably scaled.
    pub normalize: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { normalize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankSection {
    pub k_min: usize,
    pub k_max: usize,
    pub n_perturbations: usize,
    pub noise_magnitude: f64,
    pub nmf_max_iters: usize,
    pub nmf_tol: f64,
    pub min_silhouette: f64,
    pub error_slack: f64,
    pub error_floor: f64,
}

impl Default for RankSection {
    fn default() -> Self {
        let d = EnsembleConfig::default();
        Self {
            k_min: d.k_min,
            k_max: d.k_max,
            n_perturbations: d.n_perturbations,
            noise_magnitude: d.noise_magnitude,
            nmf_max_iters: d.nmf_max_iters,
            nmf_tol: d.nmf_tol,
            min_silhouette: d.min_silhouette,
            error_slack: d.error_slack,
            error_floor: d.error_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildSection {
    pub tau: f64,
    pub max_depth: usize,
    pub min_cluster_size: usize,
    pub min_labeled_fraction: f64,
    pub rank: RankSection,
}

impl Default for BuildSection {
    fn default() -> Self {
        let d = BuildConfig::default();
        Self {
            tau: d.tau,
            max_depth: d.max_depth,
            min_cluster_size: d.min_cluster_size,
            min_labeled_fraction: d.min_labeled_fraction,
            rank: RankSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugSection {
    pub p: usize,
    pub epsilon_norm: f64,
    pub n_bootstrap: usize,
}

impl Default for AugSection {
    fn default() -> Self {
        let d = AugmentationConfig::default();
        Self {
            p: d.p,
            epsilon_norm: d.epsilon_norm,
            n_bootstrap: d.n_bootstrap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceSection {
    /// projection_similarity | ensemble_voting | data_augmentation
    pub metric: String,
    pub threshold: f64,
    /// Per-signature vote threshold for ensemble voting.
    pub vote_threshold: f64,
    /// Threshold grid resolution for risk-coverage sweeps.
    pub n_points: usize,
    pub novel_accounting: NovelAccounting,
    pub augmentation: AugSection,
}

impl Default for InferenceSection {
    fn default() -> Self {
        Self {
            metric: "ensemble_voting".into(),
            threshold: 0.5,
            vote_threshold: 0.5,
            n_points: 512,
            novel_accounting: NovelAccounting::PenalizePredictedClass,
            augmentation: AugSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSection {
    pub families: Vec<String>,
    pub novel_family: String,
    #[serde(default)]
    pub rare_families: Vec<RareFamily>,
    pub test_fraction: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n_features: usize,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub novel: Option<String>,
    pub families: Vec<FamilySpec>,
}

/// The declarative run configuration; see the crate README for an annotated
/// example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    /// Base directory for relative output paths.
    pub output_dir: Option<PathBuf>,
    pub data: DataSection,
    pub build: BuildSection,
    pub inference: InferenceSection,
    pub trial: Option<TrialSection>,
    pub synth: Option<SynthSection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            threads: None,
            output_dir: None,
            data: DataSection::default(),
            build: BuildSection::default(),
            inference: InferenceSection::default(),
            trial: None,
            synth: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Check every section against its module's invariants before any work
    /// starts, naming the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        self.effective_build_config()
            .validate()
            .map_err(|e| CliError::Config(format!("build: {e}")))?;
        self.effective_build_config()
            .rank_config
            .validate_bounds()
            .map_err(|e| CliError::Config(format!("build.rank: {e}")))?;
        self.parsed_metric()?;
        if !(0.0..=1.0).contains(&self.inference.threshold) {
            return Err(CliError::Config(format!(
                "inference.threshold must lie in [0, 1], got {}",
                self.inference.threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.inference.vote_threshold) {
            return Err(CliError::Config(format!(
                "inference.vote_threshold must lie in [0, 1], got {}",
                self.inference.vote_threshold
            )));
        }
        if self.inference.n_points < 2 {
            return Err(CliError::Config("inference.n_points must be >= 2".into()));
        }
        let aug = &self.inference.augmentation;
        if !(aug.epsilon_norm > 0.0) {
            return Err(CliError::Config(format!(
                "inference.augmentation.epsilon_norm must be > 0, got {}",
                aug.epsilon_norm
            )));
        }
        if aug.p == 0 || aug.n_bootstrap == 0 {
            return Err(CliError::Config(
                "inference.augmentation.p and n_bootstrap must be >= 1".into(),
            ));
        }
        if let Some(trial) = self.effective_trial_config() {
            trial
                .validate()
                .map_err(|e| CliError::Config(format!("trial: {e}")))?;
        }
        if let Some(synth) = &self.synth {
            if synth.n_features == 0 {
                return Err(CliError::Config("synth.n_features must be >= 1".into()));
            }
            if synth.families.is_empty() {
                return Err(CliError::Config("synth.families must be nonempty".into()));
            }
            if !(0.0..=0.2).contains(&synth.noise) {
                return Err(CliError::Config(format!(
                    "synth.noise must lie in [0, 0.2], got {}",
                    synth.noise
                )));
            }
        }
        Ok(())
    }

    pub fn effective_build_config(&self) -> BuildConfig {
        BuildConfig {
            tau: self.build.tau,
            max_depth: self.build.max_depth,
            min_cluster_size: self.build.min_cluster_size,
            min_labeled_fraction: self.build.min_labeled_fraction,
            rank_config: EnsembleConfig {
                k_min: self.build.rank.k_min,
                k_max: self.build.rank.k_max,
                n_perturbations: self.build.rank.n_perturbations,
                noise_magnitude: self.build.rank.noise_magnitude,
                nmf_seed: derive_seed(self.seed, &[SEED_BUILD]),
                nmf_max_iters: self.build.rank.nmf_max_iters,
                nmf_tol: self.build.rank.nmf_tol,
                min_silhouette: self.build.rank.min_silhouette,
                error_slack: self.build.rank.error_slack,
                error_floor: self.build.rank.error_floor,
            },
        }
    }

    fn parsed_metric(&self) -> Result<Metric, CliError> {
        self.inference
            .metric
            .parse()
            .map_err(|e| CliError::Config(format!("inference.metric: {e}")))
    }

    pub fn metric_params(&self) -> Result<MetricParams, CliError> {
        Ok(match self.parsed_metric()? {
            Metric::ProjectionSimilarity => MetricParams::Projection,
            Metric::EnsembleVoting => MetricParams::Ensemble {
                vote_threshold: self.inference.vote_threshold,
            },
            Metric::DataAugmentation => MetricParams::Augmentation(AugmentationConfig {
                p: self.inference.augmentation.p,
                epsilon_norm: self.inference.augmentation.epsilon_norm,
                n_bootstrap: self.inference.augmentation.n_bootstrap,
                seed: derive_seed(self.seed, &[SEED_AUG]),
            }),
        })
    }

    pub fn effective_trial_config(&self) -> Option<TrialConfig> {
        self.trial.as_ref().map(|t| TrialConfig {
            families: t.families.clone(),
            novel_family: t.novel_family.clone(),
            rare_families: t.rare_families.clone(),
            test_fraction: t.test_fraction,
            n_trials: t.n_trials,
            seed: derive_seed(self.seed, &[SEED_TRIAL]),
        })
    }

    fn resolve_out(&self, path: &Path) -> PathBuf {
        match (&self.output_dir, path.is_relative()) {
            (Some(dir), true) => dir.join(path),
            _ => path.to_path_buf(),
        }
    }
}

// --------------------------------------------------------------- arguments

#[derive(Debug, Parser)]
#[command(
    name = "sigarch",
    version,
    about = "Labeled latent-signature archives and abstaining classification"
)]
pub struct Cli {
    /// Path to a TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; overrides the config key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker-thread cap; overrides the config key.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Include per-signature diagnostics in prediction output.
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a labeled signature archive from a training CSV.
    Build {
        /// Training feature CSV (sample_id,label,features...).
        #[arg(long)]
        train: PathBuf,
        /// Output archive path; trace and rank reports land beside it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify a feature CSV against an archive, one JSON line per sample.
    Classify {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Confidence metric; overrides the config key.
        #[arg(long)]
        metric: Option<String>,
        /// Rejection threshold; overrides the config key.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against ground truth and write an evaluation report.
    Evaluate {
        /// Predictions JSONL produced by `classify`.
        #[arg(long)]
        predictions: PathBuf,
        /// CSV holding sample_id and label columns (label NOVEL marks
        /// novel-class samples).
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep rejection thresholds and write the risk-coverage curve.
    RcCurve {
        #[arg(long)]
        archive: PathBuf,
        /// Labeled feature CSV; labels provide the ground truth.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        out_csv: PathBuf,
        #[arg(long)]
        out_svg: PathBuf,
    },
    /// Generate a synthetic feature table with planted ground truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

/// Entry point behind the thin binary: resolve config, apply flag
/// overrides, validate, and dispatch.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = Some(threads);
    }
    match &cli.command {
        Command::Classify { metric, threshold, .. } => {
            if let Some(m) = metric {
                config.inference.metric = m.clone();
            }
            if let Some(t) = threshold {
                config.inference.threshold = *t;
            }
        }
        Command::RcCurve { metric: Some(m), .. } => {
            config.inference.metric = m.clone();
        }
        _ => {}
    }
    config.validate()?;

    if let Some(threads) = config.threads {
        // Ignore the error if a pool already exists (e.g. repeated in-process
        // calls); the configured cap only matters for fresh processes.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    match &cli.command {
        Command::Build { train, out } => cmd_build(&config, train, out),
        Command::Classify { archive, input, out, .. } => {
            cmd_classify(&config, archive, input, out, cli.verbose)
        }
        Command::Evaluate { predictions, truth, out } => {
            cmd_evaluate(predictions, truth, &config.resolve_out(out))
        }
        Command::RcCurve { archive, input, out_csv, out_svg, .. } => {
            cmd_rc_curve(&config, archive, input, out_csv, out_svg)
        }
        Command::Synth { out } => cmd_synth(&config, out),
    }
}

fn sibling_path(base: &Path, suffix: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    base.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Serialize)]
struct NodeRankReport<'a> {
    node: usize,
    depth: usize,
    report: &'a RankSelectionReport,
}

/// `build`: train an archive, persist it with its normalization parameters,
/// and write the build trace and per-node rank-selection reports beside it.
pub fn cmd_build(config: &RunConfig, train_csv: &Path, out: &Path) -> Result<(), CliError> {
    let out = config.resolve_out(out);
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let table = load_feature_csv(train_csv)?;
    let (dataset, params) = if config.data.normalize {
        let (dataset, params) = data::normalized_dataset(&table)?;
        (dataset, Some(params))
    } else {
        (data::dataset_from_table(&table)?, None)
    };

    let build_config = config.effective_build_config();
    let (mut archive, trace) = build_archive(&dataset, &build_config)?;
    archive.set_normalization(params);

    save_archive(&archive, &out)?;
    write_json(&sibling_path(&out, "trace.json"), &trace)?;
    let rank_reports: Vec<NodeRankReport> = trace
        .nodes
        .iter()
        .map(|n| NodeRankReport {
            node: n.index,
            depth: n.depth,
            report: &n.rank_report,
        })
        .collect();
    write_json(&sibling_path(&out, "ranks.json"), &rank_reports)?;

    print_build_summary(&archive, &trace, &out);
    Ok(())
}

fn print_build_summary(archive: &SignatureArchive, trace: &BuildTrace, out: &Path) {
    let mut classes = String::new();
    for (class, members) in archive.class_index() {
        let _ = write!(classes, " {class}={}", members.len());
    }
    println!(
        "archive: {} signatures across {} classes -> {}",
        archive.signature_count(),
        archive.class_index().len(),
        out.display()
    );
    println!("signatures per class:{classes}");
    println!(
        "build: depth {} over {} nodes; samples {} archived / {} discarded / {} unassigned of {}",
        trace.max_depth(),
        trace.nodes.len(),
        trace.archived_samples,
        trace.discarded_samples,
        trace.unassigned_samples,
        trace.total_samples
    );
}

/// Raw feature vectors for classification, transformed with the archive's
/// stored normalization when present.
fn vectors_for_archive(
    archive: &SignatureArchive,
    table: &FeatureTable,
) -> Result<Vec<Array1<f64>>, CliError> {
    if let Some(params) = archive.normalization() {
        if table.n_features() != params.n_features() {
            return Err(CliError::Runtime(format!(
                "feature count mismatch: archive was built on {} features, input has {}",
                params.n_features(),
                table.n_features()
            )));
        }
        table
            .rows()
            .iter()
            .map(|row| apply_normalization(params, &row.values).map_err(CliError::from))
            .collect()
    } else {
        if table.n_features() != archive.feature_count() {
            return Err(CliError::Runtime(format!(
                "feature count mismatch: archive holds {} features, input has {}",
                archive.feature_count(),
                table.n_features()
            )));
        }
        Ok(table
            .rows()
            .iter()
            .map(|row| Array1::from_vec(row.values.clone()))
            .collect())
    }
}

/// `classify`: one JSON line per sample, then a coverage summary.
pub fn cmd_classify(
    config: &RunConfig,
    archive_path: &Path,
    input_csv: &Path,
    out: &Path,
    verbose: bool,
) -> Result<(), CliError> {
    let out = config.resolve_out(out);
    let archive = load_archive(archive_path)?;
    let table = load_feature_csv(input_csv)?;
    let vectors = vectors_for_archive(&archive, &table)?;
    let params = config.metric_params()?;
    let threshold = config.inference.threshold;

    let predictions: Vec<Result<PredictionRecord, CliError>> = table
        .rows()
        .par_iter()
        .zip(vectors.par_iter())
        .map(|(row, x)| {
            let p = classify(&archive, x.view(), &params, threshold)?;
            Ok(PredictionRecord {
                sample_id: row.sample_id.clone(),
                metric: p.metric,
                outcome: p.outcome,
                confidence: p.confidence,
                detail: verbose.then_some(p.detail),
            })
        })
        .collect();

    let mut lines = String::new();
    let mut label_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut accepted = 0usize;
    let total = table.len();
    for record in &predictions {
        let record = record.as_ref().map_err(|e| CliError::Runtime(e.to_string()))?;
        match &record.outcome {
            Outcome::Label(l) => {
                accepted += 1;
                *label_counts.entry(l.clone()).or_default() += 1;
            }
            Outcome::Reject => {
                *label_counts.entry("REJECT".into()).or_default() += 1;
            }
        }
        lines.push_str(
            &serde_json::to_string(record)
                .map_err(|e| CliError::Runtime(format!("serialization failed: {e}")))?,
        );
        lines.push('\n');
    }
    std::fs::write(&out, lines)?;

    let coverage = if total > 0 {
        accepted as f64 / total as f64
    } else {
        0.0
    };
    let mut counts = String::new();
    for (label, count) in &label_counts {
        let _ = write!(counts, " {label}={count}");
    }
    println!(
        "classified {total} samples with {} at threshold {}: coverage {coverage:.4}",
        config.inference.metric, threshold
    );
    println!("outcomes:{counts}");
    println!("predictions -> {}", out.display());
    Ok(())
}

fn read_predictions_jsonl(path: &Path) -> Result<Vec<PredictionRecord>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord = serde_json::from_str(line).map_err(|e| {
            CliError::Runtime(format!("bad prediction record on line {}: {e}", i + 1))
        })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(CliError::Runtime(format!(
            "no predictions in {}",
            path.display()
        )));
    }
    Ok(records)
}

/// Ground truth from any CSV carrying `sample_id` and `label` columns.
fn read_truth_csv(path: &Path) -> Result<GroundTruthSet, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Runtime(format!("unreadable header: {e}")))?
        .clone();
    let id_col = headers
        .iter()
        .position(|h| h == "sample_id")
        .ok_or_else(|| CliError::Runtime("truth CSV needs a sample_id column".into()))?;
    let label_col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| CliError::Runtime("truth CSV needs a label column".into()))?;

    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::Runtime(format!("bad truth row {}: {e}", i + 1)))?;
        let label = &record[label_col];
        if label.is_empty() {
            return Err(CliError::Runtime(format!(
                "truth row {} ({}) has no label",
                i + 1,
                &record[id_col]
            )));
        }
        ids.push(record[id_col].to_string());
        labels.push(label.to_string());
    }
    GroundTruthSet::new(ids, labels, NOVEL_MARKER.to_string()).map_err(CliError::from)
}

fn percent(rate: Option<f64>) -> String {
    match rate {
        Some(r) => format!("{:.2}%", r * 100.0),
        None => "n/a".into(),
    }
}

/// `evaluate`: selective metrics for a prediction file against ground truth.
pub fn cmd_evaluate(predictions: &Path, truth_csv: &Path, out: &Path) -> Result<(), CliError> {
    let records = read_predictions_jsonl(predictions)?;
    let truth = read_truth_csv(truth_csv)?;
    let report = classification_metrics(&records, &truth)?;
    write_json(out, &report)?;
    print_eval_report(&report);
    println!("report -> {}", out.display());
    Ok(())
}

fn print_eval_report(report: &EvalReport) {
    println!(
        "F1 {:.3}  precision {:.3}  recall {:.3}  (weighted F1 {:.3})",
        report.macro_f1, report.macro_precision, report.macro_recall, report.weighted_f1
    );
    println!(
        "coverage {:.4}  rejection_seen {}  rejection_novel {}",
        report.coverage,
        percent(report.rejection_seen),
        percent(report.rejection_novel)
    );
    for (class, m) in &report.per_class {
        println!(
            "  {class}: f1 {:.3} precision {:.3} recall {:.3} support {}",
            m.f1, m.precision, m.recall, m.support
        );
    }
}

/// `rc-curve`: threshold-free confidences per sample, swept into a
/// risk-coverage curve; writes CSV and SVG and prints the AURC.
pub fn cmd_rc_curve(
    config: &RunConfig,
    archive_path: &Path,
    input_csv: &Path,
    out_csv: &Path,
    out_svg: &Path,
) -> Result<(), CliError> {
    let out_csv = config.resolve_out(out_csv);
    let out_svg = config.resolve_out(out_svg);
    let archive = load_archive(archive_path)?;
    let table = load_feature_csv(input_csv)?;
    for row in table.rows() {
        if row.label.is_none() {
            return Err(CliError::Runtime(format!(
                "rc-curve needs ground-truth labels; sample {:?} is unlabeled",
                row.sample_id
            )));
        }
    }
    let vectors = vectors_for_archive(&archive, &table)?;
    let params = config.metric_params()?;

    let scored: Vec<Result<(f64, String), CliError>> = vectors
        .par_iter()
        .map(|x| {
            // Classify below any reachable confidence so the would-be label
            // is available even for confidence 0.
            let p = classify(&archive, x.view(), &params, -1.0)?;
            let label = p
                .outcome
                .label()
                .unwrap_or(NOVEL_MARKER)
                .to_string();
            Ok((p.confidence, label))
        })
        .collect();

    let mut confidences = Vec::with_capacity(table.len());
    let mut labels = Vec::with_capacity(table.len());
    for entry in scored {
        let (c, l) = entry?;
        confidences.push(c);
        labels.push(l);
    }
    let truth = GroundTruthSet::new(
        table.rows().iter().map(|r| r.sample_id.clone()).collect(),
        table
            .rows()
            .iter()
            .map(|r| r.label.clone().expect("checked above"))
            .collect(),
        NOVEL_MARKER.to_string(),
    )?;

    let curve: RiskCoverageCurve = risk_coverage_curve(
        &confidences,
        &labels,
        &truth,
        config.inference.n_points,
        config.inference.novel_accounting,
    )?;

    std::fs::write(&out_csv, curve.to_csv_string())?;
    std::fs::write(
        &out_svg,
        render_rc_curve_svg(&curve, &config.inference.metric),
    )?;
    println!(
        "AURC {:.6} over {} points ({})",
        curve.aurc,
        curve.points.len(),
        config.inference.metric
    );
    println!("curve -> {} ; plot -> {}", out_csv.display(), out_svg.display());
    Ok(())
}

/// `synth`: write a synthetic feature CSV plus its planted-truth JSON.
pub fn cmd_synth(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let out = config.resolve_out(out);
    let section = config
        .synth
        .as_ref()
        .ok_or_else(|| CliError::Config("synth requires a [synth] config section".into()))?;
    let (table, truth) = data::generate_synthetic(
        section.n_features,
        &section.families,
        section.noise,
        section.novel.as_deref(),
        derive_seed(config.seed, &[SEED_SYNTH]),
    )?;
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    table.write_csv(&out)?;
    write_json(&sibling_path(&out, "truth.json"), &truth)?;
    println!(
        "synthesized {} samples x {} features across {} families -> {}",
        table.len(),
        table.n_features(),
        section.families.len(),
        out.display()
    );
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
