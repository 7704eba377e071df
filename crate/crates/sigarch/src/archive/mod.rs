//! Hierarchical construction of the labeled signature archive.
//!
//! Each node of the recursion factorizes its sample submatrix at an
//! automatically selected rank, assigns samples to the signature with their
//! dominant activation, and checks each cluster for label uniformity. A
//! uniform cluster contributes its signature column to the archive and its
//! samples leave the recursion; a non-uniform cluster is factorized again at
//! the next depth so that mixed signatures separate. Clusters that stay
//! mixed at the depth limit (or fall below the size floor) are discarded
//! rather than force-labeled, which keeps every archived signature pure by
//! construction.

mod store;

pub use store::{load_archive, save_archive, FORMAT_VERSION};

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::NormalizationParams;
use crate::linalg::{nmf_factorize, FeatureMatrix, LinalgError};
use crate::rank::{select_rank, EnsembleConfig, RankError, RankSelectionReport};
use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("archive build failed: {0}")]
    BuildFailed(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("archive format error: {0}")]
    Format(String),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A feature matrix with sample identities and (possibly partial) labels.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    matrix: FeatureMatrix,
    sample_ids: Vec<String>,
    labels: Vec<Option<String>>,
    class_set: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        matrix: FeatureMatrix,
        sample_ids: Vec<String>,
        labels: Vec<Option<String>>,
        class_set: Vec<String>,
    ) -> Result<Self, ArchiveError> {
        let m = matrix.m();
        if sample_ids.len() != m || labels.len() != m {
            return Err(ArchiveError::InvalidParameter(format!(
                "matrix has {m} columns but {} ids and {} labels",
                sample_ids.len(),
                labels.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &sample_ids {
            if !seen.insert(id.as_str()) {
                return Err(ArchiveError::InvalidParameter(format!(
                    "duplicate sample id {id:?}"
                )));
            }
        }
        let mut classes = std::collections::BTreeSet::new();
        for c in &class_set {
            if !classes.insert(c.as_str()) {
                return Err(ArchiveError::InvalidParameter(format!(
                    "duplicate class {c:?} in class set"
                )));
            }
        }
        for label in labels.iter().flatten() {
            if !classes.contains(label.as_str()) {
                return Err(ArchiveError::InvalidParameter(format!(
                    "label {label:?} is not in the class set"
                )));
            }
        }
        Ok(Self {
            matrix,
            sample_ids,
            labels,
            class_set,
        })
    }

    /// Build with the class set inferred from the labels present.
    pub fn with_inferred_classes(
        matrix: FeatureMatrix,
        sample_ids: Vec<String>,
        labels: Vec<Option<String>>,
    ) -> Result<Self, ArchiveError> {
        let mut class_set: Vec<String> = labels.iter().flatten().cloned().collect();
        class_set.sort();
        class_set.dedup();
        Self::new(matrix, sample_ids, labels, class_set)
    }

    pub fn matrix(&self) -> &FeatureMatrix {
        &self.matrix
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn labels(&self) -> &[Option<String>] {
        &self.labels
    }

    pub fn class_set(&self) -> &[String] {
        &self.class_set
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn m(&self) -> usize {
        self.matrix.m()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }
}

/// Per-sample cluster assignment from the activation matrix `H`.
///
/// Columns of `H` are normalized to sum 1 so the dominant activation reads
/// as a probability-like confidence; a sample is assigned only when that
/// confidence strictly exceeds `threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub k: usize,
    pub cluster_of: Vec<Option<usize>>,
    pub confidence_of: Vec<f64>,
    pub threshold: f64,
}

/// Assign each sample (column of `h`) to its argmax cluster when the
/// normalized maximum activation exceeds `tau`. Ties break to the lowest
/// cluster index; an all-zero column is unassigned with confidence 0.
pub fn assign_clusters(h: &Array2<f64>, tau: f64) -> Result<ClusterAssignment, ArchiveError> {
    if !(0.0..1.0).contains(&tau) {
        return Err(ArchiveError::InvalidParameter(format!(
            "tau must lie in [0, 1), got {tau}"
        )));
    }
    let (k, m) = h.dim();
    if k == 0 || m == 0 {
        return Err(ArchiveError::DegenerateInput("empty activation matrix".into()));
    }
    let mut cluster_of = Vec::with_capacity(m);
    let mut confidence_of = Vec::with_capacity(m);
    for j in 0..m {
        let col = h.column(j);
        let sum: f64 = col.sum();
        if sum <= 0.0 {
            cluster_of.push(None);
            confidence_of.push(0.0);
            continue;
        }
        let mut best = 0usize;
        for i in 1..k {
            if col[i] > col[best] {
                best = i;
            }
        }
        let confidence = col[best] / sum;
        confidence_of.push(confidence);
        cluster_of.push(if confidence > tau { Some(best) } else { None });
    }
    Ok(ClusterAssignment {
        k,
        cluster_of,
        confidence_of,
        threshold: tau,
    })
}

/// Uniformity verdict for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterUniformity {
    pub cluster: usize,
    pub is_uniform: bool,
    /// The unanimous label; set only when the cluster is uniform.
    pub majority_label: Option<String>,
    pub labeled_count: usize,
    pub total_count: usize,
}

/// A cluster is uniform when it holds at least `min_cluster_size` assigned
/// samples, at least `min_labeled_fraction` of them carry labels, and every
/// present label agrees. Unlabeled members ride along without voting.
pub fn check_uniformity(
    assignment: &ClusterAssignment,
    labels: &[Option<String>],
    min_cluster_size: usize,
    min_labeled_fraction: f64,
) -> Vec<ClusterUniformity> {
    debug_assert_eq!(assignment.cluster_of.len(), labels.len());
    let mut out = Vec::with_capacity(assignment.k);
    for c in 0..assignment.k {
        let members: Vec<usize> = (0..labels.len())
            .filter(|&j| assignment.cluster_of[j] == Some(c))
            .collect();
        let total_count = members.len();
        let present: Vec<&String> = members.iter().filter_map(|&j| labels[j].as_ref()).collect();
        let labeled_count = present.len();
        let unanimous = labeled_count > 0 && present.windows(2).all(|p| p[0] == p[1]);
        let labeled_enough =
            total_count > 0 && labeled_count as f64 / total_count as f64 >= min_labeled_fraction;
        let is_uniform = total_count >= min_cluster_size && labeled_enough && unanimous;
        out.push(ClusterUniformity {
            cluster: c,
            is_uniform,
            majority_label: if is_uniform {
                Some(present[0].clone())
            } else {
                None
            },
            labeled_count,
            total_count,
        });
    }
    out
}

/// Controls for the hierarchical build.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    /// Assignment confidence threshold applied to normalized activations.
    pub tau: f64,
    /// Deepest node depth the recursion may reach (root is depth 0).
    pub max_depth: usize,
    /// Clusters below this size are never archived and never recursed.
    pub min_cluster_size: usize,
    /// Minimum labeled fraction for a cluster to be archivable.
    pub min_labeled_fraction: f64,
    pub rank_config: EnsembleConfig,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            tau: 0.6,
            max_depth: 5,
            min_cluster_size: 10,
            min_labeled_fraction: 0.3,
            rank_config: EnsembleConfig::default(),
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<(), ArchiveError> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(ArchiveError::InvalidParameter(format!(
                "tau must lie in (0, 1), got {}",
                self.tau
            )));
        }
        if self.max_depth == 0 {
            return Err(ArchiveError::InvalidParameter("max_depth must be >= 1".into()));
        }
        if self.min_cluster_size == 0 {
            return Err(ArchiveError::InvalidParameter(
                "min_cluster_size must be >= 1".into(),
            ));
        }
        if !(self.min_labeled_fraction > 0.0 && self.min_labeled_fraction <= 1.0) {
            return Err(ArchiveError::InvalidParameter(format!(
                "min_labeled_fraction must lie in (0, 1], got {}",
                self.min_labeled_fraction
            )));
        }
        Ok(())
    }
}

/// Provenance of one archived signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureMeta {
    pub depth: usize,
    pub source_cluster_size: usize,
    pub mean_activation: f64,
}

/// The trained model: a labeled matrix of unit-norm latent signatures.
#[derive(Debug, Clone)]
pub struct SignatureArchive {
    m_matrix: Array2<f64>,
    signature_labels: Vec<String>,
    signature_meta: Vec<SignatureMeta>,
    class_set: Vec<String>,
    class_index: BTreeMap<String, Vec<usize>>,
    normalization: Option<NormalizationParams>,
    build_config: Option<BuildConfig>,
}

impl SignatureArchive {
    pub fn new(
        m_matrix: Array2<f64>,
        signature_labels: Vec<String>,
        signature_meta: Vec<SignatureMeta>,
        class_set: Vec<String>,
        normalization: Option<NormalizationParams>,
        build_config: Option<BuildConfig>,
    ) -> Result<Self, ArchiveError> {
        let (n, k) = m_matrix.dim();
        if n == 0 || k == 0 {
            return Err(ArchiveError::InvalidParameter(
                "archive must hold at least one signature with at least one feature".into(),
            ));
        }
        if signature_labels.len() != k || signature_meta.len() != k {
            return Err(ArchiveError::InvalidParameter(format!(
                "matrix has {k} columns but {} labels and {} meta records",
                signature_labels.len(),
                signature_meta.len()
            )));
        }
        for &v in m_matrix.iter() {
            if !v.is_finite() || v < 0.0 {
                return Err(ArchiveError::InvalidParameter(
                    "signatures must be finite and nonnegative".into(),
                ));
            }
        }
        for j in 0..k {
            let norm = m_matrix.column(j).dot(&m_matrix.column(j)).sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(ArchiveError::InvalidParameter(format!(
                    "signature {j} is not unit-norm (|s| = {norm})"
                )));
            }
        }
        let classes: std::collections::BTreeSet<&str> =
            class_set.iter().map(String::as_str).collect();
        if classes.len() != class_set.len() {
            return Err(ArchiveError::InvalidParameter("duplicate class in class set".into()));
        }
        let mut class_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (j, label) in signature_labels.iter().enumerate() {
            if !classes.contains(label.as_str()) {
                return Err(ArchiveError::InvalidParameter(format!(
                    "signature label {label:?} is not in the class set"
                )));
            }
            class_index.entry(label.clone()).or_default().push(j);
        }
        Ok(Self {
            m_matrix,
            signature_labels,
            signature_meta,
            class_set,
            class_index,
            normalization,
            build_config,
        })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.m_matrix
    }

    pub fn feature_count(&self) -> usize {
        self.m_matrix.nrows()
    }

    pub fn signature_count(&self) -> usize {
        self.m_matrix.ncols()
    }

    pub fn signature_labels(&self) -> &[String] {
        &self.signature_labels
    }

    pub fn signature_meta(&self) -> &[SignatureMeta] {
        &self.signature_meta
    }

    pub fn class_set(&self) -> &[String] {
        &self.class_set
    }

    /// Map from class label to the signature columns carrying it.
    pub fn class_index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.class_index
    }

    pub fn normalization(&self) -> Option<&NormalizationParams> {
        self.normalization.as_ref()
    }

    pub fn set_normalization(&mut self, params: Option<NormalizationParams>) {
        self.normalization = params;
    }

    pub fn build_config(&self) -> Option<&BuildConfig> {
        self.build_config.as_ref()
    }
}

/// What became of one cluster at one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClusterOutcome {
    Archived { label: String, signature: usize },
    Recursed { node: usize },
    DiscardedTooSmall,
    DiscardedMaxDepth,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDisposition {
    pub cluster: usize,
    pub size: usize,
    pub labeled: usize,
    pub outcome: ClusterOutcome,
}

/// One recursion node's record in the build trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceNode {
    pub index: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub sample_count: usize,
    pub chosen_k: usize,
    pub effective_k: usize,
    pub unassigned: usize,
    pub rank_report: RankSelectionReport,
    pub clusters: Vec<ClusterDisposition>,
}

/// Full audit record of a build: every node, plus exact sample accounting
/// (`archived + discarded + unassigned = total`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildTrace {
    pub nodes: Vec<TraceNode>,
    pub total_samples: usize,
    pub archived_samples: usize,
    pub discarded_samples: usize,
    pub unassigned_samples: usize,
}

impl BuildTrace {
    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Every sample ends in exactly one terminal bucket.
    pub fn accounting_holds(&self) -> bool {
        self.archived_samples + self.discarded_samples + self.unassigned_samples
            == self.total_samples
    }
}

struct PendingSignature {
    column: Array1<f64>,
    label: String,
    meta: SignatureMeta,
}

struct Builder<'a> {
    dataset: &'a LabeledDataset,
    config: &'a BuildConfig,
    signatures: Vec<PendingSignature>,
    nodes: Vec<TraceNode>,
    archived: usize,
    discarded: usize,
    unassigned: usize,
}

/// Build the signature archive by recursive factorization.
///
/// Recursion under a non-uniform cluster proceeds depth-first in cluster
/// order, so the archive layout is deterministic for a given dataset,
/// config, and seed at any parallelism level (the parallel work lives inside
/// [`select_rank`], which reduces in run order).
pub fn build_archive(
    dataset: &LabeledDataset,
    config: &BuildConfig,
) -> Result<(SignatureArchive, BuildTrace), ArchiveError> {
    config.validate()?;
    dataset
        .matrix()
        .has_positive_entry()
        .then_some(())
        .ok_or_else(|| ArchiveError::DegenerateInput("dataset matrix is all zeros".into()))?;
    if dataset.labeled_count() < 2 {
        return Err(ArchiveError::BuildFailed(
            "need at least 2 labeled samples to anchor uniform clusters".into(),
        ));
    }
    if dataset.class_set().is_empty() {
        return Err(ArchiveError::BuildFailed("dataset has no known classes".into()));
    }

    let mut builder = Builder {
        dataset,
        config,
        signatures: Vec::new(),
        nodes: Vec::new(),
        archived: 0,
        discarded: 0,
        unassigned: 0,
    };
    let all: Vec<usize> = (0..dataset.m()).collect();
    builder.process_node(all, 0, None)?;

    let trace = BuildTrace {
        nodes: builder.nodes,
        total_samples: dataset.m(),
        archived_samples: builder.archived,
        discarded_samples: builder.discarded,
        unassigned_samples: builder.unassigned,
    };
    debug_assert!(trace.accounting_holds());

    if builder.signatures.is_empty() {
        return Err(ArchiveError::BuildFailed(
            "no uniform cluster was found; zero signatures archived".into(),
        ));
    }

    let n = dataset.n();
    let k = builder.signatures.len();
    let mut m_matrix = Array2::<f64>::zeros((n, k));
    let mut labels = Vec::with_capacity(k);
    let mut meta = Vec::with_capacity(k);
    for (j, sig) in builder.signatures.into_iter().enumerate() {
        m_matrix.column_mut(j).assign(&sig.column);
        labels.push(sig.label);
        meta.push(sig.meta);
    }
    let archive = SignatureArchive::new(
        m_matrix,
        labels,
        meta,
        dataset.class_set().to_vec(),
        None,
        Some(config.clone()),
    )?;
    Ok((archive, trace))
}

impl Builder<'_> {
    fn process_node(
        &mut self,
        samples: Vec<usize>,
        depth: usize,
        parent: Option<usize>,
    ) -> Result<usize, ArchiveError> {
        let node_index = self.nodes.len();
        // Reserve the slot so children get consecutive indices in DFS order.
        self.nodes.push(TraceNode {
            index: node_index,
            parent,
            depth,
            sample_count: samples.len(),
            chosen_k: 0,
            effective_k: 0,
            unassigned: 0,
            rank_report: RankSelectionReport {
                per_k: Vec::new(),
                chosen_k: 0,
                selection_rationale: String::new(),
            },
            clusters: Vec::new(),
        });

        let sub = FeatureMatrix::new(self.dataset.matrix().select_columns(&samples))?;
        let node_seed = derive_seed(self.config.rank_config.nmf_seed, &[10, node_index as u64]);
        let mut rank_cfg = self.config.rank_config.clipped_to(sub.n(), sub.m());
        rank_cfg.nmf_seed = node_seed;

        let report = select_rank(&sub, &rank_cfg)?;
        let factorization = nmf_factorize(
            &sub,
            report.chosen_k,
            derive_seed(node_seed, &[11]),
            rank_cfg.nmf_max_iters,
            rank_cfg.nmf_tol,
        )?;
        let assignment = assign_clusters(&factorization.h, self.config.tau)?;
        let sub_labels: Vec<Option<String>> = samples
            .iter()
            .map(|&g| self.dataset.labels()[g].clone())
            .collect();
        let uniformity = check_uniformity(
            &assignment,
            &sub_labels,
            self.config.min_cluster_size,
            self.config.min_labeled_fraction,
        );

        let node_unassigned = assignment.cluster_of.iter().filter(|c| c.is_none()).count();
        self.unassigned += node_unassigned;

        let mut dispositions = Vec::with_capacity(factorization.k);
        for (c, verdict) in uniformity.iter().enumerate() {
            let members: Vec<usize> = (0..samples.len())
                .filter(|&j| assignment.cluster_of[j] == Some(c))
                .collect();
            let size = members.len();
            let labeled = verdict.labeled_count;

            let outcome = if size == 0 {
                ClusterOutcome::Empty
            } else if verdict.is_uniform {
                let label = verdict.majority_label.clone().expect("uniform cluster has a label");
                let column = factorization.w.column(c).to_owned();
                let norm = column.dot(&column).sqrt();
                let mean_activation = members
                    .iter()
                    .map(|&j| assignment.confidence_of[j])
                    .sum::<f64>()
                    / size as f64;
                let signature_index = self.signatures.len();
                self.signatures.push(PendingSignature {
                    column: column / norm,
                    label: label.clone(),
                    meta: SignatureMeta {
                        depth,
                        source_cluster_size: size,
                        mean_activation,
                    },
                });
                self.archived += size;
                ClusterOutcome::Archived {
                    label,
                    signature: signature_index,
                }
            } else if size < self.config.min_cluster_size {
                self.discarded += size;
                ClusterOutcome::DiscardedTooSmall
            } else if depth + 1 > self.config.max_depth {
                self.discarded += size;
                ClusterOutcome::DiscardedMaxDepth
            } else {
                let child_samples: Vec<usize> = members.iter().map(|&j| samples[j]).collect();
                let child = self.process_node(child_samples, depth + 1, Some(node_index))?;
                ClusterOutcome::Recursed { node: child }
            };
            dispositions.push(ClusterDisposition {
                cluster: c,
                size,
                labeled,
                outcome,
            });
        }

        let node = &mut self.nodes[node_index];
        node.chosen_k = report.chosen_k;
        node.effective_k = factorization.k;
        node.unassigned = node_unassigned;
        node.rank_report = report;
        node.clusters = dispositions;
        Ok(node_index)
    }
}
