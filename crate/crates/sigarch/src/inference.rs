//! Reject-option classification against a signature archive.
//!
//! A new sample is projected onto the archive with NNLS and reconstructed;
//! cosine similarity between each signature and the reconstruction gives the
//! per-signature score vector `S`. Three confidence metrics turn `S` into a
//! labeled prediction, and every metric abstains (REJECT) when its
//! confidence fails to clear the decision threshold:
//!
//! - projection similarity: the best single signature score;
//! - ensemble voting: per-class vote counts over a second threshold,
//!   normalized by how many signatures each class owns;
//! - data augmentation: mean top score across seeded perturbations of the
//!   input, with the modal top label.
//!
//! All entry points are pure over an immutable archive and safe to call
//! concurrently; augmentation parallelizes internally with a seeded,
//! order-stable reduction.

use std::collections::BTreeMap;

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::SignatureArchive;
use crate::linalg::{cosine_similarity, nnls_solve, LinalgError};
use crate::rng::{derive_seed, seeded_rng, standard_normal};

/// KKT tolerance for the inference-time NNLS projections.
pub const DEFAULT_NNLS_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Which confidence metric produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ProjectionSimilarity,
    EnsembleVoting,
    DataAugmentation,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "projection_similarity" | "projection" => Ok(Self::ProjectionSimilarity),
            "ensemble_voting" | "ensemble" => Ok(Self::EnsembleVoting),
            "data_augmentation" | "augmentation" => Ok(Self::DataAugmentation),
            other => Err(format!(
                "unknown metric {other:?} (expected projection_similarity, \
                 ensemble_voting, or data_augmentation)"
            )),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::ProjectionSimilarity => "projection_similarity",
            Self::EnsembleVoting => "ensemble_voting",
            Self::DataAugmentation => "data_augmentation",
        };
        f.write_str(s)
    }
}

/// A class label or the abstention marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Label(String),
    Reject,
}

impl Outcome {
    pub fn is_reject(&self) -> bool {
        matches!(self, Outcome::Reject)
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Outcome::Label(l) => Some(l),
            Outcome::Reject => None,
        }
    }
}

impl Serialize for Outcome {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Outcome::Label(l) => serializer.serialize_str(l),
            Outcome::Reject => serializer.serialize_str("REJECT"),
        }
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(if s == "REJECT" {
            Outcome::Reject
        } else {
            Outcome::Label(s)
        })
    }
}

/// Raw and normalized votes for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteDetail {
    pub raw: usize,
    pub normalized: f64,
}

/// Per-metric diagnostics carried alongside a prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDetail {
    /// Cosine similarity of each archive signature to the reconstruction.
    pub signature_scores: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub votes: Option<BTreeMap<String, VoteDetail>>,
    /// Top-signature similarity per perturbation (augmentation metric only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation_scores: Option<Vec<f64>>,
}

/// A label-or-reject decision with its confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub outcome: Outcome,
    pub confidence: f64,
    pub metric: Metric,
    pub detail: PredictionDetail,
}

/// A prediction bound to a sample id; the JSON-lines record emitted by the
/// CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub metric: Metric,
    pub outcome: Outcome,
    pub confidence: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<PredictionDetail>,
}

/// Test-time augmentation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationConfig {
    /// Perturbations per bootstrap round.
    pub p: usize,
    /// L2 norm of the additive perturbation.
    pub epsilon_norm: f64,
    pub n_bootstrap: usize,
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            p: 10,
            epsilon_norm: 0.015,
            n_bootstrap: 50,
            seed: 0,
        }
    }
}

/// Metric choice plus its parameters, for threshold-free scoring.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricParams {
    Projection,
    Ensemble { vote_threshold: f64 },
    Augmentation(AugmentationConfig),
}

impl MetricParams {
    pub fn metric(&self) -> Metric {
        match self {
            Self::Projection => Metric::ProjectionSimilarity,
            Self::Ensemble { .. } => Metric::EnsembleVoting,
            Self::Augmentation(_) => Metric::DataAugmentation,
        }
    }
}

fn check_dims(archive: &SignatureArchive, x: &ArrayView1<f64>) -> Result<(), InferenceError> {
    if x.len() != archive.feature_count() {
        return Err(InferenceError::DimensionMismatch {
            expected: archive.feature_count(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Score a sample against every signature: NNLS projection, reconstruction,
/// then cosine similarity of each signature to the reconstruction. Scores
/// lie in [0, 1].
pub fn score_signatures(
    archive: &SignatureArchive,
    x: ArrayView1<f64>,
) -> Result<Array1<f64>, InferenceError> {
    check_dims(archive, &x)?;
    let projection = nnls_solve(archive.matrix().view(), x, DEFAULT_NNLS_TOL)?;
    let recon = projection.reconstruction.view();
    let mut scores = Array1::<f64>::zeros(archive.signature_count());
    for j in 0..archive.signature_count() {
        scores[j] = cosine_similarity(archive.matrix().column(j), recon)?.max(0.0);
    }
    Ok(scores)
}

fn argmax(scores: &Array1<f64>) -> usize {
    let mut best = 0usize;
    for j in 1..scores.len() {
        if scores[j] > scores[best] {
            best = j;
        }
    }
    best
}

pub(crate) fn decide_projection(
    scores: &Array1<f64>,
    labels: &[String],
    threshold: f64,
) -> (Outcome, f64) {
    let j = argmax(scores);
    let confidence = scores[j];
    let outcome = if confidence > threshold {
        Outcome::Label(labels[j].clone())
    } else {
        Outcome::Reject
    };
    (outcome, confidence)
}

/// Classify by the single most similar signature.
pub fn classify_projection(
    archive: &SignatureArchive,
    x: ArrayView1<f64>,
    threshold: f64,
) -> Result<Prediction, InferenceError> {
    let scores = score_signatures(archive, x)?;
    let (outcome, confidence) = decide_projection(&scores, archive.signature_labels(), threshold);
    Ok(Prediction {
        outcome,
        confidence,
        metric: Metric::ProjectionSimilarity,
        detail: PredictionDetail {
            signature_scores: scores.to_vec(),
            votes: None,
            perturbation_scores: None,
        },
    })
}

pub(crate) fn tally_votes(
    archive: &SignatureArchive,
    scores: &Array1<f64>,
    vote_threshold: f64,
) -> BTreeMap<String, VoteDetail> {
    let mut votes = BTreeMap::new();
    for (class, members) in archive.class_index() {
        let raw = members.iter().filter(|&&j| scores[j] > vote_threshold).count();
        votes.insert(
            class.clone(),
            VoteDetail {
                raw,
                normalized: raw as f64 / members.len() as f64,
            },
        );
    }
    votes
}

pub(crate) fn decide_ensemble(
    archive: &SignatureArchive,
    scores: &Array1<f64>,
    votes: &BTreeMap<String, VoteDetail>,
    threshold: f64,
) -> (Outcome, f64) {
    let confidence = votes
        .values()
        .map(|v| v.normalized)
        .fold(0.0f64, f64::max);
    if !(confidence > threshold) || confidence == 0.0 {
        return (Outcome::Reject, confidence);
    }
    // Ties on normalized votes break by the best per-signature similarity
    // within the tied classes, then by class-set order.
    let mut winner: Option<(&str, f64)> = None;
    for class in archive.class_set() {
        let Some(v) = votes.get(class) else { continue };
        if v.normalized != confidence {
            continue;
        }
        let best_sim = archive.class_index()[class]
            .iter()
            .map(|&j| scores[j])
            .fold(0.0f64, f64::max);
        match winner {
            Some((_, sim)) if best_sim <= sim => {}
            _ => winner = Some((class, best_sim)),
        }
    }
    match winner {
        Some((class, _)) => (Outcome::Label(class.to_string()), confidence),
        None => (Outcome::Reject, confidence),
    }
}

/// Classify by normalized per-class votes: class `C` receives one vote for
/// each of its signatures scoring above `vote_threshold`, normalized by the
/// number of signatures `C` owns.
pub fn classify_ensemble(
    archive: &SignatureArchive,
    x: ArrayView1<f64>,
    vote_threshold: f64,
    threshold: f64,
) -> Result<Prediction, InferenceError> {
    let scores = score_signatures(archive, x)?;
    let votes = tally_votes(archive, &scores, vote_threshold);
    let (outcome, confidence) = decide_ensemble(archive, &scores, &votes, threshold);
    Ok(Prediction {
        outcome,
        confidence,
        metric: Metric::EnsembleVoting,
        detail: PredictionDetail {
            signature_scores: scores.to_vec(),
            votes: Some(votes),
            perturbation_scores: None,
        },
    })
}

/// Classify by confidence stability under perturbation: draw
/// `p * n_bootstrap` perturbations of `x` uniformly on the sphere of radius
/// `epsilon_norm` (clamped to stay nonnegative), score each, and average the
/// top-signature similarities. The label is the modal top label across
/// perturbations.
pub fn classify_augmented(
    archive: &SignatureArchive,
    x: ArrayView1<f64>,
    aug: &AugmentationConfig,
    threshold: f64,
) -> Result<Prediction, InferenceError> {
    check_dims(archive, &x)?;
    if !(aug.epsilon_norm > 0.0) {
        return Err(InferenceError::InvalidParameter(
            "epsilon_norm must be > 0".into(),
        ));
    }
    if aug.p == 0 || aug.n_bootstrap == 0 {
        return Err(InferenceError::InvalidParameter(
            "p and n_bootstrap must be >= 1".into(),
        ));
    }

    let total = aug.p * aug.n_bootstrap;
    if x.dot(&x) == 0.0 {
        // An epsilon-ball around zero carries no signal, only the noise
        // direction; a zero sample reads as zero confidence under every
        // metric.
        return Ok(Prediction {
            outcome: Outcome::Reject,
            confidence: 0.0,
            metric: Metric::DataAugmentation,
            detail: PredictionDetail {
                signature_scores: vec![0.0; archive.signature_count()],
                votes: None,
                perturbation_scores: Some(vec![0.0; total]),
            },
        });
    }
    let outcomes: Vec<Result<(usize, f64), InferenceError>> = (0..total)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded_rng(derive_seed(aug.seed, &[t as u64]));
            let mut direction = Array1::<f64>::zeros(x.len());
            loop {
                for v in direction.iter_mut() {
                    *v = standard_normal(&mut rng);
                }
                let norm = direction.dot(&direction).sqrt();
                if norm > 0.0 {
                    direction.mapv_inplace(|v| v / norm * aug.epsilon_norm);
                    break;
                }
            }
            let perturbed = ndarray::Zip::from(&x)
                .and(&direction)
                .map_collect(|&a, &e| (a + e).max(0.0));
            let scores = score_signatures(archive, perturbed.view())?;
            let top = argmax(&scores);
            Ok((top, scores[top]))
        })
        .collect();

    let mut top_scores = Vec::with_capacity(total);
    let mut per_label: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for outcome in outcomes {
        let (top, score) = outcome?;
        top_scores.push(score);
        let label = archive.signature_labels()[top].as_str();
        let entry = per_label.entry(label).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += score;
    }
    let confidence = top_scores.iter().sum::<f64>() / total as f64;

    // Modal label; count ties break by accumulated similarity, then by
    // class-set order.
    let mut modal: Option<(&str, usize, f64)> = None;
    for class in archive.class_set() {
        let Some(&(count, mass)) = per_label.get(class.as_str()) else {
            continue;
        };
        let better = match modal {
            None => true,
            Some((_, c, m)) => count > c || (count == c && mass > m),
        };
        if better {
            modal = Some((class, count, mass));
        }
    }

    let outcome = match modal {
        Some((label, _, _)) if confidence > threshold => Outcome::Label(label.to_string()),
        _ => Outcome::Reject,
    };
    let base_scores = score_signatures(archive, x)?;
    Ok(Prediction {
        outcome,
        confidence,
        metric: Metric::DataAugmentation,
        detail: PredictionDetail {
            signature_scores: base_scores.to_vec(),
            votes: None,
            perturbation_scores: Some(top_scores),
        },
    })
}

/// The metric's confidence for a sample, with no rejection threshold
/// applied; identical to the `confidence` field the corresponding
/// `classify_*` call would produce.
pub fn confidence_score(
    archive: &SignatureArchive,
    x: ArrayView1<f64>,
    params: &MetricParams,
) -> Result<f64, InferenceError> {
    let prediction = match params {
        MetricParams::Projection => classify_projection(archive, x, 0.0)?,
        MetricParams::Ensemble { vote_threshold } => {
            classify_ensemble(archive, x, *vote_threshold, 0.0)?
        }
        MetricParams::Augmentation(aug) => classify_augmented(archive, x, aug, 0.0)?,
    };
    Ok(prediction.confidence)
}

/// Classify with the given metric at the given threshold.
pub fn classify(
    archive: &SignatureArchive,
    x: ArrayView1<f64>,
    params: &MetricParams,
    threshold: f64,
) -> Result<Prediction, InferenceError> {
    match params {
        MetricParams::Projection => classify_projection(archive, x, threshold),
        MetricParams::Ensemble { vote_threshold } => {
            classify_ensemble(archive, x, *vote_threshold, threshold)
        }
        MetricParams::Augmentation(aug) => classify_augmented(archive, x, aug, threshold),
    }
}
