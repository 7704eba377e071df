//! Labeled latent-signature archives and abstaining classification.
//!
//! `sigarch` factorizes a nonnegative feature matrix hierarchically (NMF with
//! automatic rank selection), collects class-pure latent signatures into a
//! labeled archive, and classifies new samples against that archive with a
//! reject option: a sample is assigned a class label only when a confidence
//! metric clears a threshold, otherwise it is rejected. Rejection is the
//! mechanism that flags novel classes and keeps precision high for rare ones.
//!
//! The pipeline, end to end:
//!
//! 1. [`rank`] — estimate the latent dimension `k` of a matrix from the
//!    stability of factorizations over an ensemble of perturbed copies.
//! 2. [`archive`] — recursively factorize, cluster samples by their dominant
//!    activation, and archive the signatures of class-uniform clusters.
//! 3. [`inference`] — project a new sample onto the archive (NNLS), score its
//!    reconstruction against every signature, and classify or reject using
//!    one of three confidence metrics (projection similarity, ensemble
//!    voting, test-time augmentation).
//! 4. [`eval`] — risk-coverage analysis: selective F1/precision/recall,
//!    rejection rates for seen vs. novel classes, and AURC.
//!
//! [`data`] handles CSV ingestion, z-score outlier clamping, trial sampling
//! (rare-class under-sampling, novel hold-out), and a synthetic-data
//! generator with planted ground truth. [`cli`] wires everything into the
//! `sigarch` binary.
//!
//! See the `examples/` directory for one runnable program per capability;
//! `examples/end_to_end.rs` walks the whole pipeline.

// Validation guards are written `!(x > 0.0)` on purpose: the negated form
// also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod archive;
pub mod cli;
pub mod data;
pub mod eval;
pub mod inference;
pub mod linalg;
pub mod plot;
pub mod rank;
pub mod rng;

pub use archive::{
    assign_clusters, build_archive, check_uniformity, load_archive, save_archive, BuildConfig,
    BuildTrace, ClusterAssignment, LabeledDataset, SignatureArchive,
};
pub use eval::{
    aurc, classification_metrics, risk_coverage_curve, EvalReport, GroundTruthSet,
    NovelAccounting, RiskCoverageCurve,
};
pub use inference::{
    classify_augmented, classify_ensemble, classify_projection, confidence_score,
    score_signatures, AugmentationConfig, Metric, MetricParams, Outcome, Prediction,
    PredictionRecord,
};
pub use linalg::{
    cosine_similarity, nmf_factorize, nnls_solve, reconstruct, Factorization, FeatureMatrix,
    ProjectionResult,
};
pub use rank::{
    cluster_ensemble_signatures, perturb_matrix, select_rank, EnsembleConfig, RankSelectionReport,
};
