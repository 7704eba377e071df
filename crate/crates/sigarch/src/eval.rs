//! Selective-classification evaluation: abstention-aware precision, recall,
//! and F1, rejection rates for seen and novel classes, and risk-coverage
//! analysis with AURC.
//!
//! Coverage is the fraction of samples receiving a non-REJECT prediction;
//! risk is `1 - macro-F1` over the accepted samples. Sweeping the rejection
//! threshold trades coverage against risk; the area under that curve (AURC,
//! lower is better) summarizes the trade-off in a single number.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{Outcome, PredictionRecord};

/// The distinguished ground-truth label for samples of a class absent from
/// training.
pub const NOVEL_MARKER: &str = "NOVEL";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Ground truth for a test set; novel-class samples carry the marker label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSet {
    sample_ids: Vec<String>,
    true_labels: Vec<String>,
    novel_marker: String,
}

impl GroundTruthSet {
    pub fn new(
        sample_ids: Vec<String>,
        true_labels: Vec<String>,
        novel_marker: String,
    ) -> Result<Self, EvalError> {
        if sample_ids.len() != true_labels.len() {
            return Err(EvalError::Alignment(format!(
                "{} ids vs {} labels",
                sample_ids.len(),
                true_labels.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for id in &sample_ids {
            if !seen.insert(id.as_str()) {
                return Err(EvalError::Alignment(format!("duplicate sample id {id:?}")));
            }
        }
        Ok(Self {
            sample_ids,
            true_labels,
            novel_marker,
        })
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn label(&self, i: usize) -> &str {
        &self.true_labels[i]
    }

    pub fn is_novel(&self, i: usize) -> bool {
        self.true_labels[i] == self.novel_marker
    }

    pub fn novel_marker(&self) -> &str {
        &self.novel_marker
    }
}

/// Precision/recall/F1 for one class over the accepted samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Accepted samples whose true label is this class.
    pub support: usize,
}

/// Abstention-aware evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub macro_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub weighted_f1: f64,
    /// Fraction of known-class samples falsely rejected; absent when the
    /// truth holds no known-class samples.
    pub rejection_seen: Option<f64>,
    /// Fraction of novel samples correctly rejected; absent when the truth
    /// holds no novel samples.
    pub rejection_novel: Option<f64>,
    pub coverage: f64,
    pub total: usize,
    pub known_total: usize,
    pub novel_total: usize,
    pub accepted: usize,
}

/// Compute selective metrics over aligned predictions and ground truth.
///
/// F1/precision/recall are computed over the accepted predictions whose true
/// label is a known class; novel samples count only toward coverage and
/// `rejection_novel`. Macro averages run over classes with nonzero support;
/// the weighted average weights by support.
pub fn classification_metrics(
    predictions: &[PredictionRecord],
    truth: &GroundTruthSet,
) -> Result<EvalReport, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::Alignment("no predictions to evaluate".into()));
    }
    let mut by_id: BTreeMap<&str, &PredictionRecord> = BTreeMap::new();
    for record in predictions {
        if by_id.insert(record.sample_id.as_str(), record).is_some() {
            return Err(EvalError::Alignment(format!(
                "duplicate prediction for sample {:?}",
                record.sample_id
            )));
        }
    }
    let truth_ids: BTreeSet<&str> = truth.sample_ids().iter().map(String::as_str).collect();
    for record in predictions {
        if !truth_ids.contains(record.sample_id.as_str()) {
            return Err(EvalError::Alignment(format!(
                "prediction for unknown sample {:?}",
                record.sample_id
            )));
        }
    }
    for id in truth.sample_ids() {
        if !by_id.contains_key(id.as_str()) {
            return Err(EvalError::Alignment(format!(
                "no prediction for sample {id:?}"
            )));
        }
    }

    let total = truth.len();
    let mut known_total = 0usize;
    let mut novel_total = 0usize;
    let mut rejected_known = 0usize;
    let mut rejected_novel = 0usize;
    let mut accepted = 0usize;
    let mut pairs: Vec<(&str, &str)> = Vec::new(); // (truth, predicted) over accepted known

    for i in 0..total {
        let record = by_id[truth.sample_ids()[i].as_str()];
        let is_novel = truth.is_novel(i);
        if is_novel {
            novel_total += 1;
        } else {
            known_total += 1;
        }
        match &record.outcome {
            Outcome::Reject => {
                if is_novel {
                    rejected_novel += 1;
                } else {
                    rejected_known += 1;
                }
            }
            Outcome::Label(pred) => {
                accepted += 1;
                if !is_novel {
                    pairs.push((truth.label(i), pred.as_str()));
                }
            }
        }
    }

    let per_class = confusion_metrics(&pairs);
    let (macro_f1, macro_precision, macro_recall, weighted_f1) = averages(&per_class);

    Ok(EvalReport {
        per_class,
        macro_f1,
        macro_precision,
        macro_recall,
        weighted_f1,
        rejection_seen: (known_total > 0).then(|| rejected_known as f64 / known_total as f64),
        rejection_novel: (novel_total > 0).then(|| rejected_novel as f64 / novel_total as f64),
        coverage: accepted as f64 / total as f64,
        total,
        known_total,
        novel_total,
        accepted,
    })
}

/// Per-class metrics from (truth, predicted) pairs. Pairs with an empty
/// truth label contribute false positives only (novel false accepts).
fn confusion_metrics(pairs: &[(&str, &str)]) -> BTreeMap<String, ClassMetrics> {
    let mut tp: BTreeMap<&str, usize> = BTreeMap::new();
    let mut fp: BTreeMap<&str, usize> = BTreeMap::new();
    let mut support: BTreeMap<&str, usize> = BTreeMap::new();
    for &(truth, pred) in pairs {
        if !truth.is_empty() {
            *support.entry(truth).or_default() += 1;
        }
        if truth == pred {
            *tp.entry(pred).or_default() += 1;
        } else {
            *fp.entry(pred).or_default() += 1;
        }
    }
    let mut classes: BTreeSet<&str> = support.keys().copied().collect();
    classes.extend(fp.keys().copied());
    classes.remove("");

    let mut out = BTreeMap::new();
    for class in classes {
        let tp_c = tp.get(class).copied().unwrap_or(0);
        let fp_c = fp.get(class).copied().unwrap_or(0);
        let support_c = support.get(class).copied().unwrap_or(0);
        let precision = if tp_c + fp_c > 0 {
            tp_c as f64 / (tp_c + fp_c) as f64
        } else {
            0.0
        };
        let recall = if support_c > 0 {
            tp_c as f64 / support_c as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        out.insert(
            class.to_string(),
            ClassMetrics {
                precision,
                recall,
                f1,
                support: support_c,
            },
        );
    }
    out
}

fn averages(per_class: &BTreeMap<String, ClassMetrics>) -> (f64, f64, f64, f64) {
    let supported: Vec<&ClassMetrics> =
        per_class.values().filter(|m| m.support > 0).collect();
    if supported.is_empty() {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let n = supported.len() as f64;
    let macro_f1 = supported.iter().map(|m| m.f1).sum::<f64>() / n;
    let macro_precision = supported.iter().map(|m| m.precision).sum::<f64>() / n;
    let macro_recall = supported.iter().map(|m| m.recall).sum::<f64>() / n;
    let total_support: usize = supported.iter().map(|m| m.support).sum();
    let weighted_f1 = supported
        .iter()
        .map(|m| m.f1 * m.support as f64)
        .sum::<f64>()
        / total_support as f64;
    (macro_f1, macro_precision, macro_recall, weighted_f1)
}

/// How accepted novel samples enter the risk computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NovelAccounting {
    /// An accepted novel sample is a false positive against its predicted
    /// class (inflates that class's precision denominator).
    PenalizePredictedClass,
    /// Accepted novel samples are dropped from the F1 computation.
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcPoint {
    pub threshold: f64,
    pub coverage: f64,
    pub risk: f64,
}

/// An ordered risk-coverage curve with its area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCoverageCurve {
    /// Sorted by coverage ascending.
    pub points: Vec<RcPoint>,
    pub aurc: f64,
}

impl RiskCoverageCurve {
    pub fn from_points(points: Vec<RcPoint>) -> Result<Self, EvalError> {
        if points.len() < 2 {
            return Err(EvalError::InvalidParameter(
                "a curve needs at least 2 points".into(),
            ));
        }
        let mut points = points;
        points.sort_by(|a, b| a.coverage.total_cmp(&b.coverage));
        let aurc = aurc_of_points(&points);
        Ok(Self { points, aurc })
    }

    /// `threshold,coverage,risk` CSV, one row per point.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("threshold,coverage,risk\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.threshold, p.coverage, p.risk);
        }
        out
    }
}

/// Area under the risk-coverage curve by the trapezoidal rule, normalized by
/// the maximum coverage. The curve is extended to coverage 0 at its
/// lowest-coverage risk, so a curve that is uniformly at risk `r` integrates
/// to exactly `r`.
pub fn aurc(curve: &RiskCoverageCurve) -> Result<f64, EvalError> {
    if curve.points.len() < 2 {
        return Err(EvalError::InvalidParameter(
            "AURC needs at least 2 points".into(),
        ));
    }
    let mut points = curve.points.clone();
    points.sort_by(|a, b| a.coverage.total_cmp(&b.coverage));
    Ok(aurc_of_points(&points))
}

fn aurc_of_points(sorted: &[RcPoint]) -> f64 {
    let max_cov = sorted.last().map(|p| p.coverage).unwrap_or(0.0);
    if max_cov <= 0.0 {
        return 0.0;
    }
    let first = &sorted[0];
    let mut area = first.coverage * first.risk; // constant extension to coverage 0
    for pair in sorted.windows(2) {
        let dc = pair[1].coverage - pair[0].coverage;
        area += dc * 0.5 * (pair[0].risk + pair[1].risk);
    }
    (area / max_cov).clamp(0.0, 1.0)
}

/// Sweep rejection thresholds over the confidence distribution and compute
/// the risk-coverage curve.
///
/// `predicted_labels[i]` is the label sample `i` would receive with no
/// rejection; at threshold `t` the sample is accepted when
/// `confidences[i] > t`. Risk at a threshold is `1 - macro-F1` over the
/// accepted samples; thresholds that accept nothing inherit the risk of the
/// smallest non-empty coverage so the curve extends to coverage 0.
pub fn risk_coverage_curve(
    confidences: &[f64],
    predicted_labels: &[String],
    truth: &GroundTruthSet,
    n_points: usize,
    novel_accounting: NovelAccounting,
) -> Result<RiskCoverageCurve, EvalError> {
    let total = truth.len();
    if confidences.len() != total || predicted_labels.len() != total {
        return Err(EvalError::Alignment(format!(
            "{} confidences / {} labels vs {} truth samples",
            confidences.len(),
            predicted_labels.len(),
            total
        )));
    }
    if total == 0 {
        return Err(EvalError::Alignment("empty truth set".into()));
    }
    if n_points < 2 {
        return Err(EvalError::InvalidParameter("n_points must be >= 2".into()));
    }
    for &c in confidences {
        if !(0.0..=1.0).contains(&c) {
            return Err(EvalError::InvalidParameter(format!(
                "confidence {c} outside [0, 1]"
            )));
        }
    }

    let mut thresholds: Vec<f64> = confidences.to_vec();
    thresholds.push(0.0);
    thresholds.push(1.0);
    thresholds.sort_by(|a, b| a.total_cmp(b));
    thresholds.dedup();
    if thresholds.len() > n_points {
        // quantile subsample, always keeping the endpoints
        let last = thresholds.len() - 1;
        let picked: Vec<f64> = (0..n_points)
            .map(|i| thresholds[(i * last + (n_points - 1) / 2) / (n_points - 1)])
            .collect();
        thresholds = picked;
        thresholds.dedup();
    }

    // descending threshold = ascending coverage
    let mut points: Vec<(f64, f64, Option<f64>)> = Vec::with_capacity(thresholds.len());
    for &t in thresholds.iter().rev() {
        let accepted: Vec<usize> = (0..total).filter(|&i| confidences[i] > t).collect();
        let coverage = accepted.len() as f64 / total as f64;
        let risk = if accepted.is_empty() {
            None
        } else {
            let mut pairs: Vec<(&str, &str)> = Vec::with_capacity(accepted.len());
            let mut any = false;
            for &i in &accepted {
                if truth.is_novel(i) {
                    if novel_accounting == NovelAccounting::PenalizePredictedClass {
                        pairs.push(("", predicted_labels[i].as_str()));
                        any = true;
                    }
                } else {
                    pairs.push((truth.label(i), predicted_labels[i].as_str()));
                    any = true;
                }
            }
            if !any {
                None
            } else {
                let per_class = confusion_metrics(&pairs);
                let (macro_f1, _, _, _) = averages(&per_class);
                Some(1.0 - macro_f1)
            }
        };
        points.push((t, coverage, risk));
    }

    // coverage must be non-increasing in the threshold
    debug_assert!(points
        .windows(2)
        .all(|pair| pair[0].1 <= pair[1].1));

    let fill = points
        .iter()
        .find_map(|&(_, _, risk)| risk)
        .unwrap_or(0.0);
    let mut filled: Vec<RcPoint> = points
        .into_iter()
        .map(|(threshold, coverage, risk)| RcPoint {
            threshold,
            coverage,
            risk: risk.unwrap_or(fill),
        })
        .collect();
    filled.sort_by(|a, b| a.coverage.total_cmp(&b.coverage));
    let aurc = aurc_of_points(&filled);
    Ok(RiskCoverageCurve {
        points: filled,
        aurc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::Metric;

    fn record(id: &str, outcome: Outcome, confidence: f64) -> PredictionRecord {
        PredictionRecord {
            sample_id: id.into(),
            metric: Metric::ProjectionSimilarity,
            outcome,
            confidence,
            detail: None,
        }
    }

    fn truth(entries: &[(&str, &str)]) -> GroundTruthSet {
        GroundTruthSet::new(
            entries.iter().map(|(id, _)| id.to_string()).collect(),
            entries.iter().map(|(_, l)| l.to_string()).collect(),
            NOVEL_MARKER.to_string(),
        )
        .unwrap()
    }

    #[test]
    fn perfect_predictions_score_one() {
        let t = truth(&[("a", "X"), ("b", "X"), ("c", "Y")]);
        let preds = vec![
            record("a", Outcome::Label("X".into()), 0.9),
            record("b", Outcome::Label("X".into()), 0.9),
            record("c", Outcome::Label("Y".into()), 0.9),
        ];
        let report = classification_metrics(&preds, &t).unwrap();
        assert_eq!(report.macro_f1, 1.0);
        assert_eq!(report.rejection_seen, Some(0.0));
        assert_eq!(report.rejection_novel, None);
        assert_eq!(report.coverage, 1.0);
    }

    #[test]
    fn total_abstention_reports_empty_classes() {
        let t = truth(&[("a", "X"), ("b", "Y"), ("n", NOVEL_MARKER)]);
        let preds = vec![
            record("a", Outcome::Reject, 0.1),
            record("b", Outcome::Reject, 0.1),
            record("n", Outcome::Reject, 0.1),
        ];
        let report = classification_metrics(&preds, &t).unwrap();
        assert_eq!(report.coverage, 0.0);
        assert_eq!(report.rejection_seen, Some(1.0));
        assert_eq!(report.rejection_novel, Some(1.0));
        assert!(report.per_class.is_empty());
        assert_eq!(report.macro_f1, 0.0);
    }

    /// The hand-worked fixture: 4 known samples (2xA, 2xB) predicted
    /// [A, REJECT, B, A] plus 2 NOVEL samples, both rejected.
    #[test]
    fn hand_worked_confusion_fixture() {
        let t = truth(&[
            ("s1", "A"),
            ("s2", "A"),
            ("s3", "B"),
            ("s4", "B"),
            ("n1", NOVEL_MARKER),
            ("n2", NOVEL_MARKER),
        ]);
        let preds = vec![
            record("s1", Outcome::Label("A".into()), 0.9),
            record("s2", Outcome::Reject, 0.2),
            record("s3", Outcome::Label("B".into()), 0.8),
            record("s4", Outcome::Label("A".into()), 0.7),
            record("n1", Outcome::Reject, 0.1),
            record("n2", Outcome::Reject, 0.1),
        ];
        let report = classification_metrics(&preds, &t).unwrap();
        assert!((report.coverage - 0.5).abs() < 1e-15);
        assert_eq!(report.rejection_seen, Some(0.25));
        assert_eq!(report.rejection_novel, Some(1.0));

        let a = &report.per_class["A"];
        assert!((a.precision - 0.5).abs() < 1e-15);
        assert!((a.recall - 1.0).abs() < 1e-15);
        assert_eq!(a.support, 1);
        let b = &report.per_class["B"];
        assert!((b.precision - 1.0).abs() < 1e-15);
        assert!((b.recall - 0.5).abs() < 1e-15);
        assert_eq!(b.support, 2);

        let f_a = 2.0 * 0.5 * 1.0 / 1.5;
        let f_b = 2.0 * 1.0 * 0.5 / 1.5;
        assert!((report.macro_f1 - (f_a + f_b) / 2.0).abs() < 1e-15);
        assert!((report.weighted_f1 - (f_a + 2.0 * f_b) / 3.0).abs() < 1e-15);
        assert!((report.macro_precision - 0.75).abs() < 1e-15);
        assert!((report.macro_recall - 0.75).abs() < 1e-15);
    }

    #[test]
    fn misaligned_ids_are_errors() {
        let t = truth(&[("a", "X")]);
        let preds = vec![record("zz", Outcome::Label("X".into()), 0.9)];
        match classification_metrics(&preds, &t) {
            Err(EvalError::Alignment(msg)) => assert!(msg.contains("zz"), "{msg}"),
            other => panic!("expected alignment error, got {other:?}"),
        }
        assert!(classification_metrics(&[], &t).is_err());

        let t2 = truth(&[("a", "X"), ("b", "X")]);
        let preds = vec![record("a", Outcome::Label("X".into()), 0.9)];
        assert!(classification_metrics(&preds, &t2).is_err());
    }

    #[test]
    fn rejection_seen_accounting_identity() {
        let mut rng = crate::rng::seeded_rng(42);
        use rand::Rng;
        for _ in 0..50 {
            let n = rng.random_range(2..40);
            let entries: Vec<(String, String)> = (0..n)
                .map(|i| (format!("s{i}"), "X".to_string()))
                .collect();
            let t = GroundTruthSet::new(
                entries.iter().map(|(a, _)| a.clone()).collect(),
                entries.iter().map(|(_, b)| b.clone()).collect(),
                NOVEL_MARKER.into(),
            )
            .unwrap();
            let preds: Vec<PredictionRecord> = (0..n)
                .map(|i| {
                    if rng.random::<f64>() < 0.4 {
                        record(&format!("s{i}"), Outcome::Reject, 0.1)
                    } else {
                        record(&format!("s{i}"), Outcome::Label("X".into()), 0.9)
                    }
                })
                .collect();
            let report = classification_metrics(&preds, &t).unwrap();
            let accepted_known_fraction =
                (report.accepted as f64) / (report.known_total as f64);
            let sum = report.rejection_seen.unwrap() + accepted_known_fraction;
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    /// Independent brute-force implementation used as the oracle for the
    /// non-abstaining case.
    fn brute_force_macro_f1(truths: &[&str], preds: &[&str]) -> f64 {
        let classes: BTreeSet<&str> = truths.iter().copied().collect();
        let mut f1s = Vec::new();
        for class in classes {
            let mut tp = 0usize;
            let mut fp = 0usize;
            let mut fn_ = 0usize;
            for (&t, &p) in truths.iter().zip(preds) {
                if p == class && t == class {
                    tp += 1;
                } else if p == class && t != class {
                    fp += 1;
                } else if p != class && t == class {
                    fn_ += 1;
                }
            }
            let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
            let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            f1s.push(f1);
        }
        f1s.iter().sum::<f64>() / f1s.len() as f64
    }

    #[test]
    fn matches_brute_force_confusion_on_random_sets() {
        let mut rng = crate::rng::seeded_rng(7);
        use rand::Rng;
        let classes = ["A", "B", "C", "D"];
        for _ in 0..200 {
            let n = rng.random_range(4..60);
            let truths: Vec<&str> =
                (0..n).map(|_| classes[rng.random_range(0..4)]).collect();
            let preds: Vec<&str> =
                (0..n).map(|_| classes[rng.random_range(0..4)]).collect();

            let t = GroundTruthSet::new(
                (0..n).map(|i| format!("s{i}")).collect(),
                truths.iter().map(|s| s.to_string()).collect(),
                NOVEL_MARKER.into(),
            )
            .unwrap();
            let records: Vec<PredictionRecord> = (0..n)
                .map(|i| record(&format!("s{i}"), Outcome::Label(preds[i].into()), 0.9))
                .collect();
            let report = classification_metrics(&records, &t).unwrap();
            let expected = brute_force_macro_f1(&truths, &preds);
            assert!(
                (report.macro_f1 - expected).abs() < 1e-12,
                "macro f1 {} vs brute force {expected}",
                report.macro_f1
            );
        }
    }

    // ------------------------------------------------------------- curves

    #[test]
    fn aurc_triangle_and_rectangle_are_exact() {
        let triangle = RiskCoverageCurve::from_points(vec![
            RcPoint { threshold: 1.0, coverage: 0.0, risk: 0.0 },
            RcPoint { threshold: 0.0, coverage: 1.0, risk: 1.0 },
        ])
        .unwrap();
        assert_eq!(aurc(&triangle).unwrap(), 0.5);

        let rectangle = RiskCoverageCurve::from_points(vec![
            RcPoint { threshold: 1.0, coverage: 0.0, risk: 0.2 },
            RcPoint { threshold: 0.0, coverage: 1.0, risk: 0.2 },
        ])
        .unwrap();
        assert!((aurc(&rectangle).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn aurc_requires_two_points() {
        let one = RiskCoverageCurve {
            points: vec![RcPoint { threshold: 0.0, coverage: 1.0, risk: 0.0 }],
            aurc: 0.0,
        };
        assert!(matches!(aurc(&one), Err(EvalError::InvalidParameter(_))));
    }

    #[test]
    fn aurc_is_invariant_to_duplicated_points() {
        let base = RiskCoverageCurve::from_points(vec![
            RcPoint { threshold: 0.9, coverage: 0.2, risk: 0.1 },
            RcPoint { threshold: 0.5, coverage: 0.6, risk: 0.3 },
            RcPoint { threshold: 0.1, coverage: 1.0, risk: 0.5 },
        ])
        .unwrap();
        let mut dup_points = base.points.clone();
        dup_points.push(base.points[1]);
        dup_points.push(base.points[0]);
        let dup = RiskCoverageCurve::from_points(dup_points).unwrap();
        assert!((base.aurc - dup.aurc).abs() < 1e-15);
    }

    /// Hand-integrated 4-sample fixture. Confidences [0.9, 0.8, 0.6, 0.4]
    /// with correctness [T, T, F, T] against a single class X:
    ///
    /// - t >= 0.9 : coverage 0,    risk extends from the first point (0)
    /// - t = 0.8  : coverage 1/4,  accepted {s1} all correct, risk 0
    /// - t = 0.6  : coverage 1/2,  accepted {s1, s2}, risk 0
    /// - t = 0.4  : coverage 3/4,  accepted {s1, s2, s3}: precision_X = 1,
    ///   recall_X = 2/3, f1 = 4/5, risk = 1/5
    /// - t = 0    : coverage 1,    precision 1, recall 3/4, f1 = 6/7, risk 1/7
    ///
    /// AURC = [0.5..0.75]: (0 + 1/5)/2 * 1/4 = 1/40
    ///      + [0.75..1.0]: (1/5 + 1/7)/2 * 1/4 = 3/70
    ///      = 7/280 + 12/280 = 19/280
    #[test]
    fn hand_integrated_fixture_reproduces_aurc_exactly() {
        let t = truth(&[("s1", "X"), ("s2", "X"), ("s3", "X"), ("s4", "X")]);
        let confidences = vec![0.9, 0.8, 0.6, 0.4];
        let labels: Vec<String> = vec!["X".into(), "X".into(), "Y".into(), "X".into()];
        let curve = risk_coverage_curve(
            &confidences,
            &labels,
            &t,
            512,
            NovelAccounting::PenalizePredictedClass,
        )
        .unwrap();
        let expected = 19.0 / 280.0;
        assert!(
            (curve.aurc - expected).abs() < 1e-12,
            "aurc {} expected {expected}",
            curve.aurc
        );
        // against the standalone integrator too
        assert!((aurc(&curve).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn all_correct_curve_has_zero_aurc() {
        let t = truth(&[("a", "X"), ("b", "X"), ("c", "Y")]);
        let confidences = vec![0.9, 0.5, 0.7];
        let labels: Vec<String> = vec!["X".into(), "X".into(), "Y".into()];
        let curve = risk_coverage_curve(
            &confidences,
            &labels,
            &t,
            512,
            NovelAccounting::PenalizePredictedClass,
        )
        .unwrap();
        assert_eq!(curve.aurc, 0.0);
        for p in &curve.points {
            assert_eq!(p.risk, 0.0);
        }
    }

    #[test]
    fn all_wrong_curve_has_unit_aurc() {
        let t = truth(&[("a", "X"), ("b", "X"), ("c", "Y")]);
        let confidences = vec![0.9, 0.5, 0.7];
        let labels: Vec<String> = vec!["Y".into(), "Y".into(), "X".into()];
        let curve = risk_coverage_curve(
            &confidences,
            &labels,
            &t,
            512,
            NovelAccounting::PenalizePredictedClass,
        )
        .unwrap();
        assert_eq!(curve.aurc, 1.0);
        for p in &curve.points {
            if p.coverage > 0.0 {
                assert_eq!(p.risk, 1.0);
            }
        }
    }

    #[test]
    fn coverage_is_monotone_in_threshold() {
        let mut rng = crate::rng::seeded_rng(15);
        use rand::Rng;
        let n = 60;
        let t = GroundTruthSet::new(
            (0..n).map(|i| format!("s{i}")).collect(),
            (0..n)
                .map(|i| if i % 5 == 0 { NOVEL_MARKER.into() } else { "A".to_string() })
                .collect(),
            NOVEL_MARKER.into(),
        )
        .unwrap();
        let confidences: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let labels: Vec<String> = (0..n)
            .map(|_| if rng.random::<f64>() < 0.8 { "A".into() } else { "B".into() })
            .collect();
        let curve = risk_coverage_curve(
            &confidences,
            &labels,
            &t,
            64,
            NovelAccounting::PenalizePredictedClass,
        )
        .unwrap();
        for pair in curve.points.windows(2) {
            assert!(pair[0].threshold >= pair[1].threshold);
            assert!(pair[0].coverage <= pair[1].coverage);
        }
        assert!((0.0..=1.0).contains(&curve.aurc));
    }

    #[test]
    fn novel_accounting_modes_differ_when_novels_leak() {
        let t = truth(&[("a", "X"), ("b", "X"), ("n1", NOVEL_MARKER), ("n2", NOVEL_MARKER)]);
        let confidences = vec![0.9, 0.9, 0.9, 0.9];
        let labels: Vec<String> = vec!["X".into(), "X".into(), "X".into(), "X".into()];
        let penalized = risk_coverage_curve(
            &confidences,
            &labels,
            &t,
            16,
            NovelAccounting::PenalizePredictedClass,
        )
        .unwrap();
        let excluded =
            risk_coverage_curve(&confidences, &labels, &t, 16, NovelAccounting::Exclude).unwrap();
        assert!(penalized.aurc > excluded.aurc);
        assert_eq!(excluded.aurc, 0.0);
    }

    #[test]
    fn curve_csv_is_stable() {
        let curve = RiskCoverageCurve::from_points(vec![
            RcPoint { threshold: 1.0, coverage: 0.0, risk: 0.0 },
            RcPoint { threshold: 0.0, coverage: 1.0, risk: 0.25 },
        ])
        .unwrap();
        let csv = curve.to_csv_string();
        assert_eq!(csv, "threshold,coverage,risk\n1,0,0\n0,1,0.25\n");
    }
}
