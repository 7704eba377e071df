//! The full pipeline as a library program: synthesize a labeled corpus,
//! sample a trial with rare-family under-sampling and a novel hold-out,
//! build the archive, classify the test set with a reject option, and
//! evaluate selective metrics plus the risk-coverage curve.
//!
//! This mirrors what `sigarch synth/build/classify/evaluate/rc-curve` do
//! from the command line.
//!
//! ```bash
//! cargo run --example end_to_end
//! ```

use ndarray::Array1;
use sigarch::archive::{build_archive, BuildConfig};
use sigarch::data::{
    dataset_from_table, generate_synthetic, sample_trial, FamilySpec, RareFamily, TrialConfig,
};
use sigarch::eval::{classification_metrics, risk_coverage_curve, NovelAccounting};
use sigarch::inference::{classify, Metric, MetricParams, PredictionRecord};
use sigarch::rank::EnsembleConfig;

fn main() {
    // 1. synthesize five families; f4 will play the novel class
    let mk = |label: &str, n: usize| FamilySpec {
        label: label.into(),
        n_signatures: 1,
        n_samples: n,
    };
    let families = [
        mk("f0", 300),
        mk("f1", 300),
        mk("f2", 400),
        mk("f3", 400),
        mk("f4", 300),
    ];
    let (table, _) = generate_synthetic(48, &families, 0.01, Some("f4"), 4001).unwrap();
    println!("synthesized {} samples x {} features", table.len(), table.n_features());

    // 2. trial protocol: under-sample f2 to 10% and f3 to 5%, hold f4 out
    let trial_cfg = TrialConfig {
        families: ["f0", "f1", "f2", "f3", "f4"].iter().map(|s| s.to_string()).collect(),
        novel_family: "f4".into(),
        rare_families: vec![
            RareFamily { label: "f2".into(), keep_fraction: 0.10 },
            RareFamily { label: "f3".into(), keep_fraction: 0.05 },
        ],
        test_fraction: 0.2,
        n_trials: 10,
        seed: 4001 ^ 0xABC,
    };
    let split = sample_trial(&table, &trial_cfg, 1).unwrap();
    println!("trial manifest:");
    for (family, counts) in &split.manifest.families {
        println!("  {family}: train {} / test {}", counts.train, counts.test);
    }

    // 3. build the archive on the training split
    let train = dataset_from_table(&split.train).unwrap();
    let config = BuildConfig {
        tau: 0.45,
        max_depth: 3,
        min_cluster_size: 6,
        min_labeled_fraction: 0.3,
        rank_config: EnsembleConfig {
            k_min: 2,
            k_max: 6,
            n_perturbations: 10,
            nmf_seed: 4001 ^ 0xDEF,
            nmf_max_iters: 400,
            nmf_tol: 1e-7,
            ..EnsembleConfig::default()
        },
    };
    let (archive, trace) = build_archive(&train, &config).unwrap();
    println!(
        "\narchive: {} signatures across {:?} (depth {}, {} archived / {} discarded / {} unassigned)",
        archive.signature_count(),
        archive.class_index().keys().collect::<Vec<_>>(),
        trace.max_depth(),
        trace.archived_samples,
        trace.discarded_samples,
        trace.unassigned_samples
    );

    // 4. classify the held-out test set with ensemble voting + reject option
    let params = MetricParams::Ensemble { vote_threshold: 0.98 };
    let threshold = 0.5;
    let records: Vec<PredictionRecord> = split
        .test
        .rows()
        .iter()
        .map(|row| {
            let x = Array1::from_vec(row.values.clone());
            let p = classify(&archive, x.view(), &params, threshold).unwrap();
            PredictionRecord {
                sample_id: row.sample_id.clone(),
                metric: Metric::EnsembleVoting,
                outcome: p.outcome,
                confidence: p.confidence,
                detail: None,
            }
        })
        .collect();

    // 5. selective evaluation against the trial's ground truth
    let report = classification_metrics(&records, &split.truth).unwrap();
    println!("\nselective metrics at threshold {threshold}:");
    println!(
        "  macro F1 {:.4}  precision {:.4}  recall {:.4}",
        report.macro_f1, report.macro_precision, report.macro_recall
    );
    println!(
        "  coverage {:.4}  rejection_seen {:.2}%  rejection_novel {:.2}%",
        report.coverage,
        report.rejection_seen.unwrap_or(0.0) * 100.0,
        report.rejection_novel.unwrap_or(0.0) * 100.0
    );
    for (class, m) in &report.per_class {
        println!(
            "  {class}: f1 {:.4} precision {:.4} recall {:.4} (support {})",
            m.f1, m.precision, m.recall, m.support
        );
    }

    // 6. risk-coverage curve over the whole confidence range
    let mut confidences = Vec::new();
    let mut labels = Vec::new();
    for row in split.test.rows() {
        let x = Array1::from_vec(row.values.clone());
        let p = classify(&archive, x.view(), &params, -1.0).unwrap();
        confidences.push(p.confidence);
        labels.push(p.outcome.label().unwrap_or("NOVEL").to_string());
    }
    let curve = risk_coverage_curve(
        &confidences,
        &labels,
        &split.truth,
        256,
        NovelAccounting::PenalizePredictedClass,
    )
    .unwrap();
    println!("\nrisk-coverage: AURC {:.4} over {} points", curve.aurc, curve.points.len());
}
