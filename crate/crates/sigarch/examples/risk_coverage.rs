//! Risk-coverage analysis: sweep the rejection threshold and compare the
//! coverage/risk trade-off of the three confidence metrics.
//!
//! Writes one SVG per metric into a temp directory and prints the AURC
//! (area under the risk-coverage curve; lower is better).
//!
//! ```bash
//! cargo run --example risk_coverage
//! ```

use ndarray::Array1;
use sigarch::archive::{build_archive, BuildConfig};
use sigarch::data::{dataset_from_table, generate_synthetic, sample_trial, FamilySpec, RareFamily, TrialConfig};
use sigarch::eval::{risk_coverage_curve, NovelAccounting};
use sigarch::inference::{classify, AugmentationConfig, MetricParams};
use sigarch::plot::render_rc_curve_svg;
use sigarch::rank::EnsembleConfig;

fn main() {
    let mk = |label: &str, n: usize| FamilySpec {
        label: label.into(),
        n_signatures: 1,
        n_samples: n,
    };
    let families = [mk("a", 250), mk("b", 250), mk("c", 250), mk("novel", 150)];
    let (table, _) = generate_synthetic(40, &families, 0.01, Some("novel"), 77).unwrap();

    let trial = TrialConfig {
        families: ["a", "b", "c", "novel"].iter().map(|s| s.to_string()).collect(),
        novel_family: "novel".into(),
        rare_families: vec![RareFamily { label: "c".into(), keep_fraction: 0.2 }],
        test_fraction: 0.25,
        n_trials: 1,
        seed: 5,
    };
    let split = sample_trial(&table, &trial, 0).unwrap();
    let train = dataset_from_table(&split.train).unwrap();

    let config = BuildConfig {
        tau: 0.55,
        max_depth: 3,
        min_cluster_size: 8,
        min_labeled_fraction: 0.3,
        rank_config: EnsembleConfig {
            k_min: 2,
            k_max: 5,
            n_perturbations: 8,
            nmf_seed: 3,
            nmf_max_iters: 400,
            nmf_tol: 1e-7,
            ..EnsembleConfig::default()
        },
    };
    let (archive, _) = build_archive(&train, &config).unwrap();
    println!(
        "archive: {} signatures, test set {} samples ({} novel)\n",
        archive.signature_count(),
        split.test.len(),
        (0..split.truth.len()).filter(|&i| split.truth.is_novel(i)).count()
    );

    let metrics: [(&str, MetricParams); 3] = [
        ("projection_similarity", MetricParams::Projection),
        ("ensemble_voting", MetricParams::Ensemble { vote_threshold: 0.98 }),
        (
            "data_augmentation",
            MetricParams::Augmentation(AugmentationConfig {
                p: 5,
                epsilon_norm: 0.015,
                n_bootstrap: 10,
                seed: 9,
            }),
        ),
    ];

    let out_dir = std::env::temp_dir().join("sigarch_example");
    std::fs::create_dir_all(&out_dir).unwrap();

    for (name, params) in &metrics {
        let mut confidences = Vec::new();
        let mut labels = Vec::new();
        for row in split.test.rows() {
            let x = Array1::from_vec(row.values.clone());
            // threshold below any confidence: we want the would-be label
            let p = classify(&archive, x.view(), params, -1.0).unwrap();
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

        let svg_path = out_dir.join(format!("rc_{name}.svg"));
        std::fs::write(&svg_path, render_rc_curve_svg(&curve, name)).unwrap();
        println!(
            "{name:<24} AURC {:.4} over {} points -> {}",
            curve.aurc,
            curve.points.len(),
            svg_path.display()
        );

        // a few operating points along the curve
        for target in [0.25, 0.5, 0.75] {
            if let Some(p) = curve
                .points
                .iter()
                .min_by(|a, b| {
                    (a.coverage - target).abs().total_cmp(&(b.coverage - target).abs())
                })
            {
                println!(
                    "    threshold {:.3} -> coverage {:.2}, risk {:.4}",
                    p.threshold, p.coverage, p.risk
                );
            }
        }
    }
}
