//! Abstaining classification with the three confidence metrics.
//!
//! Builds an archive over three known families, then classifies members of
//! those families plus samples from a family the archive has never seen.
//! Each metric assigns a label only when its confidence clears the
//! threshold; the novel samples should be rejected.
//!
//! ```bash
//! cargo run --example classify_with_reject
//! ```

use ndarray::Array1;
use sigarch::archive::{build_archive, BuildConfig};
use sigarch::data::{dataset_from_table, generate_synthetic, FamilySpec};
use sigarch::inference::{classify, AugmentationConfig, MetricParams};
use sigarch::rank::EnsembleConfig;

fn main() {
    let mk = |label: &str, n: usize| FamilySpec {
        label: label.into(),
        n_signatures: 1,
        n_samples: n,
    };
    // "delta" never enters the training table: it plays the novel family.
    let families = [mk("alpha", 120), mk("beta", 120), mk("gamma", 120), mk("delta", 20)];
    let (table, _) = generate_synthetic(32, &families, 0.01, Some("delta"), 321).unwrap();

    let train_rows: Vec<usize> = (0..table.len())
        .filter(|&i| table.rows()[i].label.as_deref() != Some("delta"))
        .collect();
    let train = dataset_from_table(&table.subset(&train_rows, false)).unwrap();

    let config = BuildConfig {
        tau: 0.55,
        max_depth: 3,
        min_cluster_size: 8,
        min_labeled_fraction: 0.3,
        rank_config: EnsembleConfig {
            k_min: 2,
            k_max: 5,
            n_perturbations: 8,
            nmf_seed: 5,
            nmf_max_iters: 400,
            nmf_tol: 1e-7,
            ..EnsembleConfig::default()
        },
    };
    let (archive, _) = build_archive(&train, &config).unwrap();
    println!(
        "archive: {} signatures for classes {:?}\n",
        archive.signature_count(),
        archive.class_index().keys().collect::<Vec<_>>()
    );

    let metrics: [(&str, MetricParams, f64); 3] = [
        ("projection similarity", MetricParams::Projection, 0.95),
        (
            "ensemble voting",
            MetricParams::Ensemble { vote_threshold: 0.98 },
            0.5,
        ),
        (
            "data augmentation",
            MetricParams::Augmentation(AugmentationConfig {
                p: 10,
                epsilon_norm: 0.015,
                n_bootstrap: 10,
                seed: 11,
            }),
            0.95,
        ),
    ];

    // One member of each known family plus two novel samples.
    let picks: Vec<usize> = vec![0, 121, 241, 360, 361];
    for &i in &picks {
        let row = &table.rows()[i];
        let x = Array1::from_vec(row.values.clone());
        println!(
            "sample {} (true family {}):",
            row.sample_id,
            row.label.as_deref().unwrap_or("?")
        );
        for (name, params, threshold) in &metrics {
            let p = classify(&archive, x.view(), params, *threshold).unwrap();
            let outcome = p
                .outcome
                .label()
                .map(|l| format!("-> {l}"))
                .unwrap_or_else(|| "-> REJECT".into());
            println!("  {name:<22} confidence {:.4} {outcome}", p.confidence);
        }
        println!();
    }
}
