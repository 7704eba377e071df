//! Shared fixtures for the integration suites: planted matrices and
//! datasets whose generating structure serves as the test oracle.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;

use sigarch::archive::{build_archive, BuildConfig, BuildTrace, LabeledDataset, SignatureArchive};
use sigarch::data::{
    dataset_from_table, generate_synthetic, sample_trial, FamilySpec, RareFamily, TrialConfig,
    TrialSplit,
};
use sigarch::linalg::FeatureMatrix;
use sigarch::rank::EnsembleConfig;
use sigarch::rng::seeded_rng;

/// Planted low-rank matrix: block-disjoint signatures (pairwise cosine 0,
/// so cosine distance 1) and per-sample activations dominated by one
/// round-robin signature, multiplied by elementwise noise.
pub fn planted_block_matrix(n: usize, m: usize, k: usize, noise: f64, seed: u64) -> FeatureMatrix {
    let mut rng = seeded_rng(seed);
    let rows_per = n / k;
    let mut w = Array2::<f64>::zeros((n, k));
    for s in 0..k {
        for r in s * rows_per..((s + 1) * rows_per).min(n) {
            w[(r, s)] = rng.random::<f64>() * 0.8 + 0.2;
        }
    }
    let mut h = Array2::<f64>::zeros((k, m));
    for j in 0..m {
        let dominant = j % k;
        for s in 0..k {
            h[(s, j)] = if s == dominant {
                rng.random::<f64>() * 0.3 + 0.7
            } else {
                rng.random::<f64>() * 0.15
            };
        }
    }
    let mut x = w.dot(&h);
    if noise > 0.0 {
        x.mapv_inplace(|v| v * (1.0 + rng.random_range(-noise..=noise)));
    }
    FeatureMatrix::new(x).unwrap()
}

fn block_signature(n: usize, lo: usize, hi: usize, rng: &mut impl Rng) -> Array1<f64> {
    let mut s = Array1::<f64>::zeros(n);
    for r in lo..hi {
        s[r] = rng.random::<f64>() * 0.8 + 0.2;
    }
    let norm = s.dot(&s).sqrt();
    s / norm
}

fn samples_from_prototype(
    proto: &Array1<f64>,
    count: usize,
    noise: f64,
    rng: &mut impl Rng,
) -> Vec<Array1<f64>> {
    (0..count)
        .map(|_| {
            let scale = rng.random::<f64>() * 0.8 + 0.6;
            proto.mapv(|v| v * scale * (1.0 + rng.random_range(-noise..=noise)))
        })
        .collect()
}

/// Three classes where A and B share a dominant base signature, so the
/// first factorization cannot separate them and the build must recurse.
/// Returns the dataset and the planted per-class prototypes (the oracle).
pub fn mixed_three_class_dataset(seed: u64) -> (LabeledDataset, [Array1<f64>; 3]) {
    let mut rng = seeded_rng(seed);
    let n = 24;
    let base = block_signature(n, 0, 8, &mut rng);
    let extra_a = block_signature(n, 8, 12, &mut rng);
    let extra_b = block_signature(n, 12, 16, &mut rng);
    let proto_c = block_signature(n, 16, 24, &mut rng);
    let proto_a = &base + &extra_a.mapv(|v| v * 0.35);
    let proto_b = &base + &extra_b.mapv(|v| v * 0.35);

    let groups = [
        ("A", samples_from_prototype(&proto_a, 40, 0.01, &mut rng)),
        ("B", samples_from_prototype(&proto_b, 40, 0.01, &mut rng)),
        ("C", samples_from_prototype(&proto_c, 40, 0.01, &mut rng)),
    ];
    let m: usize = groups.iter().map(|(_, v)| v.len()).sum();
    let mut x = Array2::<f64>::zeros((n, m));
    let mut ids = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    let mut j = 0;
    for (label, samples) in &groups {
        for (i, s) in samples.iter().enumerate() {
            x.column_mut(j).assign(s);
            ids.push(format!("{label}-{i}"));
            labels.push(Some(label.to_string()));
            j += 1;
        }
    }
    let dataset = LabeledDataset::with_inferred_classes(
        FeatureMatrix::new(x).unwrap(),
        ids,
        labels,
    )
    .unwrap();
    (dataset, [proto_a, proto_b, proto_c])
}

/// Build config forcing hierarchical separation of the mixed fixture
/// (rank scan capped at 2 so the shared signature cannot split early).
pub fn mixed_fixture_build_config() -> BuildConfig {
    BuildConfig {
        tau: 0.6,
        max_depth: 3,
        min_cluster_size: 10,
        min_labeled_fraction: 0.3,
        rank_config: EnsembleConfig {
            k_min: 1,
            k_max: 2,
            n_perturbations: 6,
            nmf_seed: 17,
            nmf_max_iters: 500,
            nmf_tol: 1e-7,
            ..EnsembleConfig::default()
        },
    }
}

/// The five-family selective-classification fixture: four known families
/// (two of them under-sampled to 10% and 5%) and one family held out
/// entirely as NOVEL.
pub struct FiveFamilyTrial {
    pub archive: SignatureArchive,
    pub trace: BuildTrace,
    pub split: TrialSplit,
}

pub const FIVE_FAMILY_LABELS: [&str; 5] = ["f0", "f1", "f2", "f3", "f4"];
pub const RARE_FAMILIES: [&str; 2] = ["f2", "f3"];
pub const NOVEL_FAMILY: &str = "f4";

pub fn five_family_trial(trial: usize) -> FiveFamilyTrial {
    let seed = 4000 + trial as u64;
    let mk = |label: &str, n_samples: usize| FamilySpec {
        label: label.into(),
        n_signatures: 1,
        n_samples,
    };
    let families = vec![
        mk("f0", 300),
        mk("f1", 300),
        mk("f2", 400),
        mk("f3", 400),
        mk("f4", 300),
    ];
    let (table, _planted) =
        generate_synthetic(48, &families, 0.01, Some(NOVEL_FAMILY), seed).unwrap();
    let trial_cfg = TrialConfig {
        families: FIVE_FAMILY_LABELS.iter().map(|s| s.to_string()).collect(),
        novel_family: NOVEL_FAMILY.into(),
        rare_families: vec![
            RareFamily {
                label: "f2".into(),
                keep_fraction: 0.10,
            },
            RareFamily {
                label: "f3".into(),
                keep_fraction: 0.05,
            },
        ],
        test_fraction: 0.2,
        n_trials: 10,
        seed: seed ^ 0xABC,
    };
    let split = sample_trial(&table, &trial_cfg, trial).unwrap();
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
            noise_magnitude: 0.03,
            nmf_seed: seed ^ 0xDEF,
            nmf_max_iters: 400,
            nmf_tol: 1e-7,
            ..EnsembleConfig::default()
        },
    };
    let (archive, trace) = build_archive(&train, &config).unwrap();
    FiveFamilyTrial {
        archive,
        trace,
        split,
    }
}
