//! Synthetic feature tables with planted ground truth.
//!
//! Each family owns one or more nonnegative unit signatures, drawn with
//! pairwise cosine at most 0.5 across the whole pool (rejection sampling on
//! sparse random supports). A sample is a positive rescaling of a convex
//! combination of its family's signatures, with optional multiplicative
//! noise. The planted class-to-signature map is returned so tests can check
//! recovered structure against a known answer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, FeatureRow, FeatureTable};
use crate::rng::seeded_rng;

/// Maximum pairwise cosine between planted signatures.
const MAX_PAIRWISE_COSINE: f64 = 0.5;
/// Rejection-sampling attempts per signature before giving up.
const MAX_DRAW_ATTEMPTS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub label: String,
    pub n_signatures: usize,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSignature {
    pub label: String,
    pub values: Vec<f64>,
}

/// The generator's ground truth: which unit signature belongs to which
/// family, and which family (if any) plays the novel class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub novel_family: Option<String>,
    pub signatures: Vec<PlantedSignature>,
}

impl PlantedTruth {
    pub fn signatures_of(&self, label: &str) -> Vec<&PlantedSignature> {
        self.signatures.iter().filter(|s| s.label == label).collect()
    }
}

/// Generate a labeled feature table from planted family signatures.
pub fn generate_synthetic(
    n_features: usize,
    families: &[FamilySpec],
    noise: f64,
    novel: Option<&str>,
    seed: u64,
) -> Result<(FeatureTable, PlantedTruth), DataError> {
    if n_features == 0 {
        return Err(DataError::InvalidParameter("n_features must be >= 1".into()));
    }
    if families.is_empty() {
        return Err(DataError::InvalidParameter("at least one family required".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for f in families {
        if f.n_signatures == 0 || f.n_samples == 0 {
            return Err(DataError::InvalidParameter(format!(
                "family {:?} must have positive signature and sample counts",
                f.label
            )));
        }
        if !seen.insert(f.label.as_str()) {
            return Err(DataError::InvalidParameter(format!(
                "duplicate family label {:?}",
                f.label
            )));
        }
    }
    if !(0.0..=0.2).contains(&noise) {
        return Err(DataError::InvalidParameter(format!(
            "noise must lie in [0, 0.2], got {noise}"
        )));
    }
    if let Some(nv) = novel {
        if !families.iter().any(|f| f.label == nv) {
            return Err(DataError::InvalidParameter(format!(
                "novel family {nv:?} is not among the families"
            )));
        }
    }

    let mut rng = seeded_rng(seed);

    // Draw all signatures first, enforcing global pairwise separation.
    let mut pool: Vec<Vec<f64>> = Vec::new();
    let mut truth_sigs: Vec<PlantedSignature> = Vec::new();
    for family in families {
        for _ in 0..family.n_signatures {
            let sig = draw_separated_signature(n_features, &pool, &mut rng)?;
            pool.push(sig.clone());
            truth_sigs.push(PlantedSignature {
                label: family.label.clone(),
                values: sig,
            });
        }
    }

    let mut rows = Vec::new();
    let mut sig_offset = 0usize;
    for family in families {
        let sigs = &pool[sig_offset..sig_offset + family.n_signatures];
        for i in 0..family.n_samples {
            // Concentrated Dirichlet weights over the family's signatures
            // (gamma(5) draws, normalized), so a multi-signature family
            // expresses all of its signatures in every sample.
            let mut weights: Vec<f64> = (0..sigs.len())
                .map(|_| {
                    -(0..5)
                        .map(|_| (1.0 - rng.random::<f64>()).ln())
                        .sum::<f64>()
                })
                .collect();
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            let scale = rng.random::<f64>() + 0.5;

            let mut values = vec![0.0f64; n_features];
            for (w, sig) in weights.iter().zip(sigs) {
                for (v, s) in values.iter_mut().zip(sig) {
                    *v += w * s;
                }
            }
            for v in &mut values {
                *v *= scale;
                if noise > 0.0 {
                    *v *= 1.0 + rng.random_range(-noise..=noise);
                }
            }
            rows.push(FeatureRow {
                sample_id: format!("{}-{i:04}", family.label),
                label: Some(family.label.clone()),
                values,
            });
        }
        sig_offset += family.n_signatures;
    }

    let feature_names = (0..n_features).map(|i| format!("f{i}")).collect();
    let table = FeatureTable::new(feature_names, rows)?;
    let truth = PlantedTruth {
        novel_family: novel.map(str::to_string),
        signatures: truth_sigs,
    };
    Ok((table, truth))
}

/// Sparse nonnegative unit vector with cosine at most 0.5 to every vector
/// already in the pool.
fn draw_separated_signature(
    n_features: usize,
    pool: &[Vec<f64>],
    rng: &mut impl Rng,
) -> Result<Vec<f64>, DataError> {
    let support = (n_features / 4).max(1);
    for _ in 0..MAX_DRAW_ATTEMPTS {
        let mut candidate = vec![0.0f64; n_features];
        let mut chosen = std::collections::BTreeSet::new();
        while chosen.len() < support {
            chosen.insert(rng.random_range(0..n_features));
        }
        for &idx in &chosen {
            candidate[idx] = rng.random::<f64>() * 0.75 + 0.25;
        }
        let norm = candidate.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut candidate {
            *v /= norm;
        }
        let separated = pool.iter().all(|existing| {
            let dot: f64 = candidate.iter().zip(existing).map(|(a, b)| a * b).sum();
            dot <= MAX_PAIRWISE_COSINE
        });
        if separated {
            return Ok(candidate);
        }
    }
    Err(DataError::SeparationUnreachable(format!(
        "could not draw a signature with pairwise cosine <= {MAX_PAIRWISE_COSINE} \
         in {n_features} dimensions after {MAX_DRAW_ATTEMPTS} attempts"
    )))
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn noiseless_single_signature_family_is_rank_one() {
        let (table, truth) = generate_synthetic(
            16,
            &[FamilySpec {
                label: "A".into(),
                n_signatures: 1,
                n_samples: 12,
            }],
            0.0,
            None,
            5,
        )
        .unwrap();
        let sig = &truth.signatures[0].values;
        for row in table.rows() {
            let c = cosine(&row.values, sig);
            assert!((c - 1.0).abs() < 1e-12, "cosine to signature {c}");
        }
    }

    #[test]
    fn between_family_cosine_is_below_within_family() {
        let (table, _) = generate_synthetic(
            32,
            &[
                FamilySpec {
                    label: "A".into(),
                    n_signatures: 1,
                    n_samples: 30,
                },
                FamilySpec {
                    label: "B".into(),
                    n_signatures: 1,
                    n_samples: 30,
                },
            ],
            0.02,
            None,
            9,
        )
        .unwrap();
        let a: Vec<&FeatureRow> = table
            .rows()
            .iter()
            .filter(|r| r.label.as_deref() == Some("A"))
            .collect();
        let b: Vec<&FeatureRow> = table
            .rows()
            .iter()
            .filter(|r| r.label.as_deref() == Some("B"))
            .collect();

        let mut within = Vec::new();
        for i in 0..a.len() {
            for j in (i + 1)..a.len() {
                within.push(cosine(&a[i].values, &a[j].values));
            }
        }
        let within_avg = within.iter().sum::<f64>() / within.len() as f64;

        let mut between_max: f64 = 0.0;
        for ra in &a {
            for rb in &b {
                between_max = between_max.max(cosine(&ra.values, &rb.values));
            }
        }
        assert!(
            between_max < within_avg,
            "between max {between_max} >= within avg {within_avg}"
        );
    }

    #[test]
    fn signature_pool_respects_separation() {
        let (_, truth) = generate_synthetic(
            40,
            &[
                FamilySpec {
                    label: "A".into(),
                    n_signatures: 3,
                    n_samples: 2,
                },
                FamilySpec {
                    label: "B".into(),
                    n_signatures: 3,
                    n_samples: 2,
                },
            ],
            0.0,
            None,
            13,
        )
        .unwrap();
        for i in 0..truth.signatures.len() {
            for j in (i + 1)..truth.signatures.len() {
                let c = cosine(&truth.signatures[i].values, &truth.signatures[j].values);
                assert!(c <= 0.5 + 1e-12, "pair ({i}, {j}) cosine {c}");
            }
        }
    }

    #[test]
    fn impossible_separation_fails_cleanly() {
        let families = [FamilySpec {
            label: "A".into(),
            n_signatures: 3,
            n_samples: 1,
        }];
        assert!(matches!(
            generate_synthetic(1, &families, 0.0, None, 1),
            Err(DataError::SeparationUnreachable(_))
        ));
    }

    /// Jacobi eigenvalue iteration for a symmetric matrix; the independent
    /// oracle for the rank check below.
    fn symmetric_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[i][j] * a[i][j];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q].abs() < 1e-18 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        eig.sort_by(|x, y| y.total_cmp(x));
        eig
    }

    #[test]
    fn noiseless_matrix_rank_equals_planted_signature_count() {
        let n_features = 16;
        let families = [
            FamilySpec {
                label: "A".into(),
                n_signatures: 2,
                n_samples: 10,
            },
            FamilySpec {
                label: "B".into(),
                n_signatures: 2,
                n_samples: 10,
            },
        ];
        let (table, truth) = generate_synthetic(n_features, &families, 0.0, None, 21).unwrap();
        let planted = truth.signatures.len();

        // Gram matrix of the feature-by-sample matrix; singular values are
        // the square roots of its eigenvalues.
        let mut gram = vec![vec![0.0f64; n_features]; n_features];
        for row in table.rows() {
            for i in 0..n_features {
                for j in 0..n_features {
                    gram[i][j] += row.values[i] * row.values[j];
                }
            }
        }
        let eig = symmetric_eigenvalues(gram);
        let top = eig[0].max(1e-300);
        let at_rank = (eig[planted - 1] / top).sqrt();
        let past_rank = (eig[planted].max(0.0) / top).sqrt();
        assert!(
            at_rank > 1e-6,
            "singular value {planted} collapsed: ratio {at_rank:.3e}"
        );
        assert!(
            past_rank < 1e-8,
            "singular value {} too large for rank {planted}: ratio {past_rank:.3e}",
            planted + 1
        );
    }

    #[test]
    fn parameters_are_validated() {
        let fam = [FamilySpec {
            label: "A".into(),
            n_signatures: 1,
            n_samples: 1,
        }];
        assert!(generate_synthetic(0, &fam, 0.0, None, 1).is_err());
        assert!(generate_synthetic(4, &[], 0.0, None, 1).is_err());
        assert!(generate_synthetic(4, &fam, 0.5, None, 1).is_err());
        assert!(generate_synthetic(4, &fam, 0.0, Some("missing"), 1).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let fam = [FamilySpec {
            label: "A".into(),
            n_signatures: 2,
            n_samples: 5,
        }];
        let (t1, g1) = generate_synthetic(10, &fam, 0.05, None, 42).unwrap();
        let (t2, g2) = generate_synthetic(10, &fam, 0.05, None, 42).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(g1, g2);
    }
}
