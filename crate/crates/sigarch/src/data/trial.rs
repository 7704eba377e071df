//! Trial sampling protocol: rare-family under-sampling and novel hold-out.
//!
//! A trial splits a labeled table into a training table and a test table.
//! The configured novel family contributes zero training rows; its test rows
//! are marked with the NOVEL ground-truth label. Rare families are
//! down-sampled by a per-family keep fraction before the train/test split,
//! so both splits see the reduced population.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DataError, FeatureTable};
use crate::eval::{GroundTruthSet, NOVEL_MARKER};
use crate::rng::{derive_seed, seeded_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RareFamily {
    pub label: String,
    /// Fraction of the family's rows kept before splitting, in (0, 1].
    pub keep_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    /// Families participating in the trial, in a fixed order.
    pub families: Vec<String>,
    /// Family entirely withheld from training and marked NOVEL in the truth.
    pub novel_family: String,
    #[serde(default)]
    pub rare_families: Vec<RareFamily>,
    pub test_fraction: f64,
    pub n_trials: usize,
    pub seed: u64,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.families.is_empty() {
            return Err(DataError::Config("families must be nonempty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for f in &self.families {
            if !seen.insert(f.as_str()) {
                return Err(DataError::Config(format!("duplicate family {f:?}")));
            }
        }
        if !self.families.contains(&self.novel_family) {
            return Err(DataError::Config(format!(
                "novel family {:?} is not in the family list",
                self.novel_family
            )));
        }
        for rare in &self.rare_families {
            if rare.label == self.novel_family {
                return Err(DataError::Config(format!(
                    "novel family {:?} cannot also be rare",
                    rare.label
                )));
            }
            if !self.families.contains(&rare.label) {
                return Err(DataError::Config(format!(
                    "rare family {:?} is not in the family list",
                    rare.label
                )));
            }
            if !(rare.keep_fraction > 0.0 && rare.keep_fraction <= 1.0) {
                return Err(DataError::Config(format!(
                    "keep_fraction for {:?} must lie in (0, 1], got {}",
                    rare.label, rare.keep_fraction
                )));
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(DataError::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.n_trials == 0 {
            return Err(DataError::Config("n_trials must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-family row counts of one sampled trial; enough to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialManifest {
    pub seed: u64,
    pub trial_index: usize,
    pub families: BTreeMap<String, FamilyCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyCounts {
    pub train: usize,
    pub test: usize,
}

/// One sampled trial: raw sub-tables (normalization is the caller's choice)
/// plus the ground truth for the test rows.
#[derive(Debug, Clone)]
pub struct TrialSplit {
    pub train: FeatureTable,
    /// Test rows with labels blanked.
    pub test: FeatureTable,
    pub truth: GroundTruthSet,
    pub manifest: TrialManifest,
}

impl TrialSplit {
    /// Persist the trial as paired CSVs plus a JSON manifest:
    /// `train.csv`, `test.csv`, `truth.csv` (sample_id,label with the NOVEL
    /// marker), and `manifest.json`.
    pub fn persist(&self, dir: &std::path::Path) -> Result<(), DataError> {
        std::fs::create_dir_all(dir)?;
        self.train.write_csv(&dir.join("train.csv"))?;
        self.test.write_csv(&dir.join("test.csv"))?;
        let mut truth_csv = String::from("sample_id,label\n");
        for (i, id) in self.truth.sample_ids().iter().enumerate() {
            truth_csv.push_str(&format!("{id},{}\n", self.truth.label(i)));
        }
        std::fs::write(dir.join("truth.csv"), truth_csv)?;
        let manifest = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| DataError::InvalidTable(format!("manifest serialization: {e}")))?;
        std::fs::write(dir.join("manifest.json"), manifest + "\n")?;
        Ok(())
    }
}

/// Sample one trial, deterministically for `(config.seed, trial_index)`.
pub fn sample_trial(
    table: &FeatureTable,
    config: &TrialConfig,
    trial_index: usize,
) -> Result<TrialSplit, DataError> {
    config.validate()?;
    for family in &config.families {
        if table.row_indices_with_label(family).is_empty() {
            return Err(DataError::Config(format!(
                "family {family:?} has no rows in the table"
            )));
        }
    }

    let mut rng = seeded_rng(derive_seed(config.seed, &[trial_index as u64]));
    let mut train_rows: Vec<usize> = Vec::new();
    let mut test_rows: Vec<usize> = Vec::new();
    let mut truth_ids: Vec<String> = Vec::new();
    let mut truth_labels: Vec<String> = Vec::new();
    let mut counts: BTreeMap<String, FamilyCounts> = BTreeMap::new();

    for family in &config.families {
        let mut rows = table.row_indices_with_label(family);
        rows.shuffle(&mut rng);

        if family == &config.novel_family {
            for &r in &rows {
                test_rows.push(r);
                truth_ids.push(table.rows()[r].sample_id.clone());
                truth_labels.push(NOVEL_MARKER.to_string());
            }
            counts.insert(
                family.clone(),
                FamilyCounts {
                    train: 0,
                    test: rows.len(),
                },
            );
            continue;
        }

        if let Some(rare) = config.rare_families.iter().find(|r| &r.label == family) {
            let keep = ((rows.len() as f64) * rare.keep_fraction).round() as usize;
            let keep = keep.max(1);
            rows.truncate(keep);
        }

        let test_n = ((rows.len() as f64) * config.test_fraction).round() as usize;
        let (test_part, train_part) = rows.split_at(test_n.min(rows.len()));
        for &r in test_part {
            test_rows.push(r);
            truth_ids.push(table.rows()[r].sample_id.clone());
            truth_labels.push(family.clone());
        }
        train_rows.extend_from_slice(train_part);
        counts.insert(
            family.clone(),
            FamilyCounts {
                train: train_part.len(),
                test: test_part.len(),
            },
        );
    }

    let truth = GroundTruthSet::new(truth_ids, truth_labels, NOVEL_MARKER.to_string())
        .map_err(|e| DataError::InvalidTable(e.to_string()))?;

    Ok(TrialSplit {
        train: table.subset(&train_rows, false),
        test: table.subset(&test_rows, true),
        truth,
        manifest: TrialManifest {
            seed: config.seed,
            trial_index,
            families: counts,
        },
    })
}
