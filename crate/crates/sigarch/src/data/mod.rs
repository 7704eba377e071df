//! Feature-table ingestion and normalization.
//!
//! Tables arrive as CSV with a `sample_id,label,<feature...>` header; any
//! numeric schema is accepted. Normalization z-scores each feature, clamps
//! outliers beyond `clamp_sigmas` standard deviations to exactly that bound,
//! and affinely remaps the clamped z-range to [0, 1] so the matrix is ready
//! for nonnegative factorization. The fitted parameters travel with the
//! archive so the test-time transform can never drift from training.

mod synth;
mod trial;

pub use synth::{generate_synthetic, FamilySpec, PlantedSignature, PlantedTruth};
pub use trial::{sample_trial, RareFamily, TrialConfig, TrialManifest, TrialSplit};

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::LabeledDataset;
use crate::linalg::FeatureMatrix;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("separation unreachable: {0}")]
    SeparationUnreachable(String),
    #[error("invalid table: {0}")]
    InvalidTable(String),
}

/// One parsed sample row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub sample_id: String,
    pub label: Option<String>,
    pub values: Vec<f64>,
}

/// A rectangular feature table: ordered feature names plus per-sample rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    feature_names: Vec<String>,
    rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(feature_names: Vec<String>, rows: Vec<FeatureRow>) -> Result<Self, DataError> {
        let mut names = BTreeSet::new();
        for name in &feature_names {
            if !names.insert(name.as_str()) {
                return Err(DataError::InvalidTable(format!(
                    "duplicate feature name {name:?}"
                )));
            }
        }
        let mut ids = BTreeSet::new();
        for row in &rows {
            if row.values.len() != feature_names.len() {
                return Err(DataError::InvalidTable(format!(
                    "row {:?} has {} values, expected {}",
                    row.sample_id,
                    row.values.len(),
                    feature_names.len()
                )));
            }
            if !ids.insert(row.sample_id.as_str()) {
                return Err(DataError::InvalidTable(format!(
                    "duplicate sample id {:?}",
                    row.sample_id
                )));
            }
        }
        Ok(Self {
            feature_names,
            rows,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows restricted to a label, in table order.
    pub fn row_indices_with_label(&self, label: &str) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&i| self.rows[i].label.as_deref() == Some(label))
            .collect()
    }

    /// Sub-table of the given rows, optionally blanking the labels.
    pub fn subset(&self, indices: &[usize], blank_labels: bool) -> Self {
        let rows = indices
            .iter()
            .map(|&i| {
                let mut row = self.rows[i].clone();
                if blank_labels {
                    row.label = None;
                }
                row
            })
            .collect();
        Self {
            feature_names: self.feature_names.clone(),
            rows,
        }
    }

    /// Write as `sample_id,label,<features...>` CSV. Floats use the shortest
    /// representation that round-trips, so output is byte-deterministic.
    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut out = String::new();
        out.push_str("sample_id,label");
        for name in &self.feature_names {
            let _ = write!(out, ",{name}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{}", row.sample_id, row.label.as_deref().unwrap_or(""));
            for v in &row.values {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Load a feature CSV. The header must start `sample_id,label`; every
/// remaining column is a numeric feature. An empty label field means
/// unlabeled.
pub fn load_feature_csv(path: &Path) -> Result<FeatureTable, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                DataError::Io(std::io::Error::other(e.to_string()))
            }
            _ => DataError::InvalidTable(e.to_string()),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| DataError::InvalidTable(format!("unreadable header: {e}")))?
        .clone();
    if headers.len() < 3 {
        return Err(DataError::InvalidTable(
            "header must be sample_id,label,<at least one feature>".into(),
        ));
    }
    if &headers[0] != "sample_id" || &headers[1] != "label" {
        return Err(DataError::InvalidTable(format!(
            "header must start with sample_id,label (got {:?},{:?})",
            &headers[0], &headers[1]
        )));
    }
    let feature_names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();

    let mut rows = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (i, record) in reader.records().enumerate() {
        let row_number = i + 1; // 1-based data row
        let record = record.map_err(|e| DataError::Parse {
            row: row_number,
            column: "<record>".into(),
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(DataError::Parse {
                row: row_number,
                column: "<record>".into(),
                message: format!("expected {} fields, got {}", headers.len(), record.len()),
            });
        }
        let sample_id = record[0].to_string();
        if sample_id.is_empty() {
            return Err(DataError::Parse {
                row: row_number,
                column: "sample_id".into(),
                message: "empty sample id".into(),
            });
        }
        if !seen_ids.insert(sample_id.clone()) {
            return Err(DataError::Parse {
                row: row_number,
                column: "sample_id".into(),
                message: format!("duplicate sample id {sample_id:?}"),
            });
        }
        let label = if record[1].is_empty() {
            None
        } else {
            Some(record[1].to_string())
        };
        let mut values = Vec::with_capacity(feature_names.len());
        for (f, raw) in record.iter().skip(2).enumerate() {
            let v: f64 = raw.parse().map_err(|_| DataError::Parse {
                row: row_number,
                column: feature_names[f].clone(),
                message: format!("not a number: {raw:?}"),
            })?;
            if !v.is_finite() {
                return Err(DataError::Parse {
                    row: row_number,
                    column: feature_names[f].clone(),
                    message: format!("non-finite value {raw:?}"),
                });
            }
            values.push(v);
        }
        rows.push(FeatureRow {
            sample_id,
            label,
            values,
        });
    }
    FeatureTable::new(feature_names, rows)
}

/// Per-feature z-score parameters with outlier clamping and an affine remap
/// into [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Z-scores beyond this many standard deviations are clamped to the
    /// bound.
    pub clamp_sigmas: f64,
    pub post_shift: Vec<f64>,
    pub post_scale: Vec<f64>,
}

impl NormalizationParams {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }
}

/// Fit normalization on a table and return the normalized `n x m` matrix
/// (features as rows) together with the fitted parameters.
///
/// Per feature: `z = (v - mean) / std` (a zero-variance feature maps to
/// z = 0), clamped to `[-3, 3]`, then shifted and scaled into [0, 1]. The
/// matrix is produced by the same code path as [`apply_normalization`], so
/// re-applying the parameters to a training row reproduces its column
/// exactly.
pub fn normalize(table: &FeatureTable) -> Result<(FeatureMatrix, NormalizationParams), DataError> {
    if table.len() < 2 {
        return Err(DataError::DegenerateInput(
            "normalization needs at least 2 rows".into(),
        ));
    }
    let n = table.n_features();
    let m = table.len();
    let clamp_sigmas = 3.0;

    let mut means = vec![0.0; n];
    for row in table.rows() {
        for (f, &v) in row.values.iter().enumerate() {
            means[f] += v;
        }
    }
    for mean in &mut means {
        *mean /= m as f64;
    }
    let mut stds = vec![0.0; n];
    for row in table.rows() {
        for (f, &v) in row.values.iter().enumerate() {
            let d = v - means[f];
            stds[f] += d * d;
        }
    }
    for std in &mut stds {
        *std = (*std / m as f64).sqrt();
    }

    let params = NormalizationParams {
        means,
        stds,
        clamp_sigmas,
        post_shift: vec![clamp_sigmas; n],
        post_scale: vec![1.0 / (2.0 * clamp_sigmas); n],
    };

    let mut values = Array2::<f64>::zeros((n, m));
    for (j, row) in table.rows().iter().enumerate() {
        let col = apply_normalization(&params, &row.values)?;
        values.column_mut(j).assign(&col);
    }
    let matrix = FeatureMatrix::new(values)
        .map_err(|e| DataError::InvalidTable(format!("normalized matrix invalid: {e}")))?;
    Ok((matrix, params))
}

/// Apply fitted normalization to one raw feature vector.
pub fn apply_normalization(
    params: &NormalizationParams,
    raw: &[f64],
) -> Result<Array1<f64>, DataError> {
    if raw.len() != params.n_features() {
        return Err(DataError::DimensionMismatch {
            expected: params.n_features(),
            got: raw.len(),
        });
    }
    let mut out = Array1::<f64>::zeros(raw.len());
    for (f, &v) in raw.iter().enumerate() {
        let z = if params.stds[f] == 0.0 {
            0.0
        } else {
            (v - params.means[f]) / params.stds[f]
        };
        let z = z.clamp(-params.clamp_sigmas, params.clamp_sigmas);
        out[f] = (z + params.post_shift[f]) * params.post_scale[f];
    }
    Ok(out)
}

/// Assemble a dataset from raw table values without normalization; the
/// values must already be nonnegative.
pub fn dataset_from_table(table: &FeatureTable) -> Result<LabeledDataset, DataError> {
    let n = table.n_features();
    let m = table.len();
    if m == 0 {
        return Err(DataError::DegenerateInput("empty table".into()));
    }
    let mut values = Array2::<f64>::zeros((n, m));
    for (j, row) in table.rows().iter().enumerate() {
        for (f, &v) in row.values.iter().enumerate() {
            values[(f, j)] = v;
        }
    }
    let matrix = FeatureMatrix::new(values)
        .map_err(|e| DataError::InvalidTable(format!("table is not NMF-ready: {e}")))?;
    let ids = table.rows().iter().map(|r| r.sample_id.clone()).collect();
    let labels = table.rows().iter().map(|r| r.label.clone()).collect();
    LabeledDataset::with_inferred_classes(matrix, ids, labels)
        .map_err(|e| DataError::InvalidTable(e.to_string()))
}

/// Fit normalization on the table and assemble the normalized dataset.
pub fn normalized_dataset(
    table: &FeatureTable,
) -> Result<(LabeledDataset, NormalizationParams), DataError> {
    let (matrix, params) = normalize(table)?;
    let ids = table.rows().iter().map(|r| r.sample_id.clone()).collect();
    let labels = table.rows().iter().map(|r| r.label.clone()).collect();
    let dataset = LabeledDataset::with_inferred_classes(matrix, ids, labels)
        .map_err(|e| DataError::InvalidTable(e.to_string()))?;
    Ok((dataset, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn loads_a_well_formed_csv() {
        let f = write_temp("sample_id,label,f0,f1\na,x,1.0,2.0\nb,,3.5,-1.25\n");
        let table = load_feature_csv(f.path()).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.feature_names(), ["f0", "f1"]);
        assert_eq!(table.rows()[0].label.as_deref(), Some("x"));
        assert_eq!(table.rows()[1].label, None);
        assert_eq!(table.rows()[1].values, vec![3.5, -1.25]);
    }

    #[test]
    fn bad_cell_is_reported_with_coordinates() {
        let f = write_temp("sample_id,label,f0,f1\na,x,1.0,2.0\nb,y,abc,4.0\n");
        match load_feature_csv(f.path()) {
            Err(DataError::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "f0");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_is_reported() {
        let f = write_temp("sample_id,label,f0\na,x,1.0\na,y,2.0\n");
        match load_feature_csv(f.path()) {
            Err(DataError::Parse { row, column, message }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "sample_id");
                assert!(message.contains('a'), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        let f = write_temp("id,label,f0\na,x,1.0\n");
        assert!(matches!(
            load_feature_csv(f.path()),
            Err(DataError::InvalidTable(_))
        ));
    }

    fn table(rows: &[(&str, Option<&str>, Vec<f64>)]) -> FeatureTable {
        let n = rows[0].2.len();
        let names = (0..n).map(|i| format!("f{i}")).collect();
        FeatureTable::new(
            names,
            rows.iter()
                .map(|(id, label, values)| FeatureRow {
                    sample_id: id.to_string(),
                    label: label.map(str::to_string),
                    values: values.clone(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn normalize_maps_known_z_scores() {
        // feature 0: values [-1, 1] => mean 0, population std 1
        let t = table(&[("a", None, vec![-1.0]), ("b", None, vec![1.0])]);
        let (matrix, params) = normalize(&t).unwrap();
        assert_eq!(params.means, vec![0.0]);
        assert_eq!(params.stds, vec![1.0]);
        // z = -1 -> (−1+3)/6 = 1/3 ; z = +1 -> 2/3
        assert!((matrix.values()[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((matrix.values()[(0, 1)] - 2.0 / 3.0).abs() < 1e-15);

        // an outlier at z = 5 clamps to 3 => exactly 1.0
        let out = apply_normalization(&params, &[5.0]).unwrap();
        assert_eq!(out[0], 1.0);
        // center maps to the midpoint
        let mid = apply_normalization(&params, &[0.0]).unwrap();
        assert_eq!(mid[0], 0.5);
        // far low outlier saturates at 0
        let low = apply_normalization(&params, &[-50.0]).unwrap();
        assert_eq!(low[0], 0.0);
    }

    #[test]
    fn constant_feature_maps_to_midpoint() {
        let t = table(&[("a", None, vec![7.0]), ("b", None, vec![7.0])]);
        let (matrix, _) = normalize(&t).unwrap();
        assert_eq!(matrix.values()[(0, 0)], 0.5);
        assert_eq!(matrix.values()[(0, 1)], 0.5);
    }

    #[test]
    fn reapplying_params_reproduces_training_columns_bitwise() {
        let t = table(&[
            ("a", None, vec![1.0, 10.0, 3.3]),
            ("b", None, vec![2.0, -4.0, 3.3]),
            ("c", None, vec![0.5, 6.0, 3.3]),
        ]);
        let (matrix, params) = normalize(&t).unwrap();
        for (j, row) in t.rows().iter().enumerate() {
            let re = apply_normalization(&params, &row.values).unwrap();
            for f in 0..t.n_features() {
                assert_eq!(re[f].to_bits(), matrix.values()[(f, j)].to_bits());
            }
        }
    }

    #[test]
    fn normalized_output_is_in_unit_interval() {
        let t = table(&[
            ("a", None, vec![1e9, -3.0]),
            ("b", None, vec![-1e9, 2.0]),
            ("c", None, vec![5.0, 0.1]),
        ]);
        let (matrix, _) = normalize(&t).unwrap();
        for &v in matrix.values().iter() {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn single_row_table_is_degenerate() {
        let t = table(&[("a", None, vec![1.0])]);
        assert!(matches!(normalize(&t), Err(DataError::DegenerateInput(_))));
    }

    #[test]
    fn csv_roundtrip_preserves_values() {
        let t = table(&[
            ("a", Some("x"), vec![0.1, 2.0]),
            ("b", None, vec![1.0 / 3.0, 5e-17]),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        t.write_csv(&path).unwrap();
        let back = load_feature_csv(&path).unwrap();
        assert_eq!(t, back);
    }
}
