//! Tabular physiological dataset: schema, storage, and the preprocessing
//! steps that run before any learner sees the data.

mod correlation;
mod csv_io;
mod scaler;
mod split;
mod synth;

pub use correlation::{correlation_matrix, pearson, CorrelationMatrix};
pub use csv_io::{load_csv, read_csv, write_csv};
pub use scaler::{apply_scaler, fit_scaler, ScalerParams};
pub use split::{split, split_indices, SplitIndices};
pub use synth::{generate, SynthParams};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Name of the label column in CSV files and of the label variable in the
/// correlation matrix.
pub const LABEL_COLUMN: &str = "position";

/// Column names, units and class names of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
    units: Vec<String>,
    class_names: Vec<String>,
}

impl FeatureSchema {
    pub fn new(names: Vec<String>, units: Vec<String>, class_names: Vec<String>) -> Result<Self> {
        let schema = FeatureSchema {
            names,
            units,
            class_names,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// The shipped 4-feature, 3-position schema.
    pub fn posture() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        FeatureSchema {
            names: s(&["egg", "heart_rate", "respiration_rate", "spo2"]),
            units: s(&["dimensionless", "beats/min", "breaths/min", "percent"]),
            class_names: s(&["right", "supine", "left"]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.names.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        if self.units.len() != self.names.len() {
            return Err(Error::Schema(format!(
                "{} feature names but {} units",
                self.names.len(),
                self.units.len()
            )));
        }
        for (i, name) in self.names.iter().enumerate() {
            if name.is_empty() || name == LABEL_COLUMN {
                return Err(Error::Schema(format!("invalid feature name {name:?}")));
            }
            if self.names[..i].contains(name) {
                return Err(Error::Schema(format!("duplicate feature name {name:?}")));
            }
        }
        if self.class_names.len() < 2 {
            return Err(Error::Schema("need at least two classes".into()));
        }
        for (i, name) in self.class_names.iter().enumerate() {
            if self.class_names[..i].contains(name) {
                return Err(Error::Schema(format!("duplicate class name {name:?}")));
            }
            if name.parse::<usize>().is_ok() {
                return Err(Error::Schema(format!(
                    "class name {name:?} would be ambiguous with an integer code"
                )));
            }
        }
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn class_name(&self, class: usize) -> Option<&str> {
        self.class_names.get(class).map(String::as_str)
    }
}

impl Default for FeatureSchema {
    fn default() -> Self {
        Self::posture()
    }
}

/// Dense row-major matrix of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn new(n_cols: usize) -> Self {
        Matrix {
            n_cols,
            values: Vec::new(),
        }
    }

    pub fn from_flat(n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if n_cols == 0 || !values.len().is_multiple_of(n_cols) {
            return Err(Error::Schema(format!(
                "{} values cannot form rows of width {n_cols}",
                values.len()
            )));
        }
        Ok(Matrix { n_cols, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(n_cols: usize, rows: &[R]) -> Result<Self> {
        let mut m = Matrix::new(n_cols);
        for row in rows {
            m.push_row(row.as_ref())?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_cols {
            return Err(Error::Schema(format!(
                "row of length {} in a matrix of width {}",
                row.len(),
                self.n_cols
            )));
        }
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.values.len().checked_div(self.n_cols).unwrap_or(0)
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols.max(1))
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// New matrix holding the given rows, in order (repeats allowed).
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut values = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Matrix {
            n_cols: self.n_cols,
            values,
        }
    }
}

/// Validated feature matrix plus integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    features: Matrix,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, features: Matrix, labels: Vec<usize>) -> Result<Self> {
        schema.validate()?;
        if features.n_cols() != schema.n_features() {
            return Err(Error::Schema(format!(
                "matrix has {} columns, schema has {} features",
                features.n_cols(),
                schema.n_features()
            )));
        }
        if features.n_rows() != labels.len() {
            return Err(Error::Schema(format!(
                "{} feature rows but {} labels",
                features.n_rows(),
                labels.len()
            )));
        }
        for (i, row) in features.rows().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: i + 1,
                    column: schema.names()[j].clone(),
                    message: format!("non-finite value {}", row[j]),
                });
            }
        }
        let k = schema.n_classes();
        if let Some(i) = labels.iter().position(|&l| l >= k) {
            return Err(Error::Label {
                row: i + 1,
                value: labels[i].to_string(),
            });
        }
        Ok(Dataset {
            schema,
            features,
            labels,
        })
    }

    pub fn empty(schema: FeatureSchema) -> Self {
        let n = schema.n_features();
        Dataset {
            schema,
            features: Matrix::new(n),
            labels: Vec::new(),
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.schema.n_classes()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub(crate) fn with_features(&self, features: Matrix) -> Dataset {
        debug_assert_eq!(features.n_rows(), self.labels.len());
        Dataset {
            schema: self.schema.clone(),
            features,
            labels: self.labels.clone(),
        }
    }

    /// SHA-256 over the feature bits and labels, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for name in self.schema.names() {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
        }
        for (row, &label) in self.features.rows().zip(&self.labels) {
            for v in row {
                hasher.update(v.to_bits().to_le_bytes());
            }
            hasher.update((label as u64).to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn posture_schema_is_valid() {
        let s = FeatureSchema::posture();
        s.validate().unwrap();
        assert_eq!(s.n_features(), 4);
        assert_eq!(s.n_classes(), 3);
        assert_eq!(s.class_index("supine"), Some(1));
    }

    #[test]
    fn duplicate_feature_names_rejected() {
        let names = vec!["a".to_string(), "a".to_string()];
        let units = vec![String::new(), String::new()];
        let classes = vec!["x".to_string(), "y".to_string()];
        assert!(matches!(
            FeatureSchema::new(names, units, classes),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn dataset_rejects_non_finite_and_bad_labels() {
        let schema = FeatureSchema::posture();
        let m = Matrix::from_rows(4, &[[1.0, 2.0, f64::NAN, 4.0]]).unwrap();
        assert!(matches!(
            Dataset::new(schema.clone(), m, vec![0]),
            Err(Error::Parse { row: 1, .. })
        ));
        let m = Matrix::from_rows(4, &[[1.0, 2.0, 3.0, 4.0]]).unwrap();
        assert!(matches!(
            Dataset::new(schema.clone(), m.clone(), vec![3]),
            Err(Error::Label { .. })
        ));
        assert!(Dataset::new(schema, m, vec![0, 1]).is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let schema = FeatureSchema::posture();
        let m = Matrix::from_rows(4, &[[1.0, 2.0, 3.0, 4.0]]).unwrap();
        let a = Dataset::new(schema.clone(), m.clone(), vec![0]).unwrap();
        let b = Dataset::new(schema, m, vec![1]).unwrap();
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }
}
