use serde::{Deserialize, Serialize};

use super::{Dataset, Matrix};
use crate::error::{Error, Result};

/// Per-column standardization parameters (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ScalerParams {
    pub fn fit(features: &Matrix) -> Result<Self> {
        let n = features.n_rows();
        if n == 0 {
            return Err(Error::Fit("cannot fit a scaler on zero rows".into()));
        }
        let mut means = Vec::with_capacity(features.n_cols());
        let mut stds = Vec::with_capacity(features.n_cols());
        for j in 0..features.n_cols() {
            let mean = features.column(j).sum::<f64>() / n as f64;
            let (lo, hi) = features
                .column(j)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            // constant columns get an exact zero so they scale to 0, not ±1
            let std = if lo == hi {
                0.0
            } else {
                let var = features.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                var.sqrt()
            };
            means.push(if lo == hi { lo } else { mean });
            stds.push(std);
        }
        Ok(ScalerParams { means, stds })
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.means.len() {
            return Err(Error::Schema(format!(
                "row has {} features, scaler was fitted on {}",
                row.len(),
                self.means.len()
            )));
        }
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&x, (&m, &s))| if s == 0.0 { 0.0 } else { (x - m) / s })
            .collect())
    }

    pub fn transform(&self, features: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::new(features.n_cols());
        for row in features.rows() {
            out.push_row(&self.transform_row(row)?)?;
        }
        Ok(out)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.means.len() != self.stds.len() {
            return Err(Error::Schema("scaler means/stds length mismatch".into()));
        }
        if self.means.iter().any(|m| !m.is_finite())
            || self.stds.iter().any(|s| !s.is_finite() || *s < 0.0)
        {
            return Err(Error::Schema(
                "scaler parameters must be finite, stds ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

pub fn fit_scaler(train: &Dataset) -> Result<ScalerParams> {
    ScalerParams::fit(train.features())
}

/// Standardizes every feature; labels pass through untouched.
pub fn apply_scaler(params: &ScalerParams, data: &Dataset) -> Result<Dataset> {
    Ok(data.with_features(params.transform(data.features())?))
}
