use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Dataset, LABEL_COLUMN};
use crate::error::{Error, Result};

/// Symmetric Pearson matrix over the features plus the integer-coded label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[i][j])
    }

    /// Aligned plain-text table, three decimals.
    pub fn render_table(&self) -> String {
        let width = self
            .labels
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(7);
        let mut out = String::new();
        let _ = write!(out, "{:width$}", "");
        for l in &self.labels {
            let _ = write!(out, "  {l:>width$}");
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.values) {
            let _ = write!(out, "{l:<width$}");
            for v in row {
                let _ = write!(out, "  {v:>width$.3}");
            }
            out.push('\n');
        }
        out
    }
}

/// Pearson correlation. A zero-variance input correlates 0 with anything.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if is_constant(x) || is_constant(y) || sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

pub fn correlation_matrix(data: &Dataset) -> Result<CorrelationMatrix> {
    if data.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 2 rows, got {}",
            data.len()
        )));
    }
    let mut columns: Vec<Vec<f64>> = (0..data.features().n_cols())
        .map(|j| data.features().column(j).collect())
        .collect();
    columns.push(data.labels().iter().map(|&l| l as f64).collect());

    let mut labels: Vec<String> = data.schema().names().to_vec();
    labels.push(LABEL_COLUMN.to_string());

    let p = columns.len();
    let mut values = vec![vec![0.0; p]; p];
    for i in 0..p {
        values[i][i] = 1.0;
        for j in i + 1..p {
            let r = pearson(&columns[i], &columns[j]);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { labels, values })
}
