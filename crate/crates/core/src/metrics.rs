//! Confusion matrices, macro-averaged metrics, and the layered report.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use crate::dataset::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::stack::{Algorithm, PerAlgorithm, StackMode};

/// `counts[true][predicted]`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<usize>>) -> Result<Self> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|r| r.len() != k) {
            return Err(Error::Domain(
                "confusion matrix must be square and non-empty".into(),
            ));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    fn row_sum(&self, c: usize) -> usize {
        self.counts[c].iter().sum()
    }

    fn col_sum(&self, c: usize) -> usize {
        self.counts.iter().map(|r| r[c]).sum()
    }

    /// Per-class `(precision, recall, f1)` with 0/0 taken as 0.
    pub fn per_class(&self) -> Vec<(f64, f64, f64)> {
        (0..self.n_classes())
            .map(|c| {
                let tp = self.counts[c][c] as f64;
                let ratio = |den: usize| if den == 0 { 0.0 } else { tp / den as f64 };
                let p = ratio(self.col_sum(c));
                let r = ratio(self.row_sum(c));
                let f1 = if p + r == 0.0 {
                    0.0
                } else {
                    2.0 * p * r / (p + r)
                };
                (p, r, f1)
            })
            .collect()
    }
}

pub fn confusion_matrix(
    y_true: &[usize],
    y_pred: &[usize],
    n_classes: usize,
) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Domain(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::Domain("confusion matrix of zero rows".into()));
    }
    let mut counts = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::Domain(format!(
                "class id ({t}, {p}) outside {n_classes} classes"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

/// Accuracy plus precision, recall and F1 averaged uniformly over all classes.
pub fn metric_set(cm: &ConfusionMatrix) -> Result<MetricSet> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Domain("metrics of an empty confusion matrix".into()));
    }
    let per_class = cm.per_class();
    let k = per_class.len() as f64;
    let mean = |f: fn(&(f64, f64, f64)) -> f64| per_class.iter().map(f).sum::<f64>() / k;
    Ok(MetricSet {
        accuracy: cm.trace() as f64 / total as f64,
        macro_precision: mean(|c| c.0),
        macro_recall: mean(|c| c.1),
        macro_f1: mean(|c| c.2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    #[serde(flatten)]
    pub metrics: MetricSet,
    pub confusion: ConfusionMatrix,
}

impl Evaluation {
    pub fn from_predictions(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<Self> {
        let confusion = confusion_matrix(y_true, y_pred, n_classes)?;
        Ok(Evaluation {
            metrics: metric_set(&confusion)?,
            confusion,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_train: Option<usize>,
    pub n_test: usize,
    pub seed: u64,
    pub mode: StackMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layers {
    #[serde(rename = "1")]
    pub first: PerAlgorithm<Evaluation>,
    #[serde(rename = "2")]
    pub second: PerAlgorithm<Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub provenance: Provenance,
    pub layers: Layers,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub correlation: Option<CorrelationMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Table,
}

pub fn render_report(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => render_json(report),
        ReportFormat::Table => render_table(report),
    }
}

/// Percentage with two decimals, rounding half away from zero. Whole
/// percentages drop the decimals: `1.0` renders as `100%`.
pub fn format_percent(fraction: f64) -> String {
    let hundredths = (fraction * 10_000.0).round();
    if hundredths % 100.0 == 0.0 {
        format!("{}%", hundredths / 100.0)
    } else {
        format!("{:.2}%", hundredths / 100.0)
    }
}

fn render_table(report: &MetricsReport) -> String {
    let p = &report.provenance;
    let mut out = String::new();
    let _ = write!(out, "mode: {}  seed: {}", p.mode.as_str(), p.seed);
    if let Some(n) = p.n_train {
        let _ = write!(out, "  train: {n}");
    }
    let _ = writeln!(out, "  test: {}", p.n_test);
    for (name, layer) in [
        ("Layer 1", &report.layers.first),
        ("Layer 2", &report.layers.second),
    ] {
        let _ = writeln!(out, "\n{name}");
        let _ = writeln!(
            out,
            "{:<18} {:>9} {:>10} {:>9} {:>9}",
            "Algorithm", "Accuracy", "Precision", "F1 score", "Recall"
        );
        for alg in Algorithm::ALL {
            let m = &layer.get(alg).metrics;
            let _ = writeln!(
                out,
                "{:<18} {:>9} {:>10} {:>9} {:>9}",
                alg.display_name(),
                format_percent(m.accuracy),
                format_percent(m.macro_precision),
                format_percent(m.macro_f1),
                format_percent(m.macro_recall),
            );
        }
    }
    if let Some(c) = &report.correlation {
        let _ = writeln!(out, "\nCorrelation");
        out.push_str(&c.render_table());
    }
    out
}

fn render_json(report: &MetricsReport) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloatFormatter::new());
    report
        .serialize(&mut ser)
        .expect("report serialization is infallible");
    let mut s = String::from_utf8(buf).expect("serde_json emits UTF-8");
    s.push('\n');
    s
}

/// Pretty-printed JSON with every float written to six decimals.
struct FixedFloatFormatter<'a> {
    inner: serde_json::ser::PrettyFormatter<'a>,
}

impl FixedFloatFormatter<'_> {
    fn new() -> Self {
        FixedFloatFormatter {
            inner: serde_json::ser::PrettyFormatter::with_indent(b"  "),
        }
    }
}

impl serde_json::ser::Formatter for FixedFloatFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        // avoid "-0.000000"
        let v = if (value * 1e6).round() == 0.0 {
            0.0
        } else {
            value
        };
        write!(writer, "{v:.6}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}
