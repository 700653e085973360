//! Second-order gradient boosting with a softmax objective.
//!
//! Each round fits one regression tree per class on that class's gradient and
//! hessian. Trees grow depth-first to `max_depth` on raw second-order gain;
//! the split penalty `gamma` is applied only afterwards, in a bottom-up pass
//! that collapses any split whose gain falls below it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::tree::{midpoint, GAIN_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub n_rounds: usize,
    /// Learning rate in (0, 1].
    pub eta: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum gain a split must keep to survive pruning.
    pub gamma: f64,
    pub max_depth: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            n_rounds: 50,
            eta: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            max_depth: 3,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(Error::Config("n_rounds must be ≥ 1".into()));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Config(format!("eta {} outside (0, 1]", self.eta)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config("lambda must be finite and ≥ 0".into()));
        }
        // gamma may be +inf: prune everything
        if self.gamma.is_nan() || self.gamma < 0.0 {
            return Err(Error::Config("gamma must be ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegressionNode {
    Split {
        feature_index: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<RegressionNode>,
}

impl RegressionTree {
    pub fn from_nodes(nodes: Vec<RegressionNode>) -> Result<Self> {
        let t = RegressionTree { nodes };
        t.validate(usize::MAX)?;
        Ok(t)
    }

    pub fn nodes(&self) -> &[RegressionNode] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, RegressionNode::Leaf { .. }))
            .count()
    }

    /// Leaf weight reached by `row`. Callers check arity and finiteness.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                RegressionNode::Leaf { weight } => return *weight,
                RegressionNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature_index] < *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub(crate) fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |m: String| {
            Err(Error::ModelLoad {
                field: "trees".into(),
                message: m,
            })
        };
        if self.nodes.is_empty() {
            return bad("regression tree has no nodes".into());
        }
        let mut referenced = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                RegressionNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature_index >= n_features || !threshold.is_finite() {
                        return bad(format!("node {i}: invalid split"));
                    }
                    for &c in [left, right] {
                        if c <= i || c >= self.nodes.len() || referenced[c] {
                            return bad(format!("node {i}: invalid child {c}"));
                        }
                        referenced[c] = true;
                    }
                }
                RegressionNode::Leaf { weight } => {
                    if !weight.is_finite() {
                        return bad(format!("node {i}: weight not finite"));
                    }
                }
            }
        }
        if referenced.iter().skip(1).any(|r| !r) {
            return bad("unreachable node".into());
        }
        Ok(())
    }
}

/// Softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Per-class gradient `p_k − 1[k = y]` and diagonal hessian `p_k (1 − p_k)`
/// of the softmax cross-entropy.
pub fn grad_hess(probs: &[f64], true_class: usize) -> (Vec<f64>, Vec<f64>) {
    let g = probs
        .iter()
        .enumerate()
        .map(|(k, &p)| if k == true_class { p - 1.0 } else { p })
        .collect();
    let h = probs.iter().map(|&p| p * (1.0 - p)).collect();
    (g, h)
}

/// Newton step `−G / (H + λ)`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> Result<f64> {
    let denom = h + lambda;
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::DegenerateLeaf);
    }
    Ok(-g / denom)
}

/// `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − (G_L+G_R)²/(H_L+H_R+λ)] − γ`
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

enum GrowNode {
    Split {
        feature_index: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
        g: f64,
        h: f64,
    },
    Leaf {
        g: f64,
        h: f64,
    },
}

struct Grower<'a> {
    features: &'a Matrix,
    grad: &'a [f64],
    hess: &'a [f64],
    config: &'a BoostConfig,
    nodes: Vec<GrowNode>,
}

impl Grower<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        let idx = self.nodes.len();
        self.nodes.push(GrowNode::Leaf { g, h });
        if depth >= self.config.max_depth || rows.len() < 2 {
            return idx;
        }
        let Some((feature_index, threshold, gain)) = self.best_split(&rows, g, h) else {
            return idx;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.features.get(i, feature_index) < threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[idx] = GrowNode::Split {
            feature_index,
            threshold,
            left,
            right,
            gain,
            g,
            h,
        };
        idx
    }

    fn best_split(&self, rows: &[usize], g: f64, h: f64) -> Option<(usize, f64, f64)> {
        let lambda = self.config.lambda;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = rows.to_vec();
        for f in 0..self.features.n_cols() {
            order.sort_by(|&a, &b| self.features.get(a, f).total_cmp(&self.features.get(b, f)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..order.len() - 1 {
                gl += self.grad[order[i]];
                hl += self.hess[order[i]];
                let lo = self.features.get(order[i], f);
                let hi = self.features.get(order[i + 1], f);
                if lo == hi {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if !(hl + lambda > 0.0 && hr.max(0.0) + lambda > 0.0) {
                    continue;
                }
                let gain = split_gain(gl, hl, gr, hr.max(0.0), lambda, 0.0);
                if !gain.is_finite() {
                    continue;
                }
                if best.is_none_or(|(_, _, b)| gain > b + GAIN_TOLERANCE) {
                    best = Some((f, midpoint(lo, hi), gain));
                }
            }
        }
        best.filter(|&(_, _, gain)| gain > GAIN_TOLERANCE)
    }

    /// Collapses, bottom-up, every split with two leaf children whose gain is
    /// below gamma. Returns whether `i` is a leaf afterwards.
    fn prune(&mut self, i: usize, gamma: f64) -> bool {
        let (left, right, gain, g, h) = match self.nodes[i] {
            GrowNode::Leaf { .. } => return true,
            GrowNode::Split {
                left,
                right,
                gain,
                g,
                h,
                ..
            } => (left, right, gain, g, h),
        };
        let l = self.prune(left, gamma);
        let r = self.prune(right, gamma);
        if l && r && gain < gamma {
            self.nodes[i] = GrowNode::Leaf { g, h };
            true
        } else {
            false
        }
    }

    fn finish(&self, lambda: f64) -> Result<RegressionTree> {
        let mut out = Vec::new();
        self.emit(0, lambda, &mut out)?;
        Ok(RegressionTree { nodes: out })
    }

    fn emit(&self, i: usize, lambda: f64, out: &mut Vec<RegressionNode>) -> Result<usize> {
        let idx = out.len();
        match self.nodes[i] {
            GrowNode::Leaf { g, h } => {
                out.push(RegressionNode::Leaf {
                    weight: leaf_weight(g, h, lambda)?,
                });
            }
            GrowNode::Split {
                feature_index,
                threshold,
                left,
                right,
                ..
            } => {
                out.push(RegressionNode::Leaf { weight: 0.0 });
                let l = self.emit(left, lambda, out)?;
                let r = self.emit(right, lambda, out)?;
                out[idx] = RegressionNode::Split {
                    feature_index,
                    threshold,
                    left: l,
                    right: r,
                };
            }
        }
        Ok(idx)
    }
}

/// Fits one regression tree to per-row gradients and hessians.
pub fn fit_round_tree(
    grad: &[f64],
    hess: &[f64],
    features: &Matrix,
    config: &BoostConfig,
) -> Result<RegressionTree> {
    let n = features.n_rows();
    if grad.len() != n || hess.len() != n {
        return Err(Error::Fit(format!(
            "{n} rows but {} gradients and {} hessians",
            grad.len(),
            hess.len()
        )));
    }
    if n == 0 {
        return Err(Error::Fit(
            "cannot fit a regression tree on zero rows".into(),
        ));
    }
    let mut grower = Grower {
        features,
        grad,
        hess,
        config,
        nodes: Vec::new(),
    };
    grower.grow((0..n).collect(), 0);
    grower.prune(0, config.gamma);
    grower.finish(config.lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    n_features: usize,
    base_score: f64,
    config: BoostConfig,
    /// `trees[class][round]`
    trees: Vec<Vec<RegressionTree>>,
}

/// Mean softmax cross-entropy of `logits` rows against `labels`.
pub fn log_loss(logits: &[Vec<f64>], labels: &[usize]) -> f64 {
    let total: f64 = logits
        .iter()
        .zip(labels)
        .map(|(z, &y)| -softmax(z)[y].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / labels.len() as f64
}

impl BoostedModel {
    pub fn fit(train: &Dataset, config: &BoostConfig) -> Result<Self> {
        Self::fit_matrix(train.features(), train.labels(), train.n_classes(), config)
    }

    pub fn fit_matrix(
        features: &Matrix,
        labels: &[usize],
        n_classes: usize,
        config: &BoostConfig,
    ) -> Result<Self> {
        Ok(Self::fit_with_history(features, labels, n_classes, config)?.0)
    }

    /// Fits and also returns the training log-loss before round 1 and after
    /// every round (`n_rounds + 1` values).
    pub fn fit_with_history(
        features: &Matrix,
        labels: &[usize],
        n_classes: usize,
        config: &BoostConfig,
    ) -> Result<(Self, Vec<f64>)> {
        config.validate()?;
        let n = features.n_rows();
        if n == 0 {
            return Err(Error::Fit("cannot boost on zero rows".into()));
        }
        if n_classes < 2 {
            return Err(Error::Fit("boosting needs at least two classes".into()));
        }
        if labels.len() != n || labels.iter().any(|&l| l >= n_classes) {
            return Err(Error::Fit("labels do not match rows or classes".into()));
        }

        let base_score = 0.0;
        let mut logits = vec![vec![base_score; n_classes]; n];
        let mut trees: Vec<Vec<RegressionTree>> =
            vec![Vec::with_capacity(config.n_rounds); n_classes];
        let mut history = Vec::with_capacity(config.n_rounds + 1);
        history.push(log_loss(&logits, labels));

        for _ in 0..config.n_rounds {
            let mut grads = vec![vec![0.0; n]; n_classes];
            let mut hess = vec![vec![0.0; n]; n_classes];
            for (i, z) in logits.iter().enumerate() {
                let (g, h) = grad_hess(&softmax(z), labels[i]);
                for k in 0..n_classes {
                    grads[k][i] = g[k];
                    hess[k][i] = h[k];
                }
            }
            let round: Vec<RegressionTree> = (0..n_classes)
                .into_par_iter()
                .map(|k| fit_round_tree(&grads[k], &hess[k], features, config))
                .collect::<Result<_>>()?;
            for (k, tree) in round.into_iter().enumerate() {
                for (i, z) in logits.iter_mut().enumerate() {
                    z[k] += config.eta * tree.predict(features.row(i));
                }
                trees[k].push(tree);
            }
            history.push(log_loss(&logits, labels));
        }

        Ok((
            BoostedModel {
                n_features: features.n_cols(),
                base_score,
                config: *config,
                trees,
            },
            history,
        ))
    }

    pub fn from_parts(
        n_features: usize,
        base_score: f64,
        config: BoostConfig,
        trees: Vec<Vec<RegressionTree>>,
    ) -> Result<Self> {
        let m = BoostedModel {
            n_features,
            base_score,
            config,
            trees,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn config(&self) -> &BoostConfig {
        &self.config
    }

    pub fn n_classes(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[Vec<RegressionTree>] {
        &self.trees
    }

    pub fn margins(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features {
            return Err(Error::Predict(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.n_features
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Predict(format!("feature {j} is not finite")));
        }
        Ok(self
            .trees
            .iter()
            .map(|class_trees| {
                class_trees.iter().fold(self.base_score, |acc, t| {
                    acc + self.config.eta * t.predict(row)
                })
            })
            .collect())
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.margins(row)?))
    }

    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        let m = self.margins(row)?;
        let mut best = 0;
        for k in 1..m.len() {
            if m[k] > m[best] {
                best = k;
            }
        }
        Ok(best)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |m: String| {
            Err(Error::ModelLoad {
                field: "trees".into(),
                message: m,
            })
        };
        self.config.validate()?;
        if self.trees.len() < 2 {
            return bad("need tree lists for at least two classes".into());
        }
        let rounds = self.trees[0].len();
        if self.trees.iter().any(|t| t.len() != rounds) {
            return bad("per-class tree lists differ in length".into());
        }
        if !self.base_score.is_finite() {
            return bad("base_score not finite".into());
        }
        for t in self.trees.iter().flatten() {
            t.validate(self.n_features)?;
        }
        Ok(())
    }
}

pub fn fit_boost(train: &Dataset, config: &BoostConfig) -> Result<BoostedModel> {
    BoostedModel::fit(train, config)
}

pub fn predict_boost(model: &BoostedModel, row: &[f64]) -> Result<usize> {
    model.predict(row)
}

pub fn predict_proba(model: &BoostedModel, row: &[f64]) -> Result<Vec<f64>> {
    model.predict_proba(row)
}
