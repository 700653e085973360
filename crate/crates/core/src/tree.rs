//! CART-style classification tree with Gini impurity.
//!
//! Splits send a row left when `value < threshold`. Candidate thresholds are
//! midpoints between consecutive distinct values of a feature within the
//! node. Ties on gain go to the lowest feature index, then the lowest
//! threshold; ties on a leaf's class counts go to the lowest class id.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};

/// Gains closer than this are treated as equal when comparing candidates.
pub const GAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// A split is taken only when its gain is strictly greater than this.
    pub min_gain: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 6,
            min_samples_split: 2,
            min_gain: 0.0,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be ≥ 2".into()));
        }
        if self.min_gain.is_nan() || self.min_gain < 0.0 {
            return Err(Error::Config("min_gain must be ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature_index: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class_counts: Vec<usize>,
    },
}

/// Fitted classification tree stored as a node array; node 0 is the root and
/// children always sit at higher indices than their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    n_features: usize,
    n_classes: usize,
    nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature_index: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Gini impurity `1 − Σ p_k²` of a class-count vector.
pub fn gini(class_counts: &[usize]) -> Result<f64> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(Error::Domain("gini of an empty node".into()));
    }
    Ok(gini_unchecked(class_counts, total))
}

#[inline]
fn gini_unchecked(counts: &[usize], total: usize) -> f64 {
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

/// Best Gini split over all features of `features`, or `None` when no
/// candidate has gain greater than `min_gain`.
pub fn best_split(
    features: &Matrix,
    labels: &[usize],
    n_classes: usize,
    min_gain: f64,
) -> Option<SplitCandidate> {
    let rows: Vec<usize> = (0..features.n_rows()).collect();
    let all: Vec<usize> = (0..features.n_cols()).collect();
    best_split_on(features, labels, n_classes, &rows, &all, min_gain)
}

pub(crate) fn best_split_on(
    features: &Matrix,
    labels: &[usize],
    n_classes: usize,
    rows: &[usize],
    allowed: &[usize],
    min_gain: f64,
) -> Option<SplitCandidate> {
    let n = rows.len();
    if n < 2 {
        return None;
    }
    let mut parent = vec![0usize; n_classes];
    for &r in rows {
        parent[labels[r]] += 1;
    }
    let parent_gini = gini_unchecked(&parent, n);
    if parent_gini == 0.0 {
        return None;
    }

    let mut best: Option<SplitCandidate> = None;
    let mut order: Vec<usize> = rows.to_vec();
    let mut left = vec![0usize; n_classes];
    let mut right = vec![0usize; n_classes];

    for &f in allowed {
        order.sort_by(|&a, &b| features.get(a, f).total_cmp(&features.get(b, f)));
        left.iter_mut().for_each(|c| *c = 0);
        right.copy_from_slice(&parent);
        for i in 0..n - 1 {
            let label = labels[order[i]];
            left[label] += 1;
            right[label] -= 1;
            let lo = features.get(order[i], f);
            let hi = features.get(order[i + 1], f);
            if lo == hi {
                continue;
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            let weighted = (n_left as f64 * gini_unchecked(&left, n_left)
                + n_right as f64 * gini_unchecked(&right, n_right))
                / n as f64;
            let gain = parent_gini - weighted;
            let better = match best {
                None => true,
                Some(b) => gain > b.gain + GAIN_TOLERANCE,
            };
            if better {
                best = Some(SplitCandidate {
                    feature_index: f,
                    threshold: midpoint(lo, hi),
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > min_gain + GAIN_TOLERANCE)
}

/// Midpoint of two distinct values, nudged to `hi` when rounding would put it
/// on `lo` (which would send `lo` right).
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

impl DecisionTree {
    pub fn fit(train: &Dataset, config: &TreeConfig) -> Result<Self> {
        Self::fit_matrix(train.features(), train.labels(), train.n_classes(), config)
    }

    pub fn fit_matrix(
        features: &Matrix,
        labels: &[usize],
        n_classes: usize,
        config: &TreeConfig,
    ) -> Result<Self> {
        let rows: Vec<usize> = (0..features.n_rows()).collect();
        let all: Vec<usize> = (0..features.n_cols()).collect();
        Self::fit_rows(features, labels, n_classes, rows, &all, config)
    }

    /// Fits on a multiset of row indices, searching only `allowed` features.
    pub(crate) fn fit_rows(
        features: &Matrix,
        labels: &[usize],
        n_classes: usize,
        rows: Vec<usize>,
        allowed: &[usize],
        config: &TreeConfig,
    ) -> Result<Self> {
        config.validate()?;
        if rows.is_empty() {
            return Err(Error::Fit("cannot fit a tree on zero rows".into()));
        }
        if labels.len() != features.n_rows() {
            return Err(Error::Fit("feature and label counts differ".into()));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Fit(format!("label {l} outside {n_classes} classes")));
        }
        let mut builder = Builder {
            features,
            labels,
            n_classes,
            allowed,
            config,
            nodes: Vec::new(),
        };
        builder.grow(rows, 0);
        Ok(DecisionTree {
            n_features: features.n_cols(),
            n_classes,
            nodes: builder.nodes,
        })
    }

    /// Builds a tree from raw nodes, checking structure.
    pub fn from_nodes(n_features: usize, n_classes: usize, nodes: Vec<TreeNode>) -> Result<Self> {
        let tree = DecisionTree {
            n_features,
            n_classes,
            nodes,
        };
        tree.validate()?;
        Ok(tree)
    }

    pub fn single_leaf(n_features: usize, class_counts: Vec<usize>) -> Result<Self> {
        let n_classes = class_counts.len();
        Self::from_nodes(n_features, n_classes, vec![TreeNode::Leaf { class_counts }])
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first()? {
            TreeNode::Split {
                feature_index,
                threshold,
                ..
            } => Some((*feature_index, *threshold)),
            TreeNode::Leaf { .. } => None,
        }
    }

    /// Class counts of the leaf reached by `row`.
    pub fn leaf_counts(&self, row: &[f64]) -> Result<&[usize]> {
        if row.len() != self.n_features {
            return Err(Error::Predict(format!(
                "row has {} features, tree expects {}",
                row.len(),
                self.n_features
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Predict(format!("feature {j} is not finite")));
        }
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { class_counts } => return Ok(class_counts),
                TreeNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature_index] < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        Ok(argmax_counts(self.leaf_counts(row)?))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| {
            Err(Error::ModelLoad {
                field: "nodes".into(),
                message: m,
            })
        };
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        if self.n_classes < 2 {
            return bad("tree needs at least two classes".into());
        }
        let mut referenced = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                TreeNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature_index >= self.n_features {
                        return bad(format!("node {i}: feature {feature_index} out of range"));
                    }
                    if !threshold.is_finite() {
                        return bad(format!("node {i}: threshold not finite"));
                    }
                    for &c in [left, right] {
                        if c <= i || c >= self.nodes.len() {
                            return bad(format!("node {i}: invalid child {c}"));
                        }
                        if referenced[c] {
                            return bad(format!("node {c} has two parents"));
                        }
                        referenced[c] = true;
                    }
                }
                TreeNode::Leaf { class_counts } => {
                    if class_counts.len() != self.n_classes {
                        return bad(format!(
                            "node {i}: expected {} class counts",
                            self.n_classes
                        ));
                    }
                    if class_counts.iter().sum::<usize>() == 0 {
                        return bad(format!("node {i}: empty leaf"));
                    }
                }
            }
        }
        if let Some(i) = referenced.iter().skip(1).position(|r| !r) {
            return bad(format!("node {} is unreachable", i + 1));
        }
        Ok(())
    }
}

/// Index of the largest count, lowest index on ties.
pub(crate) fn argmax_counts(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

struct Builder<'a> {
    features: &'a Matrix,
    labels: &'a [usize],
    n_classes: usize,
    allowed: &'a [usize],
    config: &'a TreeConfig,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &r in &rows {
            counts[self.labels[r]] += 1;
        }
        let idx = self.nodes.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split =
            if depth >= self.config.max_depth || rows.len() < self.config.min_samples_split || pure
            {
                None
            } else {
                best_split_on(
                    self.features,
                    self.labels,
                    self.n_classes,
                    &rows,
                    self.allowed,
                    self.config.min_gain,
                )
            };
        self.nodes.push(TreeNode::Leaf {
            class_counts: counts,
        });
        let Some(s) = split else {
            return idx;
        };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.features.get(r, s.feature_index) < s.threshold);
        let left = self.grow(l_rows, depth + 1);
        let right = self.grow(r_rows, depth + 1);
        self.nodes[idx] = TreeNode::Split {
            feature_index: s.feature_index,
            threshold: s.threshold,
            left,
            right,
        };
        idx
    }
}

pub fn fit_tree(train: &Dataset, config: &TreeConfig) -> Result<DecisionTree> {
    DecisionTree::fit(train, config)
}

pub fn predict_tree(tree: &DecisionTree, row: &[f64]) -> Result<usize> {
    tree.predict(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows[0].len(), rows).unwrap()
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[5, 0, 0]).unwrap(), 0.0);
        assert_abs_diff_eq!(gini(&[1, 1, 1]).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gini(&[3, 1]).unwrap(), 0.375, epsilon = 1e-15);
        assert!(matches!(gini(&[0, 0, 0]), Err(Error::Domain(_))));
    }

    #[test]
    fn best_split_one_feature() {
        let x = m(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let s = best_split(&x, &[0, 0, 1, 1], 2, 0.0).unwrap();
        assert_eq!(s.feature_index, 0);
        assert_eq!(s.threshold, 2.5);
        assert_abs_diff_eq!(s.gain, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn best_split_pure_and_xor() {
        let x = m(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        assert!(best_split(&x, &[1, 1, 1, 1], 2, 0.0).is_none());
        let xor = m(&[&[0.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]]);
        assert!(best_split(&xor, &[0, 1, 1, 0], 2, 0.0).is_none());
    }

    #[test]
    fn pure_data_is_single_leaf() {
        let x = m(&[&[1.0], &[2.0], &[3.0]]);
        let t = DecisionTree::fit_matrix(&x, &[2, 2, 2], 3, &TreeConfig::default()).unwrap();
        assert_eq!(t.nodes().len(), 1);
        for r in x.rows() {
            assert_eq!(t.predict(r).unwrap(), 2);
        }
    }

    #[test]
    fn depth_zero_is_majority_leaf() {
        let x = m(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let cfg = TreeConfig {
            max_depth: 0,
            ..TreeConfig::default()
        };
        let t = DecisionTree::fit_matrix(&x, &[0, 1, 1, 0], 2, &cfg).unwrap();
        assert_eq!(t.nodes().len(), 1);
        // counts [2,2] → lowest class
        assert_eq!(t.predict(&[9.0]).unwrap(), 0);
        let t = DecisionTree::fit_matrix(&x, &[0, 1, 1, 1], 2, &cfg).unwrap();
        assert_eq!(t.predict(&[0.0]).unwrap(), 1);
    }

    #[test]
    fn xor_duplicated_stays_at_half_accuracy() {
        let pts: [(&[f64], usize); 4] = [
            (&[0.0, 0.0], 0),
            (&[0.0, 1.0], 1),
            (&[1.0, 0.0], 1),
            (&[1.0, 1.0], 0),
        ];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..3 {
            for (r, l) in pts {
                rows.push(r);
                labels.push(l);
            }
        }
        let x = m(&rows);
        let cfg = TreeConfig {
            max_depth: 2,
            ..TreeConfig::default()
        };
        let t = DecisionTree::fit_matrix(&x, &labels, 2, &cfg).unwrap();
        let correct = x
            .rows()
            .zip(&labels)
            .filter(|(r, &l)| t.predict(r).unwrap() == l)
            .count();
        assert_eq!(correct as f64 / labels.len() as f64, 0.5);
    }

    #[test]
    fn predict_traces_split() {
        let x = m(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let t = DecisionTree::fit_matrix(&x, &[0, 0, 1, 1], 2, &TreeConfig::default()).unwrap();
        assert_eq!(t.root_split(), Some((0, 2.5)));
        assert_eq!(t.predict(&[1.0]).unwrap(), 0);
        assert_eq!(t.predict(&[3.7]).unwrap(), 1);
        // strict less-than goes left
        assert_eq!(t.predict(&[2.5]).unwrap(), 1);
    }

    #[test]
    fn leaf_tie_break() {
        let t = DecisionTree::single_leaf(4, vec![0, 7, 0]).unwrap();
        assert_eq!(t.predict(&[0.0; 4]).unwrap(), 1);
        let t = DecisionTree::single_leaf(4, vec![2, 2, 0]).unwrap();
        assert_eq!(t.predict(&[0.0; 4]).unwrap(), 0);
    }

    #[test]
    fn predict_rejects_bad_rows() {
        let t = DecisionTree::single_leaf(2, vec![1, 0]).unwrap();
        assert!(matches!(
            t.predict(&[f64::NAN, 0.0]),
            Err(Error::Predict(_))
        ));
        assert!(matches!(t.predict(&[0.0]), Err(Error::Predict(_))));
    }

    #[test]
    fn empty_train_is_fit_error() {
        let x = Matrix::new(2);
        assert!(matches!(
            DecisionTree::fit_matrix(&x, &[], 2, &TreeConfig::default()),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn structural_validation() {
        let leaf = |c: Vec<usize>| TreeNode::Leaf { class_counts: c };
        let cyclic = vec![
            TreeNode::Split {
                feature_index: 0,
                threshold: 0.5,
                left: 0,
                right: 1,
            },
            leaf(vec![1, 0]),
        ];
        assert!(DecisionTree::from_nodes(1, 2, cyclic).is_err());
        assert!(DecisionTree::from_nodes(1, 2, vec![leaf(vec![0, 0])]).is_err());
        let ok = vec![
            TreeNode::Split {
                feature_index: 0,
                threshold: 0.5,
                left: 1,
                right: 2,
            },
            leaf(vec![1, 0]),
            leaf(vec![0, 1]),
        ];
        let t = DecisionTree::from_nodes(1, 2, ok).unwrap();
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn midpoint_never_lands_on_lower_value() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let t = midpoint(lo, hi);
        assert!(lo < t && t <= hi);
    }

    proptest! {
        #[test]
        fn gini_ignores_zero_classes(counts in proptest::collection::vec(0usize..50, 1..6), extra in 0usize..4) {
            prop_assume!(counts.iter().sum::<usize>() > 0);
            let mut padded = counts.clone();
            padded.extend(std::iter::repeat_n(0, extra));
            prop_assert_eq!(gini(&counts).unwrap(), gini(&padded).unwrap());
        }

        // With one distinct-valued feature every impure node has a split
        // with a pure child, hence positive gain. XOR-like layouts without
        // such a feature can stall at zero gain (see the duplicated-XOR test).
        #[test]
        fn unlimited_depth_fits_distinct_data(
            pts in proptest::collection::btree_map(0i32..500, (0i32..4, 0usize..3), 1..80)
        ) {
            let rows: Vec<[f64; 2]> = pts.iter().map(|(&a, &(b, _))| [b as f64, a as f64]).collect();
            let labels: Vec<usize> = pts.values().map(|&(_, l)| l).collect();
            let x = Matrix::from_rows(2, &rows).unwrap();
            let cfg = TreeConfig { max_depth: usize::MAX, ..TreeConfig::default() };
            let t = DecisionTree::fit_matrix(&x, &labels, 3, &cfg).unwrap();
            for (r, &l) in x.rows().zip(&labels) {
                prop_assert_eq!(t.predict(r).unwrap(), l);
            }
        }
    }
}
