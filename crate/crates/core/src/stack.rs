//! Two-layer stacked ensemble.
//!
//! Layer 1 fits a decision tree, a random forest and a boosted model on the
//! standardized training data. Layer 2 fits the same three learner types on
//! meta features built from the layer-1 predictions (one-hot), optionally
//! concatenated with the standardized features. Each layer-2 learner is
//! reported on its own; there is no final vote across them.
//!
//! How the layer-2 training predictions are produced depends on
//! [`StackMode`]: `Paper` reuses the layer-1 models' in-sample predictions,
//! `Oof` uses stratified k-fold out-of-fold predictions.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{BoostConfig, BoostedModel};
use crate::dataset::{Dataset, FeatureSchema, Matrix, ScalerParams};
use crate::error::{Error, Result};
use crate::forest::{Forest, ForestConfig};
use crate::metrics::{Evaluation, Layers, MetricsReport, Provenance};
use crate::rng;
use crate::tree::{DecisionTree, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Tree,
    Forest,
    Boost,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Tree, Algorithm::Forest, Algorithm::Boost];

    pub fn key(self) -> &'static str {
        match self {
            Algorithm::Tree => "tree",
            Algorithm::Forest => "forest",
            Algorithm::Boost => "boost",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::Tree => "Decision tree",
            Algorithm::Forest => "Random forest",
            Algorithm::Boost => "Gradient boosting",
        }
    }
}

/// One value per learner type, serialized as `{tree, forest, boost}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerAlgorithm<T> {
    pub tree: T,
    pub forest: T,
    pub boost: T,
}

impl<T> PerAlgorithm<T> {
    pub fn get(&self, alg: Algorithm) -> &T {
        match alg {
            Algorithm::Tree => &self.tree,
            Algorithm::Forest => &self.forest,
            Algorithm::Boost => &self.boost,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Algorithm, &T) -> U) -> PerAlgorithm<U> {
        PerAlgorithm {
            tree: f(Algorithm::Tree, &self.tree),
            forest: f(Algorithm::Forest, &self.forest),
            boost: f(Algorithm::Boost, &self.boost),
        }
    }

    pub fn try_map<U>(
        &self,
        mut f: impl FnMut(Algorithm, &T) -> Result<U>,
    ) -> Result<PerAlgorithm<U>> {
        Ok(PerAlgorithm {
            tree: f(Algorithm::Tree, &self.tree)?,
            forest: f(Algorithm::Forest, &self.forest)?,
            boost: f(Algorithm::Boost, &self.boost)?,
        })
    }

    pub fn values(&self) -> [&T; 3] {
        [&self.tree, &self.forest, &self.boost]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StackMode {
    /// Layer 2 trains on layer-1 predictions over layer 1's own training rows.
    Paper,
    /// Layer 2 trains on out-of-fold layer-1 predictions.
    Oof,
}

impl StackMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StackMode::Paper => "paper",
            StackMode::Oof => "oof",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaInput {
    /// Standardized features followed by the one-hot predictions.
    Augmented,
    PredictionsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct LearnerConfigs {
    pub tree: TreeConfig,
    pub forest: ForestConfig,
    pub boost: BoostConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    pub mode: StackMode,
    pub k_folds: usize,
    pub meta_input: MetaInput,
    /// Seeds fold assignment.
    pub seed: u64,
    pub base: LearnerConfigs,
    pub meta: LearnerConfigs,
}

impl Default for StackConfig {
    fn default() -> Self {
        StackConfig {
            mode: StackMode::Oof,
            k_folds: 5,
            meta_input: MetaInput::Augmented,
            seed: 42,
            base: LearnerConfigs::default(),
            meta: LearnerConfigs::default(),
        }
    }
}

impl StackConfig {
    /// Default configuration with every seed derived from `seed`.
    pub fn seeded(mode: StackMode, seed: u64) -> Self {
        let mut c = StackConfig {
            mode,
            seed,
            ..StackConfig::default()
        };
        c.base.forest.seed = rng::derive_seed(seed, 1);
        c.meta.forest.seed = rng::derive_seed(seed, 2);
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == StackMode::Oof && self.k_folds < 2 {
            return Err(Error::Config("k_folds must be ≥ 2 in oof mode".into()));
        }
        for cfg in [&self.base, &self.meta] {
            cfg.tree.validate()?;
            cfg.forest.tree.validate()?;
            cfg.boost.validate()?;
            if cfg.forest.n_trees == 0 {
                return Err(Error::Config("n_trees must be ≥ 1".into()));
            }
        }
        Ok(())
    }
}

/// Width of the meta feature vector.
pub fn meta_arity(n_features: usize, n_classes: usize, mode: MetaInput) -> usize {
    let one_hot = 3 * n_classes;
    match mode {
        MetaInput::Augmented => n_features + one_hot,
        MetaInput::PredictionsOnly => one_hot,
    }
}

/// Meta feature vector: optionally the (standardized) features, then one
/// one-hot block of length `n_classes` per learner in tree, forest, boost
/// order.
pub fn meta_features(
    original: &[f64],
    base_preds: &PerAlgorithm<usize>,
    n_classes: usize,
    mode: MetaInput,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(meta_arity(original.len(), n_classes, mode));
    if mode == MetaInput::Augmented {
        out.extend_from_slice(original);
    }
    for &p in base_preds.values() {
        debug_assert!(p < n_classes);
        out.extend((0..n_classes).map(|k| if k == p { 1.0 } else { 0.0 }));
    }
    out
}

/// The three fitted learners of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSet {
    pub tree: DecisionTree,
    pub forest: Forest,
    pub boost: BoostedModel,
}

impl LearnerSet {
    pub fn fit(
        features: &Matrix,
        labels: &[usize],
        n_classes: usize,
        configs: &LearnerConfigs,
    ) -> Result<Self> {
        let (tree, (forest, boost)) = rayon::join(
            || DecisionTree::fit_matrix(features, labels, n_classes, &configs.tree),
            || {
                rayon::join(
                    || Forest::fit_matrix(features, labels, n_classes, &configs.forest),
                    || BoostedModel::fit_matrix(features, labels, n_classes, &configs.boost),
                )
            },
        );
        Ok(LearnerSet {
            tree: tree?,
            forest: forest?,
            boost: boost?,
        })
    }

    pub fn predict(&self, row: &[f64]) -> Result<PerAlgorithm<usize>> {
        Ok(PerAlgorithm {
            tree: self.tree.predict(row)?,
            forest: self.forest.predict(row)?,
            boost: self.boost.predict(row)?,
        })
    }

    fn validate(&self, n_features: usize, n_classes: usize) -> Result<()> {
        let bad = |m: String| {
            Err(Error::ModelLoad {
                field: "layer".into(),
                message: m,
            })
        };
        self.tree.validate()?;
        self.forest.validate()?;
        self.boost.validate()?;
        if self.tree.n_features() != n_features
            || self.forest.members()[0].tree.n_features() != n_features
        {
            return bad(format!("learners do not take {n_features} inputs"));
        }
        if self.tree.n_classes() != n_classes
            || self.forest.members()[0].tree.n_classes() != n_classes
            || self.boost.n_classes() != n_classes
        {
            return bad(format!("learners do not predict {n_classes} classes"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    schema: FeatureSchema,
    scaler: ScalerParams,
    config: StackConfig,
    meta_arity: usize,
    layer1: LearnerSet,
    layer2: LearnerSet,
}

/// Class ids from all six learners for one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayeredPredictions {
    pub layer1: PerAlgorithm<usize>,
    pub layer2: PerAlgorithm<usize>,
}

/// Bookkeeping from [`fit_stack_traced`], for inspecting how the layer-2
/// training set was built.
#[derive(Debug, Clone)]
pub struct StackTrace {
    /// Fold of each training row (oof mode only).
    pub fold_of_row: Option<Vec<usize>>,
    /// Rows used to fit the layer-1 clones of each fold (oof mode only).
    pub fold_train_rows: Vec<Vec<usize>>,
    /// Layer-1 predictions that went into each meta row.
    pub base_predictions: Vec<PerAlgorithm<usize>>,
    pub meta_features: Matrix,
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn assign_folds(labels: &[usize], n_classes: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::seeded(seed);
    let mut fold = vec![0; labels.len()];
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            fold[i] = j % k;
        }
    }
    fold
}

pub fn fit_stack(train: &Dataset, config: &StackConfig) -> Result<StackedModel> {
    Ok(fit_stack_traced(train, config)?.0)
}

pub fn fit_stack_traced(
    train: &Dataset,
    config: &StackConfig,
) -> Result<(StackedModel, StackTrace)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Fit("cannot fit a stack on zero rows".into()));
    }
    let k = train.n_classes();
    if config.mode == StackMode::Oof {
        let counts = train.class_counts();
        if let Some(c) = counts.iter().position(|&n| n < config.k_folds) {
            return Err(Error::Config(format!(
                "class {:?} has {} rows, fewer than {} folds",
                train.schema().class_names()[c],
                counts[c],
                config.k_folds
            )));
        }
    }

    let scaler = ScalerParams::fit(train.features())?;
    let x = scaler.transform(train.features())?;
    let y = train.labels();
    let layer1 = LearnerSet::fit(&x, y, k, &config.base)?;

    let (base_predictions, fold_of_row, fold_train_rows) = match config.mode {
        StackMode::Paper => {
            let preds = x
                .rows()
                .map(|r| layer1.predict(r))
                .collect::<Result<Vec<_>>>()?;
            (preds, None, Vec::new())
        }
        StackMode::Oof => {
            let folds = assign_folds(y, k, config.k_folds, config.seed);
            let per_fold = (0..config.k_folds)
                .into_par_iter()
                .map(|f| {
                    let (held, fit_rows): (Vec<usize>, Vec<usize>) =
                        (0..y.len()).partition(|&i| folds[i] == f);
                    let fx = x.select_rows(&fit_rows);
                    let fy: Vec<usize> = fit_rows.iter().map(|&i| y[i]).collect();
                    let clones = LearnerSet::fit(&fx, &fy, k, &config.base)?;
                    let preds = held
                        .iter()
                        .map(|&i| Ok((i, clones.predict(x.row(i))?)))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((fit_rows, preds))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut preds = vec![None; y.len()];
            let mut fold_rows = Vec::with_capacity(per_fold.len());
            for (fit_rows, held_preds) in per_fold {
                for (i, p) in held_preds {
                    preds[i] = Some(p);
                }
                fold_rows.push(fit_rows);
            }
            let preds = preds
                .into_iter()
                .map(|p| p.expect("every row belongs to exactly one fold"))
                .collect();
            (preds, Some(folds), fold_rows)
        }
    };

    let arity = meta_arity(x.n_cols(), k, config.meta_input);
    let mut meta = Matrix::new(arity);
    for (row, preds) in x.rows().zip(&base_predictions) {
        meta.push_row(&meta_features(row, preds, k, config.meta_input))?;
    }
    let layer2 = LearnerSet::fit(&meta, y, k, &config.meta)?;

    let model = StackedModel {
        schema: train.schema().clone(),
        scaler,
        config: *config,
        meta_arity: arity,
        layer1,
        layer2,
    };
    let trace = StackTrace {
        fold_of_row,
        fold_train_rows,
        base_predictions,
        meta_features: meta,
    };
    Ok((model, trace))
}

impl StackedModel {
    /// Assembles a model from already fitted parts, checking consistency.
    pub fn from_parts(
        schema: FeatureSchema,
        scaler: ScalerParams,
        config: StackConfig,
        layer1: LearnerSet,
        layer2: LearnerSet,
    ) -> Result<Self> {
        let arity = meta_arity(schema.n_features(), schema.n_classes(), config.meta_input);
        let m = StackedModel {
            schema,
            scaler,
            config,
            meta_arity: arity,
            layer1,
            layer2,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn scaler(&self) -> &ScalerParams {
        &self.scaler
    }

    pub fn config(&self) -> &StackConfig {
        &self.config
    }

    pub fn meta_arity(&self) -> usize {
        self.meta_arity
    }

    pub fn layer1(&self) -> &LearnerSet {
        &self.layer1
    }

    pub fn layer2(&self) -> &LearnerSet {
        &self.layer2
    }

    pub fn n_classes(&self) -> usize {
        self.schema.n_classes()
    }

    /// Predicts from a raw (unscaled) feature row.
    pub fn predict(&self, row: &[f64]) -> Result<LayeredPredictions> {
        if row.len() != self.schema.n_features() {
            return Err(Error::Predict(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.schema.n_features()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Predict(format!(
                "{} is not finite",
                self.schema.names()[j]
            )));
        }
        let scaled = self.scaler.transform_row(row)?;
        let layer1 = self.layer1.predict(&scaled)?;
        let meta = meta_features(&scaled, &layer1, self.n_classes(), self.config.meta_input);
        let layer2 = self.layer2.predict(&meta)?;
        Ok(LayeredPredictions { layer1, layer2 })
    }

    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        self.scaler.validate()?;
        self.config.validate()?;
        let p = self.schema.n_features();
        let k = self.schema.n_classes();
        if self.scaler.n_features() != p {
            return Err(Error::ModelLoad {
                field: "scaler".into(),
                message: format!(
                    "scaler covers {} features, schema has {p}",
                    self.scaler.n_features()
                ),
            });
        }
        let expected = meta_arity(p, k, self.config.meta_input);
        if self.meta_arity != expected {
            return Err(Error::ModelLoad {
                field: "meta_arity".into(),
                message: format!("expected {expected}, found {}", self.meta_arity),
            });
        }
        self.layer1.validate(p, k)?;
        self.layer2.validate(expected, k)?;
        Ok(())
    }
}

pub fn predict_stack(model: &StackedModel, row: &[f64]) -> Result<LayeredPredictions> {
    model.predict(row)
}

/// Runs every row of `test` through the stack and scores all six learners.
pub fn evaluate_stack(model: &StackedModel, test: &Dataset) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::Evaluation("test set is empty".into()));
    }
    if test.schema().names() != model.schema().names()
        || test.schema().n_classes() != model.n_classes()
    {
        return Err(Error::Schema(
            "test data schema does not match the model".into(),
        ));
    }
    let preds = test
        .features()
        .rows()
        .map(|r| model.predict(r))
        .collect::<Result<Vec<_>>>()?;
    let score = |pick: &dyn Fn(&LayeredPredictions) -> usize| {
        let y_pred: Vec<usize> = preds.iter().map(pick).collect();
        Evaluation::from_predictions(test.labels(), &y_pred, model.n_classes())
    };
    let first = PerAlgorithm {
        tree: score(&|p| p.layer1.tree)?,
        forest: score(&|p| p.layer1.forest)?,
        boost: score(&|p| p.layer1.boost)?,
    };
    let second = PerAlgorithm {
        tree: score(&|p| p.layer2.tree)?,
        forest: score(&|p| p.layer2.forest)?,
        boost: score(&|p| p.layer2.boost)?,
    };
    Ok(MetricsReport {
        provenance: Provenance {
            n_train: None,
            n_test: test.len(),
            seed: model.config.seed,
            mode: model.config.mode,
        },
        layers: Layers { first, second },
        correlation: None,
    })
}
