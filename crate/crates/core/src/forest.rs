//! Random forest: bootstrap-resampled trees, each restricted to a random
//! feature subset drawn once per tree, combined by hard majority vote.

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::tree::{DecisionTree, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// ⌈√arity⌉
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, arity: usize) -> Result<usize> {
        let m = match self {
            MaxFeatures::Sqrt => (arity as f64).sqrt().ceil() as usize,
            MaxFeatures::Count(m) => m,
        };
        if m == 0 || m > arity {
            return Err(Error::Config(format!(
                "max_features {m} outside 1..={arity}"
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub tree: TreeConfig,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            tree: TreeConfig::default(),
            seed: 42,
        }
    }
}

/// One tree together with the features it was allowed to split on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestMember {
    pub features: Vec<usize>,
    pub tree: DecisionTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    config: ForestConfig,
    members: Vec<ForestMember>,
}

/// `n` uniform draws with replacement from `0..n`.
pub fn bootstrap_sample(n: usize, rng: &mut Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Most frequent class; lowest id wins ties.
pub fn majority_vote(votes: &[usize]) -> Result<usize> {
    let Some(&max) = votes.iter().max() else {
        return Err(Error::Domain("majority vote over zero votes".into()));
    };
    let mut counts = vec![0usize; max + 1];
    for &v in votes {
        counts[v] += 1;
    }
    Ok(crate::tree::argmax_counts(&counts))
}

impl Forest {
    pub fn fit(train: &Dataset, config: &ForestConfig) -> Result<Self> {
        Self::fit_matrix(train.features(), train.labels(), train.n_classes(), config)
    }

    pub fn fit_matrix(
        features: &Matrix,
        labels: &[usize],
        n_classes: usize,
        config: &ForestConfig,
    ) -> Result<Self> {
        if config.n_trees == 0 {
            return Err(Error::Config("n_trees must be ≥ 1".into()));
        }
        config.tree.validate()?;
        let n = features.n_rows();
        if n == 0 {
            return Err(Error::Fit("cannot fit a forest on zero rows".into()));
        }
        let arity = features.n_cols();
        let m = config.max_features.resolve(arity)?;

        let members = (0..config.n_trees)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::seeded(rng::derive_seed(config.seed, i as u64));
                let rows = if config.bootstrap {
                    bootstrap_sample(n, &mut rng)
                } else {
                    (0..n).collect()
                };
                let subset = if m == arity {
                    (0..arity).collect()
                } else {
                    let mut s = index::sample(&mut rng, arity, m).into_vec();
                    s.sort_unstable();
                    s
                };
                let tree = DecisionTree::fit_rows(
                    features,
                    labels,
                    n_classes,
                    rows,
                    &subset,
                    &config.tree,
                )?;
                Ok(ForestMember {
                    features: subset,
                    tree,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Forest {
            config: *config,
            members,
        })
    }

    pub fn from_members(config: ForestConfig, members: Vec<ForestMember>) -> Result<Self> {
        let forest = Forest { config, members };
        forest.validate()?;
        Ok(forest)
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn members(&self) -> &[ForestMember] {
        &self.members
    }

    pub fn votes(&self, row: &[f64]) -> Result<Vec<usize>> {
        self.members.iter().map(|m| m.tree.predict(row)).collect()
    }

    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        majority_vote(&self.votes(row)?)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |m: String| {
            Err(Error::ModelLoad {
                field: "members".into(),
                message: m,
            })
        };
        if self.members.is_empty() || self.members.len() != self.config.n_trees {
            return bad(format!(
                "expected {} trees, found {}",
                self.config.n_trees,
                self.members.len()
            ));
        }
        let first = &self.members[0].tree;
        for (i, m) in self.members.iter().enumerate() {
            m.tree.validate()?;
            if m.tree.n_features() != first.n_features() || m.tree.n_classes() != first.n_classes()
            {
                return bad(format!("tree {i} has inconsistent arity"));
            }
            if m.features.iter().any(|&f| f >= m.tree.n_features()) {
                return bad(format!("tree {i} has an out-of-range feature subset"));
            }
            for node in m.tree.nodes() {
                if let crate::tree::TreeNode::Split { feature_index, .. } = node {
                    if !m.features.contains(feature_index) {
                        return bad(format!("tree {i} splits outside its feature subset"));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn fit_forest(train: &Dataset, config: &ForestConfig) -> Result<Forest> {
    Forest::fit(train, config)
}

pub fn predict_forest(forest: &Forest, row: &[f64]) -> Result<usize> {
    forest.predict(row)
}
