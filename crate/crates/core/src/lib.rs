//! Resting-position classification with a 2-layer stacked ensemble.
//!
//! Four physiological features (EGG, heart rate, respiration rate, SpO2)
//! are standardized and fed to a decision tree, a random forest and a
//! softmax gradient-boosted model. Their predictions, one-hot encoded and
//! appended to the features, train a second layer of the same three
//! learners. All learners are implemented here from scratch and every
//! random draw is seeded, so fits are byte-reproducible.

pub mod boost;
pub mod dataset;
pub mod error;
pub mod forest;
pub mod metrics;
pub mod model_file;
pub mod rng;
pub mod stack;
pub mod tree;

pub use boost::{BoostConfig, BoostedModel, RegressionTree};
pub use dataset::{
    correlation_matrix, generate, load_csv, split, CorrelationMatrix, Dataset, FeatureSchema,
    Matrix, ScalerParams, SynthParams,
};
pub use error::{Error, Result};
pub use forest::{Forest, ForestConfig, MaxFeatures};
pub use metrics::{
    confusion_matrix, metric_set, render_report, ConfusionMatrix, MetricSet, MetricsReport,
    ReportFormat,
};
pub use model_file::{load_model, save_model, Creation, ModelFile};
pub use stack::{
    evaluate_stack, fit_stack, predict_stack, Algorithm, LayeredPredictions, MetaInput,
    PerAlgorithm, StackConfig, StackMode, StackedModel,
};
pub use tree::{DecisionTree, TreeConfig};
