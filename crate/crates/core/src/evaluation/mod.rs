//! Datasets, metrics, the logistic-regression baseline and threshold tuning.

mod dataset;
mod lr;
mod metrics;
mod split;
mod tuning;

use thiserror::Error;

pub use dataset::{load_dataset, LabeledExample, LoadedDataset, RejectedRow};
pub use lr::{loss_and_gradient, terms, train_lr_baseline, EpochLog, LrHyperParams, LrModel, SparseRow, TfIdfVectorizer};
pub use metrics::{compute_metrics, ClassMetrics, EvalMetrics};
pub use split::{split, DatasetSplit, SplitRatios};
pub use tuning::{fbeta, objective_at, tune_thresholds, CategoryTuning, Objective, TunedThresholds};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read dataset {path}: {message}")]
    FileUnreadable { path: String, message: String },
    #[error("dataset lacks a {0:?} column")]
    MissingHeader(&'static str),
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    InvalidRatios((f64, f64, f64)),
    #[error("{category} has {count} examples; at least 3 are needed to stratify")]
    ClassTooSmall { category: String, count: usize },
    #[error("predicted and gold labels differ in length ({predicted} vs {gold})")]
    LengthMismatch { predicted: usize, gold: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("training data must contain at least two classes")]
    DegenerateData,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error("invalid model file: {0}")]
    ModelFile(String),
    #[error("invalid objective {0:?}; expected f1 or fbeta:<beta>")]
    InvalidObjective(String),
}
