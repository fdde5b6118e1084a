//! Metrics, threshold tuning, stratified cross-validation and grid search.

pub mod cv;
pub mod grid;
pub mod metrics;
pub mod threshold;

use thiserror::Error;

pub use cv::{cross_validate, evaluate_split, CvReport, FoldOutcome, TuningRecord};
pub use grid::{grid_search, nested_grid_search, GridAxis, GridPointResult, GridSearchResult, NestedFold, NestedReport, ParamGrid};
pub use metrics::{compute_metrics, confusion, AggregateReport, ConfusionMatrix, MeanStd, Metric, MetricReport, UndefinedMetrics};
pub use threshold::{threshold_grid, tune_threshold, tune_threshold_on, ThresholdCurve, DEFAULT_THRESHOLD};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{left} true labels but {right} predictions")]
    LengthMismatch { left: usize, right: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("no scores to evaluate")]
    EmptyInput,
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("grid step {0} does not divide the 0.1..0.9 span")]
    BadGridStep(f64),
}
