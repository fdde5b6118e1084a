//! The five classifier families behind one train/score contract.
//!
//! Every trained model emits a flaky-class score in `[0, 1]`; a caller turns
//! scores into labels with a threshold (0.5 unless tuned).

mod forest;
mod gbt;
mod knn;
mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::Label;
use crate::linalg::Matrix;

pub use forest::Forest;
pub use gbt::{sigmoid, GbtModel};
pub use knn::KnnModel;
pub use svm::SvmModel;
pub use tree::{impurity, Node, Tree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("impurity of an empty set")]
    EmptySet,
    #[error("invalid hyperparameters: {0}")]
    SpecInvalid(String),
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("n_neighbors = {k} exceeds the {rows} training rows")]
    KTooLarge { k: usize, rows: usize },
    #[error("SVM needs both classes in the training set")]
    SingleClass,
    #[error("model expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Xgb,
    Dt,
    Rf,
    Knn,
    Svm,
}

impl Family {
    /// Table order.
    pub const ALL: [Family; 5] = [Family::Xgb, Family::Dt, Family::Rf, Family::Knn, Family::Svm];

    pub fn display_name(self) -> &'static str {
        match self {
            Family::Xgb => "XGB",
            Family::Dt => "DT",
            Family::Rf => "RF",
            Family::Knn => "KNN",
            Family::Svm => "SVM",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Family::Xgb => "xgb",
            Family::Dt => "dt",
            Family::Rf => "rf",
            Family::Knn => "knn",
            Family::Svm => "svm",
        }
    }

    /// Tree families consume raw counts; PCA is only wired in for the others.
    pub fn is_tree_based(self) -> bool {
        matches!(self, Family::Xgb | Family::Dt | Family::Rf)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.key().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown model family {s:?} (expected xgb, dt, rf, knn, svm)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Entropy,
    Gini,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    #[serde(flatten)]
    pub tree: TreeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub reg_lambda: f64,
    pub gamma: f64,
    /// Minimum hessian sum per child. Off (0) by default: with it, confident
    /// leaves stop splitting long before the boundary rows are fitted.
    pub min_child_weight: f64,
}

impl GbtParams {
    pub fn new(learning_rate: f64, max_depth: usize, n_estimators: usize) -> Self {
        GbtParams { learning_rate, max_depth, n_estimators, reg_lambda: 1.0, gamma: 0.0, min_child_weight: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub n_neighbors: usize,
    pub weights: Weighting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl SvmParams {
    pub fn new(c: f64) -> Self {
        SvmParams { c, tol: 1e-3, max_iter: 10_000_000 }
    }
}

/// A model family with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ClassifierSpec {
    Xgb(GbtParams),
    Dt(TreeParams),
    Rf(ForestParams),
    Knn(KnnParams),
    Svm(SvmParams),
}

fn as_usize(name: &str, v: &Value) -> Result<usize, ClassifierError> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| ClassifierError::SpecInvalid(format!("{name} must be a non-negative integer, got {v}")))
}

fn as_f64(name: &str, v: &Value) -> Result<f64, ClassifierError> {
    v.as_f64().ok_or_else(|| ClassifierError::SpecInvalid(format!("{name} must be a number, got {v}")))
}

fn as_enum<T: for<'de> Deserialize<'de>>(name: &str, v: &Value) -> Result<T, ClassifierError> {
    serde_json::from_value(v.clone()).map_err(|_| ClassifierError::SpecInvalid(format!("bad value {v} for {name}")))
}

impl ClassifierSpec {
    pub fn family(&self) -> Family {
        match self {
            ClassifierSpec::Xgb(_) => Family::Xgb,
            ClassifierSpec::Dt(_) => Family::Dt,
            ClassifierSpec::Rf(_) => Family::Rf,
            ClassifierSpec::Knn(_) => Family::Knn,
            ClassifierSpec::Svm(_) => Family::Svm,
        }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::SpecInvalid(m.to_string()));
        let check_tree = |t: &TreeParams| {
            if t.min_samples_split < 2 {
                return bad("min_samples_split must be at least 2");
            }
            if t.min_samples_leaf < 1 {
                return bad("min_samples_leaf must be at least 1");
            }
            Ok(())
        };
        match self {
            ClassifierSpec::Xgb(p) => {
                if !(p.learning_rate.is_finite() && p.learning_rate >= 0.0) {
                    return bad("learning_rate must be finite and non-negative");
                }
                if !(p.reg_lambda.is_finite() && p.reg_lambda > 0.0) {
                    return bad("reg_lambda must be positive");
                }
                if !(p.gamma.is_finite() && p.gamma >= 0.0) {
                    return bad("gamma must be non-negative");
                }
                if !(p.min_child_weight.is_finite() && p.min_child_weight >= 0.0) {
                    return bad("min_child_weight must be non-negative");
                }
                Ok(())
            }
            ClassifierSpec::Dt(t) => check_tree(t),
            ClassifierSpec::Rf(f) => {
                if f.n_estimators == 0 {
                    return bad("n_estimators must be at least 1");
                }
                check_tree(&f.tree)
            }
            ClassifierSpec::Knn(k) => {
                if k.n_neighbors == 0 {
                    return bad("n_neighbors must be at least 1");
                }
                Ok(())
            }
            ClassifierSpec::Svm(s) => {
                if !(s.c.is_finite() && s.c > 0.0) {
                    return bad("C must be positive");
                }
                if !(s.tol.is_finite() && s.tol > 0.0) {
                    return bad("tol must be positive");
                }
                Ok(())
            }
        }
    }

    /// Overrides one hyperparameter by name (as used in config files and
    /// grid definitions).
    pub fn set_param(&mut self, name: &str, value: &Value) -> Result<(), ClassifierError> {
        let family = self.family();
        let unknown = || ClassifierError::SpecInvalid(format!("unknown hyperparameter {name:?} for {family}"));
        fn tree_param(t: &mut TreeParams, name: &str, value: &Value) -> Option<Result<(), ClassifierError>> {
            let r = match name {
                "criterion" => as_enum(name, value).map(|v| t.criterion = v),
                "max_depth" => as_usize(name, value).map(|v| t.max_depth = v),
                "min_samples_split" => as_usize(name, value).map(|v| t.min_samples_split = v),
                "min_samples_leaf" => as_usize(name, value).map(|v| t.min_samples_leaf = v),
                _ => return None,
            };
            Some(r)
        }
        let result = match self {
            ClassifierSpec::Xgb(p) => match name {
                "learning_rate" | "eta" => as_f64(name, value).map(|v| p.learning_rate = v),
                "max_depth" => as_usize(name, value).map(|v| p.max_depth = v),
                "n_estimators" => as_usize(name, value).map(|v| p.n_estimators = v),
                "reg_lambda" | "lambda" => as_f64(name, value).map(|v| p.reg_lambda = v),
                "gamma" => as_f64(name, value).map(|v| p.gamma = v),
                "min_child_weight" => as_f64(name, value).map(|v| p.min_child_weight = v),
                _ => return Err(unknown()),
            },
            ClassifierSpec::Dt(t) => tree_param(t, name, value).ok_or_else(unknown)?,
            ClassifierSpec::Rf(f) => match name {
                "n_estimators" => as_usize(name, value).map(|v| f.n_estimators = v),
                _ => tree_param(&mut f.tree, name, value).ok_or_else(unknown)?,
            },
            ClassifierSpec::Knn(k) => match name {
                "n_neighbors" => as_usize(name, value).map(|v| k.n_neighbors = v),
                "weights" => as_enum(name, value).map(|v| k.weights = v),
                "metric" if value == "euclidean" => Ok(()),
                _ => return Err(unknown()),
            },
            ClassifierSpec::Svm(s) => match name {
                "c" | "C" => as_f64(name, value).map(|v| s.c = v),
                "tol" => as_f64(name, value).map(|v| s.tol = v),
                "max_iter" => as_usize(name, value).map(|v| s.max_iter = v),
                _ => return Err(unknown()),
            },
        };
        result?;
        self.validate()
    }
}

/// Named hyperparameter presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    PaperVanilla,
    PaperSmote,
}

impl ProfileName {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileName::PaperVanilla => "paper_vanilla",
            ProfileName::PaperSmote => "paper_smote",
        }
    }
}

impl FromStr for ProfileName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper_vanilla" => Ok(ProfileName::PaperVanilla),
            "paper_smote" => Ok(ProfileName::PaperSmote),
            _ => Err(format!("unknown profile {s:?} (expected paper_vanilla or paper_smote)")),
        }
    }
}

/// Hyperparameters plus the PCA component count that goes with them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: ProfileName,
    pub spec: ClassifierSpec,
    pub pca_components: Option<usize>,
}

/// The builtin presets. `paper_smote` settings not stated for a family are
/// carried over from `paper_vanilla`.
pub fn profile(name: ProfileName, family: Family) -> Profile {
    let tree = |criterion, min_samples_split| TreeParams { criterion, max_depth: 10, min_samples_split, min_samples_leaf: 2 };
    let knn = |k| ClassifierSpec::Knn(KnnParams { n_neighbors: k, weights: Weighting::Distance });
    let (spec, pca) = match (name, family) {
        (ProfileName::PaperVanilla, Family::Xgb) => (ClassifierSpec::Xgb(GbtParams::new(0.5, 5, 100)), None),
        (ProfileName::PaperSmote, Family::Xgb) => (ClassifierSpec::Xgb(GbtParams::new(0.3, 3, 200)), None),
        (ProfileName::PaperVanilla, Family::Dt) => (ClassifierSpec::Dt(tree(Criterion::Entropy, 10)), None),
        (ProfileName::PaperSmote, Family::Dt) => (ClassifierSpec::Dt(tree(Criterion::Gini, 10)), None),
        (ProfileName::PaperVanilla, Family::Rf) => {
            (ClassifierSpec::Rf(ForestParams { n_estimators: 200, tree: tree(Criterion::Entropy, 5) }), None)
        }
        (ProfileName::PaperSmote, Family::Rf) => {
            (ClassifierSpec::Rf(ForestParams { n_estimators: 100, tree: tree(Criterion::Entropy, 5) }), None)
        }
        (ProfileName::PaperVanilla, Family::Knn) => (knn(3), Some(150)),
        (ProfileName::PaperSmote, Family::Knn) => (knn(7), Some(200)),
        (ProfileName::PaperVanilla, Family::Svm) => (ClassifierSpec::Svm(SvmParams::new(0.01)), Some(220)),
        (ProfileName::PaperSmote, Family::Svm) => (ClassifierSpec::Svm(SvmParams::new(0.01)), Some(180)),
    };
    Profile { name, spec, pca_components: pca }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    DecisionTree { tree: Tree },
    RandomForest(Forest),
    Gbt(GbtModel),
    Knn(KnnModel),
    Svm(SvmModel),
}

/// A fitted classifier with its training metadata. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub seed: u64,
    pub n_features: usize,
    /// Set when the training labels held a single class.
    pub degenerate_labels: bool,
    pub model: ModelKind,
}

pub fn train(x: &Matrix, y: &[Label], spec: &ClassifierSpec, seed: u64) -> Result<TrainedModel, ClassifierError> {
    spec.validate()?;
    if x.rows() != y.len() {
        return Err(ClassifierError::LengthMismatch { rows: x.rows(), labels: y.len() });
    }
    if y.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let flaky = y.iter().filter(|l| l.is_flaky()).count();
    let degenerate_labels = flaky == 0 || flaky == y.len();
    let model = match spec {
        ClassifierSpec::Dt(p) => {
            let grower = tree::ClassGrower {
                criterion: p.criterion,
                max_depth: p.max_depth,
                min_samples_split: p.min_samples_split,
                min_samples_leaf: p.min_samples_leaf,
            };
            let index = tree::ColumnIndex::new(x);
            let t = tree::fit_class_tree(x, &index, y, &vec![1.0; y.len()], &grower, &mut tree::FeatureSampler::All);
            ModelKind::DecisionTree { tree: t }
        }
        ClassifierSpec::Rf(p) => ModelKind::RandomForest(forest::fit_forest(x, y, p, seed)),
        ClassifierSpec::Xgb(p) => ModelKind::Gbt(gbt::fit_gbt(x, y, p)),
        ClassifierSpec::Knn(p) => {
            if p.n_neighbors > y.len() {
                return Err(ClassifierError::KTooLarge { k: p.n_neighbors, rows: y.len() });
            }
            ModelKind::Knn(KnnModel { k: p.n_neighbors, weighting: p.weights, x: x.clone(), y: y.to_vec() })
        }
        ClassifierSpec::Svm(p) => {
            if degenerate_labels {
                return Err(ClassifierError::SingleClass);
            }
            ModelKind::Svm(svm::fit_svm(x, y, p))
        }
    };
    Ok(TrainedModel { spec: spec.clone(), seed, n_features: x.cols(), degenerate_labels, model })
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        self.spec.family()
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        match &self.model {
            ModelKind::DecisionTree { tree } => tree.predict_row(row),
            ModelKind::RandomForest(f) => f.score_row(row),
            ModelKind::Gbt(g) => g.score_row(row),
            ModelKind::Knn(k) => k.score_row(row),
            ModelKind::Svm(s) => s.score_row(row),
        }
    }

    /// One flaky-class score per row.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>, ClassifierError> {
        if x.rows() == 0 {
            return Ok(Vec::new());
        }
        if x.cols() != self.n_features {
            return Err(ClassifierError::DimensionMismatch { expected: self.n_features, got: x.cols() });
        }
        Ok(x.iter_rows().map(|r| self.score_row(r)).collect())
    }

    pub fn predict(&self, x: &Matrix, threshold: f64) -> Result<Vec<Label>, ClassifierError> {
        Ok(self.score(x)?.into_iter().map(|s| label_for(s, threshold)).collect())
    }
}

/// Flaky iff `score >= threshold`.
pub fn label_for(score: f64, threshold: f64) -> Label {
    if score >= threshold {
        Label::Flaky
    } else {
        Label::NonFlaky
    }
}
