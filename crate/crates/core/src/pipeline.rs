//! The detection pipeline: tokenize, vectorize, optionally oversample and
//! project, train, and pick a decision threshold.
//!
//! Stage order inside a training set is fixed: SMOTE runs on the raw count
//! rows, PCA is fitted on the (possibly resampled) rows, and the classifier
//! sees the projected rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{profile, train, ClassifierSpec, Family, ProfileName, TrainedModel};
use crate::corpus::{stratified_holdout, Corpus, Label};
use crate::eval::threshold::{f1_at, threshold_grid, tune_threshold_on, ThresholdCurve, DEFAULT_THRESHOLD};
use crate::linalg::{pca_ceiling, pca_fit, LinalgError, Matrix, PcaModel};
use crate::resample::smote_resample;
use crate::seed;
use crate::text::{fit_vocabulary, tokenize, transform, TokenizerProfile, Vocabulary};
use crate::Error;

/// Share of a training set held back for threshold tuning.
pub const INNER_HOLDOUT_FRACTION: f64 = 0.2;

/// SMOTE neighbor count used by the builtin profiles.
pub const DEFAULT_SMOTE_NEIGHBORS: usize = 5;

/// Which documents the vocabulary is fitted on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VocabularyScope {
    /// Training rows only; held-out tokens never become columns.
    #[default]
    TrainingFolds,
    /// Every document, before splitting.
    WholeDataset,
}

/// Which rows the threshold is tuned on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningSet {
    /// A stratified 20% slice of the training rows, scored by a model fitted
    /// on the remaining 80%.
    #[default]
    InnerHoldout,
    /// The evaluation fold itself.
    EvaluationFold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThresholdMode {
    Fixed { threshold: f64 },
    Tune { on: TuningSet, grid: Vec<f64> },
}

impl Default for ThresholdMode {
    fn default() -> Self {
        ThresholdMode::Fixed { threshold: DEFAULT_THRESHOLD }
    }
}

impl ThresholdMode {
    /// Tuning over `0.1, 0.2, ..., 0.9`.
    pub fn tuned(on: TuningSet) -> Self {
        ThresholdMode::Tune { on, grid: threshold_grid(0.1).expect("0.1 divides the span") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub spec: ClassifierSpec,
    /// Where the hyperparameters came from, for the record.
    #[serde(default)]
    pub profile: Option<ProfileName>,
    /// Requested component count; clamped to what each training set admits.
    #[serde(default)]
    pub pca_components: Option<usize>,
    /// SMOTE neighbor count; `None` disables oversampling.
    #[serde(default)]
    pub smote_neighbors: Option<usize>,
    #[serde(default)]
    pub threshold: ThresholdMode,
    #[serde(default)]
    pub tokenizer: TokenizerProfile,
    #[serde(default)]
    pub vocabulary_scope: VocabularyScope,
}

impl PipelineConfig {
    /// A builtin profile: its hyperparameters, its PCA setting for KNN and
    /// SVM, SMOTE for `paper_smote`, threshold fixed at 0.5.
    pub fn from_profile(name: ProfileName, family: Family) -> Self {
        let p = profile(name, family);
        PipelineConfig {
            spec: p.spec,
            profile: Some(name),
            pca_components: p.pca_components,
            smote_neighbors: (name == ProfileName::PaperSmote).then_some(DEFAULT_SMOTE_NEIGHBORS),
            threshold: ThresholdMode::default(),
            tokenizer: TokenizerProfile::Default,
            vocabulary_scope: VocabularyScope::TrainingFolds,
        }
    }

    pub fn family(&self) -> Family {
        self.spec.family()
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.spec.validate()?;
        if self.pca_components == Some(0) {
            return Err(Error::Config("pca_components must be at least 1".into()));
        }
        if self.smote_neighbors == Some(0) {
            return Err(Error::Config("smote_neighbors must be at least 1".into()));
        }
        let in_unit = |t: f64| (0.0..=1.0).contains(&t);
        match &self.threshold {
            ThresholdMode::Fixed { threshold } if !in_unit(*threshold) => {
                Err(Error::Config(format!("threshold {threshold} is outside [0, 1]")))
            }
            ThresholdMode::Tune { grid, .. } if grid.is_empty() => Err(Error::Config("threshold grid is empty".into())),
            ThresholdMode::Tune { grid, .. } if !grid.iter().all(|&t| in_unit(t)) => {
                Err(Error::Config("threshold grid values must lie in [0, 1]".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Seeds for every randomized stage of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub smote: u64,
    pub model: u64,
    pub inner_split: u64,
    pub inner_smote: u64,
    pub inner_model: u64,
}

impl StageSeeds {
    /// Seeds for unit `index` (a fold number) of a run seeded with `seed`.
    pub fn new(seed: u64, index: u64) -> Self {
        StageSeeds {
            smote: seed::derive(seed, "smote", index),
            model: seed::derive(seed, "model", index),
            inner_split: seed::derive(seed, "inner-split", index),
            inner_smote: seed::derive(seed, "inner-smote", index),
            inner_model: seed::derive(seed, "inner-model", index),
        }
    }
}

/// SMOTE, PCA and classifier fitted on one numeric training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub pca: Option<PcaModel>,
    pub model: TrainedModel,
    pub n_synthetic: usize,
}

impl FeatureModel {
    pub fn pca_components(&self) -> Option<usize> {
        self.pca.as_ref().map(PcaModel::n_components)
    }

    pub fn project(&self, x: &Matrix) -> Result<Matrix, Error> {
        match &self.pca {
            Some(p) => Ok(p.transform(x)?),
            None => Ok(x.clone()),
        }
    }

    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>, Error> {
        if x.rows() == 0 {
            return Ok(Vec::new());
        }
        Ok(self.model.score(&self.project(x)?)?)
    }
}

/// Fits SMOTE (if enabled), then PCA on the resampled rows (if enabled), then
/// the classifier. The requested component count is clamped to
/// `min(rows - 1, cols)` of the PCA input.
pub fn fit_features(x: &Matrix, y: &[Label], config: &PipelineConfig, smote_seed: u64, model_seed: u64) -> Result<FeatureModel, Error> {
    let (x, y, n_synthetic) = match config.smote_neighbors {
        Some(k) => {
            let r = smote_resample(x, y, k, smote_seed)?;
            let n = r.n_synthetic();
            (r.x, r.y, n)
        }
        None => (x.clone(), y.to_vec(), 0),
    };
    let (pca, x) = match config.pca_components {
        Some(requested) => {
            let ceiling = pca_ceiling(x.rows(), x.cols());
            if ceiling == 0 {
                return Err(LinalgError::RankTooSmall { requested, ceiling }.into());
            }
            let p = pca_fit(&x, requested.min(ceiling))?;
            let projected = p.transform(&x)?;
            (Some(p), projected)
        }
        None => (None, x),
    };
    let model = train(&x, &y, &config.spec, model_seed)?;
    Ok(FeatureModel { pca, model, n_synthetic })
}

/// How a threshold was chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub set: TuningSet,
    pub n_rows: usize,
    pub curve: ThresholdCurve,
    /// F1 on the tuning rows at the selected threshold.
    pub f1_selected: f64,
    /// F1 on the same rows at 0.5.
    pub f1_at_default: f64,
}

fn tuning_record(set: TuningSet, scores: &[f64], y: &[Label], grid: &[f64]) -> Result<TuningRecord, Error> {
    let curve = tune_threshold_on(scores, y, grid)?;
    Ok(TuningRecord {
        set,
        n_rows: scores.len(),
        f1_selected: curve.best_f1,
        f1_at_default: f1_at(scores, y, DEFAULT_THRESHOLD)?,
        curve,
    })
}

/// Tunes on an inner holdout of `(x, y)`: a model fitted on the other rows
/// scores the holdout.
pub fn tune_on_inner_holdout(x: &Matrix, y: &[Label], config: &PipelineConfig, seeds: &StageSeeds, grid: &[f64]) -> Result<TuningRecord, Error> {
    let (fit, holdout) = stratified_holdout(y, INNER_HOLDOUT_FRACTION, seeds.inner_split);
    let fit_y: Vec<Label> = fit.iter().map(|&i| y[i]).collect();
    let hold_y: Vec<Label> = holdout.iter().map(|&i| y[i]).collect();
    let inner = fit_features(&x.select_rows(&fit), &fit_y, config, seeds.inner_smote, seeds.inner_model)?;
    let scores = inner.score(&x.select_rows(&holdout))?;
    tuning_record(TuningSet::InnerHoldout, &scores, &hold_y, grid)
}

/// Resolves the decision threshold. `evaluation` supplies scores and labels
/// for the evaluation-fold tuning mode.
pub fn choose_threshold(
    config: &PipelineConfig,
    x_train: &Matrix,
    y_train: &[Label],
    seeds: &StageSeeds,
    evaluation: (&[f64], &[Label]),
) -> Result<(f64, Option<TuningRecord>), Error> {
    match &config.threshold {
        ThresholdMode::Fixed { threshold } => Ok((*threshold, None)),
        ThresholdMode::Tune { on: TuningSet::InnerHoldout, grid } => {
            let rec = tune_on_inner_holdout(x_train, y_train, config, seeds, grid)?;
            Ok((rec.curve.best_threshold, Some(rec)))
        }
        ThresholdMode::Tune { on: TuningSet::EvaluationFold, grid } => {
            let rec = tuning_record(TuningSet::EvaluationFold, evaluation.0, evaluation.1, grid)?;
            Ok((rec.curve.best_threshold, Some(rec)))
        }
    }
}

/// Tokenizes every corpus document.
pub fn tokenize_corpus(corpus: &Corpus, profile: TokenizerProfile) -> Vec<Vec<String>> {
    corpus.entries().par_iter().map(|e| tokenize(&e.text, profile)).collect()
}

/// A pipeline trained on a whole corpus, ready to score new files.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline {
    pub config: PipelineConfig,
    pub vocabulary: Vocabulary,
    pub features: FeatureModel,
    pub threshold: f64,
    pub tuning: Option<TuningRecord>,
}

impl FittedPipeline {
    pub fn vectorize<S: AsRef<str>>(&self, texts: &[S]) -> Matrix {
        let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t.as_ref(), self.config.tokenizer)).collect();
        transform(&docs, &self.vocabulary)
    }

    pub fn score_texts<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<f64>, Error> {
        self.features.score(&self.vectorize(texts))
    }
}

/// Trains on every entry of `corpus`. With evaluation-fold tuning there is
/// no held-out fold, so the threshold is tuned on the training rows.
pub fn fit_pipeline(corpus: &Corpus, config: &PipelineConfig, seed: u64) -> Result<FittedPipeline, Error> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Config("cannot train on an empty corpus".into()));
    }
    let docs = tokenize_corpus(corpus, config.tokenizer);
    let vocabulary = fit_vocabulary(&docs);
    let x = transform(&docs, &vocabulary);
    let y = corpus.labels();
    let seeds = StageSeeds::new(seed, FULL_CORPUS_UNIT);
    let features = fit_features(&x, &y, config, seeds.smote, seeds.model)?;
    let train_scores = match config.threshold {
        ThresholdMode::Tune { on: TuningSet::EvaluationFold, .. } => features.score(&x)?,
        _ => Vec::new(),
    };
    let (threshold, tuning) = choose_threshold(config, &x, &y, &seeds, (&train_scores, &y))?;
    Ok(FittedPipeline { config: config.clone(), vocabulary, features, threshold, tuning })
}

/// Seed index of a whole-corpus fit, distinct from every fold index.
pub const FULL_CORPUS_UNIT: u64 = u64::MAX;
