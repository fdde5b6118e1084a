//! Stratified k-fold cross-validation of a full pipeline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, confusion, AggregateReport, ConfusionMatrix, MetricReport};
use crate::classifiers::label_for;
use crate::corpus::{stratified_fold_indices, Corpus, Label};
use crate::pipeline::{choose_threshold, fit_features, tokenize_corpus, PipelineConfig, StageSeeds, VocabularyScope};
pub use crate::pipeline::TuningRecord;
use crate::text::{fit_vocabulary, transform, Vocabulary};
use crate::Error;

/// Everything that happened in one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub vocabulary_size: usize,
    pub n_synthetic: usize,
    /// Effective component count, after clamping.
    pub pca_components: Option<usize>,
    pub threshold: f64,
    pub tuning: Option<TuningRecord>,
    pub test_ids: Vec<String>,
    pub scores: Vec<f64>,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub n_folds: usize,
    pub seed: u64,
    pub folds: Vec<FoldOutcome>,
    pub aggregate: AggregateReport,
}

impl CvReport {
    pub fn fold_metrics(&self) -> Vec<MetricReport> {
        self.folds.iter().map(|f| f.metrics).collect()
    }
}

pub(crate) struct Prepared<'a> {
    pub corpus: &'a Corpus,
    pub docs: Vec<Vec<String>>,
    pub labels: Vec<Label>,
    pub whole_vocabulary: Option<Vocabulary>,
}

impl<'a> Prepared<'a> {
    pub fn new(corpus: &'a Corpus, config: &PipelineConfig) -> Self {
        let docs = tokenize_corpus(corpus, config.tokenizer);
        let whole_vocabulary = match config.vocabulary_scope {
            VocabularyScope::WholeDataset => Some(fit_vocabulary(&docs)),
            VocabularyScope::TrainingFolds => None,
        };
        Prepared { corpus, labels: corpus.labels(), docs, whole_vocabulary }
    }

    pub fn evaluate(&self, train: &[usize], test: &[usize], config: &PipelineConfig, seed: u64, fold: usize) -> Result<FoldOutcome, Error> {
        let pick_docs = |idx: &[usize]| idx.iter().map(|&i| self.docs[i].as_slice()).collect::<Vec<_>>();
        let pick_labels = |idx: &[usize]| idx.iter().map(|&i| self.labels[i]).collect::<Vec<_>>();
        let train_docs = pick_docs(train);
        let test_docs = pick_docs(test);
        let fitted_vocab;
        let vocab = match &self.whole_vocabulary {
            Some(v) => v,
            None => {
                fitted_vocab = fit_vocabulary(&train_docs);
                &fitted_vocab
            }
        };
        let x_train = transform(&train_docs, vocab);
        let x_test = transform(&test_docs, vocab);
        let y_train = pick_labels(train);
        let y_test = pick_labels(test);

        let seeds = StageSeeds::new(seed, fold as u64);
        let features = fit_features(&x_train, &y_train, config, seeds.smote, seeds.model)?;
        let scores = features.score(&x_test)?;
        let (threshold, tuning) = choose_threshold(config, &x_train, &y_train, &seeds, (&scores, &y_test))?;
        let predicted: Vec<Label> = scores.iter().map(|&s| label_for(s, threshold)).collect();
        let cm = confusion(&y_test, &predicted)?;
        Ok(FoldOutcome {
            fold,
            n_train: train.len(),
            n_test: test.len(),
            vocabulary_size: vocab.len(),
            n_synthetic: features.n_synthetic,
            pca_components: features.pca_components(),
            threshold,
            tuning,
            test_ids: test.iter().map(|&i| self.corpus.entries()[i].id.clone()).collect(),
            scores,
            confusion: cm,
            metrics: compute_metrics(&cm)?,
        })
    }
}

/// Fits on `train` positions of `corpus` and evaluates on `test` positions.
/// `fold` selects the seed streams.
pub fn evaluate_split(corpus: &Corpus, train: &[usize], test: &[usize], config: &PipelineConfig, seed: u64, fold: usize) -> Result<FoldOutcome, Error> {
    config.validate()?;
    Prepared::new(corpus, config).evaluate(train, test, config, seed, fold)
}

/// Per-fold outcomes and their mean and population std. Folds run in
/// parallel; results are collected in fold order.
pub fn cross_validate(corpus: &Corpus, config: &PipelineConfig, n_folds: usize, seed: u64) -> Result<CvReport, Error> {
    config.validate()?;
    let prepared = Prepared::new(corpus, config);
    let assignment = stratified_fold_indices(&prepared.labels, n_folds, seed)?;
    let folds = (0..n_folds)
        .into_par_iter()
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..assignment.len()).partition(|&i| assignment[i] == f);
            prepared.evaluate(&train, &test, config, seed, f)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let aggregate = AggregateReport::from_folds(&folds.iter().map(|f| f.metrics).collect::<Vec<_>>())?;
    Ok(CvReport { n_folds, seed, folds, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{Family, ProfileName};
    use crate::corpus::CorpusError;
    use crate::pipeline::{ThresholdMode, TuningSet};
    use crate::synth::synthetic_corpus;

    #[test]
    fn five_folds_cover_the_corpus() {
        let corpus = synthetic_corpus(10, 30, 1);
        let config = PipelineConfig::from_profile(ProfileName::PaperVanilla, Family::Dt);
        let r = cross_validate(&corpus, &config, 5, 3).unwrap();
        assert_eq!(r.folds.len(), 5);
        let mut ids: Vec<String> = r.folds.iter().flat_map(|f| f.test_ids.clone()).collect();
        ids.sort();
        assert_eq!(ids, corpus.entries().iter().map(|e| e.id.clone()).collect::<Vec<_>>());
        for f in &r.folds {
            assert_eq!(f.confusion.tp + f.confusion.fn_, 2);
            assert_eq!(f.confusion.total() as usize, f.n_test);
            assert_eq!(f.n_train + f.n_test, 40);
        }
        let again = cross_validate(&corpus, &config, 5, 3).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn aggregate_recomputes_from_folds() {
        let corpus = synthetic_corpus(10, 20, 2);
        let config = PipelineConfig::from_profile(ProfileName::PaperVanilla, Family::Knn);
        let r = cross_validate(&corpus, &config, 5, 0).unwrap();
        let f1: Vec<f64> = r.folds.iter().map(|f| f.metrics.f1).collect();
        let mean = f1.iter().sum::<f64>() / 5.0;
        let std = (f1.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0).sqrt();
        assert!((r.aggregate.f1.mean - mean).abs() < 1e-12);
        assert!((r.aggregate.f1.std - std).abs() < 1e-12);
    }

    #[test]
    fn vocabulary_scope_changes_column_count() {
        let corpus = synthetic_corpus(10, 20, 4);
        let mut config = PipelineConfig::from_profile(ProfileName::PaperVanilla, Family::Dt);
        let leak_free = cross_validate(&corpus, &config, 5, 0).unwrap();
        config.vocabulary_scope = VocabularyScope::WholeDataset;
        let whole = cross_validate(&corpus, &config, 5, 0).unwrap();
        let full = fit_vocabulary(&tokenize_corpus(&corpus, config.tokenizer)).len();
        assert!(whole.folds.iter().all(|f| f.vocabulary_size == full));
        assert!(leak_free.folds.iter().all(|f| f.vocabulary_size <= full));
    }

    #[test]
    fn evaluation_fold_tuning_dominates_default() {
        let corpus = synthetic_corpus(10, 40, 5);
        let mut config = PipelineConfig::from_profile(ProfileName::PaperVanilla, Family::Xgb);
        config.threshold = ThresholdMode::tuned(TuningSet::EvaluationFold);
        let r = cross_validate(&corpus, &config, 5, 1).unwrap();
        for f in &r.folds {
            let t = f.tuning.as_ref().unwrap();
            assert_eq!(t.n_rows, f.n_test);
            assert!(t.f1_selected >= t.f1_at_default);
            assert_eq!(f.threshold, t.curve.best_threshold);
        }
    }

    #[test]
    fn too_few_members_is_an_error() {
        let corpus = synthetic_corpus(3, 10, 0);
        let config = PipelineConfig::from_profile(ProfileName::PaperVanilla, Family::Dt);
        let err = cross_validate(&corpus, &config, 5, 0).unwrap_err();
        assert!(matches!(err, Error::Corpus(CorpusError::TooFewSamples { .. })));
    }
}
