//! Flaky-test detection for quantum software.
//!
//! Test files are turned into bag-of-words count vectors, optionally
//! oversampled with SMOTE and projected with PCA, and scored by one of five
//! classifier families. Stratified cross-validation, threshold tuning and
//! grid search evaluate the pipeline; the [`experiment`] module runs the full
//! matrix of datasets, imbalance remedies and models.
//!
//! ```
//! use qflake_core::classifiers::{Family, ProfileName};
//! use qflake_core::eval::cross_validate;
//! use qflake_core::pipeline::PipelineConfig;
//! use qflake_core::synth::synthetic_corpus;
//!
//! let corpus = synthetic_corpus(15, 30, 7);
//! let config = PipelineConfig::from_profile(ProfileName::PaperVanilla, Family::Dt);
//! let report = cross_validate(&corpus, &config, 5, 42).unwrap();
//! assert_eq!(report.folds.len(), 5);
//! println!("F1 {}", report.aggregate.f1);
//! ```

pub mod bundle;
pub mod classifiers;
pub mod corpus;
pub mod eval;
pub mod experiment;
pub mod linalg;
pub mod pipeline;
pub mod resample;
pub mod seed;
pub mod synth;
pub mod text;

use std::path::PathBuf;

use thiserror::Error;

pub use bundle::ModelBundle;
pub use classifiers::{ClassifierSpec, Family, TrainedModel};
pub use corpus::{Corpus, CorpusEntry, Label};
pub use linalg::{Matrix, PcaModel};
pub use pipeline::PipelineConfig;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error(transparent)]
    Resample(#[from] resample::ResampleError),
    #[error(transparent)]
    Classifier(#[from] classifiers::ClassifierError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bad model bundle: {0}")]
    Bundle(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    /// Whether the error comes from bad input or configuration rather than
    /// from a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Corpus(_) | Error::Config(_) | Error::Bundle(_))
            || matches!(self, Error::Classifier(classifiers::ClassifierError::SpecInvalid(_)))
    }
}

// The guide's snippets run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/classifiers.md")]
    mod classifiers {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/bundles.md")]
    mod bundles {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
