//! Self-describing model bundles stored as canonical JSON.
//!
//! Keys are sorted and floats use the shortest decimal that round-trips, so
//! save, load, save yields identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::{label_for, Family, ProfileName, TrainedModel};
use crate::corpus::{Corpus, Label};
use crate::linalg::{Matrix, PcaModel};
use crate::pipeline::{FittedPipeline, PipelineConfig, TuningRecord};
use crate::text::{tokenize, transform, TokenizerProfile, Vocabulary};
use crate::Error;

pub const FORMAT_VERSION: u32 = 1;

/// Serializes with sorted keys, pretty-printed, newline-terminated.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String, Error> {
    // Value's object map is ordered by key, so the round trip sorts every level.
    let v = serde_json::to_value(value).map_err(|e| Error::Bundle(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Bundle(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    pub family: Family,
    pub profile: Option<ProfileName>,
    pub seed: u64,
    pub corpus_hash: String,
    pub class_counts: BTreeMap<Label, usize>,
    /// Unix seconds taken from `SOURCE_DATE_EPOCH`; absent otherwise so that
    /// rebuilt bundles stay byte-identical.
    pub created_at: Option<u64>,
    pub pipeline: PipelineConfig,
    pub tuning: Option<TuningRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub tokenizer: TokenizerProfile,
    pub vocabulary: Vocabulary,
    pub pca: Option<PcaModel>,
    pub model: TrainedModel,
    pub threshold: f64,
    pub metadata: BundleMetadata,
}

/// One scored file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub score: f64,
    pub label: Label,
}

impl ModelBundle {
    pub fn from_fitted(fitted: FittedPipeline, corpus: &Corpus, seed: u64, created_at: Option<u64>) -> Self {
        let FittedPipeline { config, vocabulary, features, threshold, tuning } = fitted;
        ModelBundle {
            format_version: FORMAT_VERSION,
            tokenizer: config.tokenizer,
            vocabulary,
            pca: features.pca,
            threshold,
            metadata: BundleMetadata {
                family: features.model.family(),
                profile: config.profile,
                seed,
                corpus_hash: corpus.content_hash(),
                class_counts: corpus.class_counts(),
                created_at,
                pipeline: config,
                tuning,
            },
            model: features.model,
        }
    }

    pub fn to_json(&self) -> Result<String, Error> {
        canonical_json(self)
    }

    /// Parses and validates a bundle.
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let probe: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Bundle(format!("not JSON: {e}")))?;
        match probe.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => return Err(Error::Bundle(format!("unsupported format_version {v} (expected {FORMAT_VERSION})"))),
            None => return Err(Error::Bundle("missing format_version".into())),
        }
        let bundle: ModelBundle = serde_json::from_value(probe).map_err(|e| Error::Bundle(e.to_string()))?;
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Bundle(m));
        if self.metadata.family != self.model.family() {
            return bad(format!("metadata names {} but the model is {}", self.metadata.family, self.model.family()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} is outside [0, 1]", self.threshold));
        }
        let v = self.vocabulary.len();
        let width = match &self.pca {
            Some(p) => {
                let k = p.n_components();
                if p.n_features() != v || p.components.rows() != k || p.components.cols() != v || p.explained_variance.len() != k {
                    return bad("PCA shapes disagree with the vocabulary".into());
                }
                k
            }
            None => v,
        };
        if self.model.n_features != width {
            return bad(format!("model expects {} features but the pipeline yields {width}", self.model.n_features));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        fs::write(path, self.to_json()?).map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn vectorize<S: AsRef<str>>(&self, texts: &[S]) -> Matrix {
        let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t.as_ref(), self.tokenizer)).collect();
        transform(&docs, &self.vocabulary)
    }

    pub fn score_texts<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<f64>, Error> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let x = self.vectorize(texts);
        let x = match &self.pca {
            Some(p) => p.transform(&x)?,
            None => x,
        };
        Ok(self.model.score(&x)?)
    }

    pub fn predict_texts<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<Prediction>, Error> {
        Ok(self
            .score_texts(texts)?
            .into_iter()
            .map(|score| Prediction { score, label: label_for(score, self.threshold) })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::fit_pipeline;
    use crate::synth::synthetic_corpus;

    fn bundle(family: Family) -> (ModelBundle, Corpus) {
        let corpus = synthetic_corpus(8, 16, 2);
        let config = PipelineConfig::from_profile(ProfileName::PaperVanilla, family);
        let fitted = fit_pipeline(&corpus, &config, 5).unwrap();
        (ModelBundle::from_fitted(fitted, &corpus, 5, None), corpus)
    }

    #[test]
    fn round_trip_is_byte_stable() {
        for family in Family::ALL {
            let (b, corpus) = bundle(family);
            let text = b.to_json().unwrap();
            let back = ModelBundle::from_json(&text).unwrap();
            assert_eq!(back.to_json().unwrap(), text);
            let texts: Vec<&str> = corpus.entries().iter().map(|e| e.text.as_str()).collect();
            assert_eq!(back.score_texts(&texts).unwrap(), b.score_texts(&texts).unwrap());
        }
    }

    #[test]
    fn knn_scores_training_flaky_file_as_one() {
        let (b, corpus) = bundle(Family::Knn);
        let flaky = corpus.entries().iter().find(|e| e.label.is_flaky()).unwrap();
        let p = b.predict_texts(&[flaky.text.as_str()]).unwrap();
        assert_eq!(p[0].score, 1.0);
        assert_eq!(p[0].label, Label::Flaky);
    }

    #[test]
    fn rejects_foreign_versions_and_mismatches() {
        let (b, _) = bundle(Family::Dt);
        let mut v: serde_json::Value = serde_json::from_str(&b.to_json().unwrap()).unwrap();
        v["format_version"] = 2.into();
        assert!(matches!(ModelBundle::from_json(&v.to_string()), Err(Error::Bundle(m)) if m.contains("format_version")));
        let mut v: serde_json::Value = serde_json::from_str(&b.to_json().unwrap()).unwrap();
        v["metadata"]["family"] = "svm".into();
        assert!(ModelBundle::from_json(&v.to_string()).is_err());
        assert!(ModelBundle::from_json("{").is_err());
    }

    #[test]
    fn out_of_vocabulary_file_scores() {
        let (b, _) = bundle(Family::Xgb);
        let s = b.score_texts(&["zzzz_unknown qqqq_unknown"]).unwrap();
        assert!((0.0..=1.0).contains(&s[0]));
    }
}
