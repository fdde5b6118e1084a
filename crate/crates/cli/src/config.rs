//! The optional `--config` JSON file. Every key is optional; flags win over
//! the file, and the file wins over profile defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use qflake_core::classifiers::{Family, ProfileName};
use qflake_core::corpus::SubsetMode;
use qflake_core::experiment::RunSettings;
use qflake_core::pipeline::{ThresholdMode, VocabularyScope};
use qflake_core::text::TokenizerProfile;
use serde::Deserialize;
use serde_json::Value;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub model: Option<Family>,
    pub profile: Option<ProfileName>,
    /// Hyperparameter overrides by name, `pca_components` included.
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    pub smote_neighbors: Option<usize>,
    pub smote: Option<bool>,
    pub threshold: Option<ThresholdMode>,
    pub tokenizer: Option<TokenizerProfile>,
    pub vocabulary_scope: Option<VocabularyScope>,
    pub n_folds: Option<usize>,
    pub dataset: Option<SubsetMode>,
    /// Settings for `experiment`, in the same shape as `run.json` records them.
    pub experiment: Option<RunSettings>,
    pub methods: Option<Vec<String>>,
    pub models: Option<Vec<Family>>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, String> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }
}
