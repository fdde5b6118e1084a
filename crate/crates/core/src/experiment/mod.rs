//! The experiment matrix: {balanced, imbalanced} data crossed with
//! {vanilla, SMOTE, threshold, hybrid} methods and the five model families.

pub mod paper_tables;
mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifiers::{Family, ProfileName};
use crate::corpus::{select_subset, Corpus, Label, SubsetMode};
use crate::eval::grid::{apply_point, grid_search, nested_grid_search, ParamGrid};
use crate::eval::{cross_validate, threshold_grid, AggregateReport, FoldOutcome};
use crate::pipeline::{PipelineConfig, ThresholdMode, TuningSet, VocabularyScope, DEFAULT_SMOTE_NEIGHBORS};
use crate::text::TokenizerProfile;
use crate::Error;

pub use report::{csv_header, delta_rows, render_csv, render_deltas_csv, render_text, run_id, write_suite, SuiteOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetMode {
    Balanced,
    Imbalanced,
}

impl DatasetMode {
    pub fn key(self) -> &'static str {
        match self {
            DatasetMode::Balanced => "balanced",
            DatasetMode::Imbalanced => "imbalanced",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vanilla,
    Smote,
    Threshold,
    Hybrid,
}

impl Method {
    /// Table order.
    pub const ALL: [Method; 4] = [Method::Vanilla, Method::Smote, Method::Threshold, Method::Hybrid];

    pub fn key(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Smote => "smote",
            Method::Threshold => "threshold",
            Method::Hybrid => "hybrid",
        }
    }

    pub fn uses_smote(self) -> bool {
        matches!(self, Method::Smote | Method::Hybrid)
    }

    pub fn tunes_threshold(self) -> bool {
        matches!(self, Method::Threshold | Method::Hybrid)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.key() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown method {s:?} (expected vanilla, smote, threshold or hybrid)"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CvMode {
    /// Grids, when present, are searched inside the reported CV.
    #[default]
    Flat,
    /// Each outer fold runs its own inner search.
    Nested { inner_folds: usize },
}

/// Settings shared by every cell of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub seed: u64,
    pub n_folds: usize,
    pub vocabulary_scope: VocabularyScope,
    pub threshold_set: TuningSet,
    pub threshold_grid: Vec<f64>,
    pub smote_neighbors: usize,
    pub tokenizer: TokenizerProfile,
    pub cv_mode: CvMode,
    /// Per-family hyperparameter grids; families without one use their
    /// profile as is.
    pub grids: BTreeMap<Family, ParamGrid>,
    /// Per-family hyperparameter overrides applied on top of the profile
    /// (`pca_components` included).
    pub overrides: BTreeMap<Family, BTreeMap<String, Value>>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            seed: 42,
            n_folds: 5,
            vocabulary_scope: VocabularyScope::TrainingFolds,
            threshold_set: TuningSet::InnerHoldout,
            threshold_grid: threshold_grid(0.1).expect("0.1 divides the span"),
            smote_neighbors: DEFAULT_SMOTE_NEIGHBORS,
            tokenizer: TokenizerProfile::Default,
            cv_mode: CvMode::Flat,
            grids: BTreeMap::new(),
            overrides: BTreeMap::new(),
        }
    }
}

impl RunSettings {
    /// The pipeline for one cell: the profile matching the method, PCA only
    /// where the profile has it (KNN, SVM), SMOTE and threshold tuning as the
    /// method dictates, then any overrides.
    pub fn pipeline(&self, method: Method, family: Family) -> Result<PipelineConfig, Error> {
        let profile = if method.uses_smote() { ProfileName::PaperSmote } else { ProfileName::PaperVanilla };
        let mut config = PipelineConfig::from_profile(profile, family);
        config.smote_neighbors = method.uses_smote().then_some(self.smote_neighbors);
        config.threshold = if method.tunes_threshold() {
            ThresholdMode::Tune { on: self.threshold_set, grid: self.threshold_grid.clone() }
        } else {
            ThresholdMode::default()
        };
        config.tokenizer = self.tokenizer;
        config.vocabulary_scope = self.vocabulary_scope;
        if let Some(over) = self.overrides.get(&family) {
            let point: Vec<(String, Value)> = over.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
            config = apply_point(&config, &point)?;
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), Error> {
        if self.n_folds < 2 {
            return Err(Error::Config(format!("n_folds must be at least 2, got {}", self.n_folds)));
        }
        if let CvMode::Nested { inner_folds } = self.cv_mode {
            if inner_folds < 2 {
                return Err(Error::Config("inner_folds must be at least 2".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetMode,
    pub method: Method,
    pub families: Vec<Family>,
    #[serde(flatten)]
    pub settings: RunSettings,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.dataset == DatasetMode::Balanced && self.method != Method::Vanilla {
            return Err(Error::Config(format!("the balanced dataset only runs vanilla models, not {}", self.method)));
        }
        if self.families.is_empty() {
            return Err(Error::Config("no model families selected".into()));
        }
        self.settings.validate()
    }
}

/// Audit trail for one table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub profile: ProfileName,
    pub pipeline: PipelineConfig,
    pub smote: bool,
    pub pca_requested: Option<usize>,
    /// Effective component count per fold.
    pub pca_effective: Vec<Option<usize>>,
    /// Decision threshold per fold.
    pub thresholds: Vec<f64>,
    /// Grid-search winners per fold, when a grid was searched.
    pub grid_choices: Vec<BTreeMap<String, Value>>,
    pub folds: Vec<FoldOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub family: Family,
    pub aggregate: AggregateReport,
    pub cell: CellRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub dataset: DatasetMode,
    pub seed: u64,
    pub n_folds: usize,
    pub corpus_hash: String,
    pub class_counts: BTreeMap<Label, usize>,
    pub vocabulary_scope: VocabularyScope,
    pub threshold_set: TuningSet,
    pub cv_mode: CvMode,
    pub tokenizer: TokenizerProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub metadata: TableMetadata,
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn row(&self, method: Method, family: Family) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.method == method && r.family == family)
    }

    pub fn dataset(&self) -> DatasetMode {
        self.metadata.dataset
    }
}

fn subset_for(corpus: &Corpus, dataset: DatasetMode, seed: u64) -> Result<Corpus, Error> {
    let mode = match dataset {
        DatasetMode::Balanced => SubsetMode::Balanced,
        DatasetMode::Imbalanced => SubsetMode::Imbalanced,
    };
    Ok(select_subset(corpus, mode, seed)?)
}

fn run_cell(data: &Corpus, method: Method, family: Family, settings: &RunSettings) -> Result<ResultRow, Error> {
    let pipeline = settings.pipeline(method, family)?;
    let (folds, grid_choices, effective) = match settings.grids.get(&family) {
        None => (cross_validate(data, &pipeline, settings.n_folds, settings.seed)?.folds, Vec::new(), pipeline.clone()),
        Some(grid) => match settings.cv_mode {
            CvMode::Flat => {
                let search = grid_search(data, &pipeline, grid, settings.n_folds, settings.seed)?;
                let report = cross_validate(data, &search.best_config, settings.n_folds, settings.seed)?;
                let choice = search.best().params.clone();
                (report.folds, vec![choice; settings.n_folds], search.best_config)
            }
            CvMode::Nested { inner_folds } => {
                let nested = nested_grid_search(data, &pipeline, grid, settings.n_folds, inner_folds, settings.seed)?;
                let choices = nested.folds.iter().map(|f| f.chosen.clone()).collect();
                (nested.folds.into_iter().map(|f| f.outcome).collect(), choices, pipeline.clone())
            }
        },
    };
    let aggregate = AggregateReport::from_folds(&folds.iter().map(|f| f.metrics).collect::<Vec<_>>())?;
    let cell = CellRecord {
        profile: effective.profile.expect("cells always start from a profile"),
        smote: effective.smote_neighbors.is_some(),
        pca_requested: effective.pca_components,
        pca_effective: folds.iter().map(|f| f.pca_components).collect(),
        thresholds: folds.iter().map(|f| f.threshold).collect(),
        grid_choices,
        pipeline: effective,
        folds,
    };
    Ok(ResultRow { method, family, aggregate, cell })
}

fn metadata(data: &Corpus, dataset: DatasetMode, settings: &RunSettings) -> TableMetadata {
    TableMetadata {
        dataset,
        seed: settings.seed,
        n_folds: settings.n_folds,
        corpus_hash: data.content_hash(),
        class_counts: data.class_counts(),
        vocabulary_scope: settings.vocabulary_scope,
        threshold_set: settings.threshold_set,
        cv_mode: settings.cv_mode,
        tokenizer: settings.tokenizer,
    }
}

fn ordered(families: &[Family]) -> Vec<Family> {
    Family::ALL.into_iter().filter(|f| families.contains(f)).collect()
}

/// One method on one dataset for the selected families. Either every cell
/// succeeds or the whole run fails.
pub fn run_configuration(corpus: &Corpus, config: &ExperimentConfig) -> Result<ResultsTable, Error> {
    config.validate()?;
    let data = subset_for(corpus, config.dataset, config.settings.seed)?;
    let rows = ordered(&config.families)
        .into_par_iter()
        .map(|f| run_cell(&data, config.method, f, &config.settings))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ResultsTable { metadata: metadata(&data, config.dataset, &config.settings), rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub families: Vec<Family>,
    /// Methods for the imbalanced table; the balanced table runs only when
    /// vanilla is among them.
    pub methods: Vec<Method>,
    #[serde(flatten)]
    pub settings: RunSettings,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { families: Family::ALL.to_vec(), methods: Method::ALL.to_vec(), settings: RunSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub balanced: Option<ResultsTable>,
    pub imbalanced: Option<ResultsTable>,
}

/// The full matrix: vanilla on the balanced subset, then every method on the
/// imbalanced corpus, rows in table order (method, then family).
pub fn run_paper_suite(corpus: &Corpus, suite: &SuiteConfig) -> Result<SuiteResult, Error> {
    suite.settings.validate()?;
    let families = ordered(&suite.families);
    let methods: Vec<Method> = Method::ALL.into_iter().filter(|m| suite.methods.contains(m)).collect();
    if families.is_empty() || methods.is_empty() {
        return Err(Error::Config("suite needs at least one family and one method".into()));
    }
    let settings = &suite.settings;
    let balanced = subset_for(corpus, DatasetMode::Balanced, settings.seed)?;
    let imbalanced = subset_for(corpus, DatasetMode::Imbalanced, settings.seed)?;

    let mut jobs = Vec::new();
    if methods.contains(&Method::Vanilla) {
        jobs.extend(families.iter().map(|&f| (DatasetMode::Balanced, Method::Vanilla, f)));
    }
    for &m in &methods {
        jobs.extend(families.iter().map(|&f| (DatasetMode::Imbalanced, m, f)));
    }
    let rows = jobs
        .into_par_iter()
        .map(|(d, m, f)| {
            let data = if d == DatasetMode::Balanced { &balanced } else { &imbalanced };
            run_cell(data, m, f, settings).map(|r| (d, r))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let table = |d: DatasetMode, data: &Corpus| {
        let rows: Vec<ResultRow> = rows.iter().filter(|(dd, _)| *dd == d).map(|(_, r)| r.clone()).collect();
        (!rows.is_empty()).then(|| ResultsTable { metadata: metadata(data, d, settings), rows })
    };
    Ok(SuiteResult { balanced: table(DatasetMode::Balanced, &balanced), imbalanced: table(DatasetMode::Imbalanced, &imbalanced) })
}
