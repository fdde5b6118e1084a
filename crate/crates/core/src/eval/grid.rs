//! Grid search over pipeline hyperparameters, scored by cross-validated
//! mean F1.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::cv::{cross_validate, FoldOutcome, Prepared};
use super::metrics::AggregateReport;
use super::EvalError;
use crate::corpus::{stratified_fold_indices, Corpus};
use crate::pipeline::PipelineConfig;
use crate::seed;
use crate::Error;

/// Name of the grid axis that sets the PCA component count (`null` turns
/// PCA off). Every other name is a classifier hyperparameter.
pub const PCA_AXIS: &str = "pca_components";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<Value>,
}

/// Axes in declared order. Points enumerate the cartesian product with the
/// first axis varying slowest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamGrid {
    pub axes: Vec<GridAxis>,
}

impl ParamGrid {
    pub fn axis(mut self, name: &str, values: Vec<Value>) -> Self {
        self.axes.push(GridAxis { name: name.to_string(), values });
        self
    }

    pub fn points(&self) -> Vec<Vec<(String, Value)>> {
        let mut points = vec![Vec::new()];
        for axis in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((axis.name.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        if self.axes.is_empty() || self.axes.iter().any(|a| a.values.is_empty()) {
            return Vec::new();
        }
        points
    }
}

/// `base` with one grid point applied.
pub fn apply_point(base: &PipelineConfig, point: &[(String, Value)]) -> Result<PipelineConfig, Error> {
    let mut config = base.clone();
    for (name, value) in point {
        if name == PCA_AXIS {
            config.pca_components = match value {
                Value::Null => None,
                v => Some(v.as_u64().ok_or_else(|| Error::Config(format!("{PCA_AXIS} must be an integer or null, got {v}")))? as usize),
            };
        } else {
            config.spec.set_param(name, value)?;
        }
    }
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPointResult {
    pub params: BTreeMap<String, Value>,
    pub aggregate: AggregateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub points: Vec<GridPointResult>,
    pub best_index: usize,
    pub best_config: PipelineConfig,
}

impl GridSearchResult {
    pub fn best(&self) -> &GridPointResult {
        &self.points[self.best_index]
    }
}

/// Flat search: every point is scored by the same `n_folds` CV that the
/// caller reports. Ties go to the first point in declared order.
pub fn grid_search(corpus: &Corpus, base: &PipelineConfig, grid: &ParamGrid, n_folds: usize, seed: u64) -> Result<GridSearchResult, Error> {
    let points = grid.points();
    if points.is_empty() {
        return Err(EvalError::EmptyGrid.into());
    }
    let configs = points.iter().map(|p| apply_point(base, p)).collect::<Result<Vec<_>, _>>()?;
    let reports = configs
        .par_iter()
        .map(|c| cross_validate(corpus, c, n_folds, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best_index = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.aggregate.f1.mean > reports[best_index].aggregate.f1.mean {
            best_index = i;
        }
    }
    let results = points
        .into_iter()
        .zip(&reports)
        .map(|(p, r)| GridPointResult { params: p.into_iter().collect(), aggregate: r.aggregate })
        .collect();
    Ok(GridSearchResult { points: results, best_index, best_config: configs[best_index].clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedFold {
    pub chosen: BTreeMap<String, Value>,
    pub outcome: FoldOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedReport {
    pub n_folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
    pub folds: Vec<NestedFold>,
    pub aggregate: AggregateReport,
}

/// Nested search: each outer training fold runs its own flat search with
/// `inner_folds`, and the winner is scored once on the outer test fold.
pub fn nested_grid_search(
    corpus: &Corpus,
    base: &PipelineConfig,
    grid: &ParamGrid,
    n_folds: usize,
    inner_folds: usize,
    seed: u64,
) -> Result<NestedReport, Error> {
    base.validate()?;
    let labels = corpus.labels();
    let assignment = stratified_fold_indices(&labels, n_folds, seed)?;
    let prepared = Prepared::new(corpus, base);
    let folds = (0..n_folds)
        .into_par_iter()
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..assignment.len()).partition(|&i| assignment[i] == f);
            let inner = corpus.subset(&train);
            let search = grid_search(&inner, base, grid, inner_folds, seed::derive(seed, "nested", f as u64))?;
            let outcome = prepared.evaluate(&train, &test, &search.best_config, seed, f)?;
            Ok(NestedFold { chosen: search.best().params.clone(), outcome })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let aggregate = AggregateReport::from_folds(&folds.iter().map(|f| f.outcome.metrics).collect::<Vec<_>>())?;
    Ok(NestedReport { n_folds, inner_folds, seed, folds, aggregate })
}
