use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_class_tree, ClassGrower, ColumnIndex, FeatureSampler, Tree};
use super::ForestParams;
use crate::corpus::Label;
use crate::linalg::Matrix;
use crate::seed;

/// Bagged classification trees; the score is the mean leaf flaky fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }
}

/// Each tree sees a bootstrap sample of `n` draws and, at every split,
/// `ceil(sqrt(d))` randomly chosen non-constant features. Tree `t` uses its
/// own RNG stream, so the forest does not depend on training order.
pub(crate) fn fit_forest(x: &Matrix, y: &[Label], params: &ForestParams, seed: u64) -> Forest {
    let n = y.len();
    let d = x.cols();
    let max_features = ((d as f64).sqrt().ceil() as usize).max(1);
    let index = ColumnIndex::new(x);
    let grower = ClassGrower {
        criterion: params.tree.criterion,
        max_depth: params.tree.max_depth,
        min_samples_split: params.tree.min_samples_split,
        min_samples_leaf: params.tree.min_samples_leaf,
    };
    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::stream(seed, "rf-tree", t as u64);
            let mut weights = vec![0.0; n];
            for _ in 0..n {
                weights[rng.random_range(0..n)] += 1.0;
            }
            let mut sampler = FeatureSampler::Random { max_features, rng: &mut rng };
            fit_class_tree(x, &index, y, &weights, &grower, &mut sampler)
        })
        .collect();
    Forest { trees }
}
