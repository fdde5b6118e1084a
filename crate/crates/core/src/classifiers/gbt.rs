//! Second-order gradient boosting on the binary logistic loss.

use serde::{Deserialize, Serialize};

use super::tree::{grow, ColumnIndex, FeatureSampler, Grower, SplitStats, Tree};
use super::GbtParams;
use crate::corpus::Label;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    /// Training flaky rate `p`; the initial raw score is `ln(p / (1 - p))`.
    pub base_rate: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl GbtModel {
    pub fn is_degenerate(&self) -> bool {
        self.base_rate <= 0.0 || self.base_rate >= 1.0
    }

    pub fn base_margin(&self) -> f64 {
        logit(self.base_rate)
    }

    pub fn margin_row(&self, row: &[f64]) -> f64 {
        let mut f = self.base_margin();
        for t in &self.trees {
            f += self.learning_rate * t.predict_row(row);
        }
        f
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        if self.is_degenerate() {
            return self.base_rate;
        }
        sigmoid(self.margin_row(row))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct GradStats {
    pub grad: f64,
    pub hess: f64,
    pub count: f64,
}

impl SplitStats for GradStats {
    fn add(&mut self, o: &Self) {
        self.grad += o.grad;
        self.hess += o.hess;
        self.count += o.count;
    }

    fn minus(&self, o: &Self) -> Self {
        GradStats { grad: self.grad - o.grad, hess: self.hess - o.hess, count: self.count - o.count }
    }
}

struct NewtonGrower<'a> {
    params: &'a GbtParams,
}

impl NewtonGrower<'_> {
    fn score(&self, s: &GradStats) -> f64 {
        s.grad * s.grad / (s.hess + self.params.reg_lambda)
    }
}

impl Grower for NewtonGrower<'_> {
    type Stats = GradStats;

    fn leaf_value(&self, s: &GradStats) -> f64 {
        -s.grad / (s.hess + self.params.reg_lambda)
    }

    fn samples(&self, s: &GradStats) -> f64 {
        s.count
    }

    fn is_terminal(&self, _s: &GradStats, depth: usize) -> bool {
        depth >= self.params.max_depth
    }

    fn split_gain(&self, parent: &GradStats, left: &GradStats, right: &GradStats) -> Option<f64> {
        let mcw = self.params.min_child_weight;
        if left.hess < mcw || right.hess < mcw {
            return None;
        }
        let gain = 0.5 * (self.score(left) + self.score(right) - self.score(parent)) - self.params.gamma;
        (gain > 1e-12).then_some(gain)
    }
}

/// Row gradients and hessians of the logistic loss at raw scores `margins`.
pub(crate) fn gradients(margins: &[f64], y: &[Label]) -> Vec<GradStats> {
    margins
        .iter()
        .zip(y)
        .map(|(&f, l)| {
            let p = sigmoid(f);
            let target = if l.is_flaky() { 1.0 } else { 0.0 };
            GradStats { grad: p - target, hess: p * (1.0 - p), count: 1.0 }
        })
        .collect()
}

pub(crate) fn fit_gbt(x: &Matrix, y: &[Label], params: &GbtParams) -> GbtModel {
    let n = y.len();
    let base_rate = y.iter().filter(|l| l.is_flaky()).count() as f64 / n as f64;
    let mut model = GbtModel { base_rate, learning_rate: params.learning_rate, trees: Vec::new() };
    if model.is_degenerate() || params.learning_rate == 0.0 {
        return model;
    }
    let index = ColumnIndex::new(x);
    let grower = NewtonGrower { params };
    let mut margins = vec![model.base_margin(); n];
    for _ in 0..params.n_estimators {
        let stats = gradients(&margins, y);
        let tree = grow(&grower, x, &index, &stats, (0..n).collect(), &mut FeatureSampler::All);
        for (m, row) in margins.iter_mut().zip(x.iter_rows()) {
            *m += params.learning_rate * tree.predict_row(row);
        }
        model.trees.push(tree);
    }
    model
}
