use serde::{Deserialize, Serialize};

use super::Weighting;
use crate::corpus::Label;
use crate::linalg::{squared_distance, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub weighting: Weighting,
    pub x: Matrix,
    pub y: Vec<Label>,
}

impl KnnModel {
    /// Neighbor positions and distances, nearest first, ties by lower index.
    pub fn neighbors(&self, row: &[f64]) -> Vec<(usize, f64)> {
        let mut d: Vec<(f64, usize)> = self.x.iter_rows().enumerate().map(|(i, r)| (squared_distance(r, row), i)).collect();
        let k = self.k.min(d.len());
        if k < d.len() {
            d.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.truncate(k);
        }
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().map(|(sq, i)| (i, sq.sqrt())).collect()
    }

    /// Inverse-distance weighted flaky vote. If any neighbor sits at
    /// distance zero, only the zero-distance neighbors vote.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let nn = self.neighbors(row);
        let flaky = |i: usize| if self.y[i].is_flaky() { 1.0 } else { 0.0 };
        match self.weighting {
            Weighting::Uniform => nn.iter().map(|&(i, _)| flaky(i)).sum::<f64>() / nn.len() as f64,
            Weighting::Distance => {
                let exact: Vec<usize> = nn.iter().filter(|(_, d)| *d == 0.0).map(|&(i, _)| i).collect();
                if !exact.is_empty() {
                    return exact.iter().map(|&i| flaky(i)).sum::<f64>() / exact.len() as f64;
                }
                let (num, den) = nn.iter().fold((0.0, 0.0), |(n, s), &(i, d)| (n + flaky(i) / d, s + 1.0 / d));
                num / den
            }
        }
    }
}
