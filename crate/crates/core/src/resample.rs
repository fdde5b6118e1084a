//! SMOTE oversampling of the minority class.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::linalg::{squared_distance, Matrix};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResampleError {
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("minority class has {0} samples; SMOTE needs at least 2")]
    MinorityTooSmall(usize),
    #[error("k_neighbors must be at least 1")]
    InvalidK,
}

/// Where a synthetic row came from: `row = X[origin] + coefficient * (X[neighbor] - X[origin])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOrigin {
    pub origin: usize,
    pub neighbor: usize,
    pub coefficient: f64,
}

/// Original rows first, unchanged, followed by synthetic minority rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledSet {
    pub x: Matrix,
    pub y: Vec<Label>,
    pub synthetic_mask: Vec<bool>,
    pub provenance: Vec<SyntheticOrigin>,
}

impl ResampledSet {
    pub fn n_synthetic(&self) -> usize {
        self.provenance.len()
    }
}

/// Indices of the `k` nearest rows among `candidates` (excluding `of` itself),
/// by Euclidean distance with ties broken by lower index.
pub(crate) fn nearest_among(x: &Matrix, of: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let mut dists: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&c| c != of)
        .map(|&c| (squared_distance(x.row(of), x.row(c)), c))
        .collect();
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dists.into_iter().take(k).map(|(_, c)| c).collect()
}

/// Oversamples the minority class until both classes have equal counts.
///
/// Minority rows are visited cyclically in a seeded shuffled order; each
/// visit interpolates toward one of the row's `min(k_neighbors, m - 1)`
/// nearest minority neighbors, chosen uniformly, at a uniform coefficient
/// in `[0, 1)`. Already balanced input is returned unchanged.
pub fn smote_resample(x: &Matrix, y: &[Label], k_neighbors: usize, seed: u64) -> Result<ResampledSet, ResampleError> {
    if x.rows() != y.len() {
        return Err(ResampleError::LengthMismatch { rows: x.rows(), labels: y.len() });
    }
    if k_neighbors == 0 {
        return Err(ResampleError::InvalidK);
    }
    let flaky = y.iter().filter(|l| l.is_flaky()).count();
    let nonflaky = y.len() - flaky;
    let unchanged = || ResampledSet { x: x.clone(), y: y.to_vec(), synthetic_mask: vec![false; y.len()], provenance: Vec::new() };
    if flaky == nonflaky {
        return Ok(unchanged());
    }
    let minority_label = if flaky < nonflaky { Label::Flaky } else { Label::NonFlaky };
    let minority: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_label).collect();
    if minority.len() < 2 {
        return Err(ResampleError::MinorityTooSmall(minority.len()));
    }
    let needed = flaky.abs_diff(nonflaky);
    let k = k_neighbors.min(minority.len() - 1);
    let neighbors: Vec<Vec<usize>> = minority.iter().map(|&i| nearest_among(x, i, &minority, k)).collect();

    let mut rng = seed::stream(seed, "smote", 0);
    let mut order: Vec<usize> = (0..minority.len()).collect();
    order.shuffle(&mut rng);

    let mut out = x.clone();
    let mut labels = y.to_vec();
    let mut provenance = Vec::with_capacity(needed);
    let mut row = vec![0.0; x.cols()];
    for step in 0..needed {
        let slot = order[step % order.len()];
        let origin = minority[slot];
        let neighbor = neighbors[slot][rng.random_range(0..k)];
        let coefficient: f64 = rng.random();
        for ((dst, &a), &b) in row.iter_mut().zip(x.row(origin)).zip(x.row(neighbor)) {
            *dst = a + coefficient * (b - a);
        }
        out.push_row(&row);
        labels.push(minority_label);
        provenance.push(SyntheticOrigin { origin, neighbor, coefficient });
    }
    let mut synthetic_mask = vec![false; y.len()];
    synthetic_mask.resize(labels.len(), true);
    Ok(ResampledSet { x: out, y: labels, synthetic_mask, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Flaky as F, NonFlaky as N};

    #[test]
    fn interpolates_on_segment() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [5.0, 5.0], [6.0, 5.0], [7.0, 5.0]]).unwrap();
        let y = [F, F, N, N, N];
        let r = smote_resample(&x, &y, 1, 11).unwrap();
        assert_eq!(r.x.rows(), 6);
        assert_eq!(r.synthetic_mask, [false, false, false, false, false, true]);
        assert_eq!(r.y[5], F);
        let p = r.x.row(5);
        assert_eq!(p[1], 0.0);
        assert!((0.0..=2.0).contains(&p[0]));
    }

    #[test]
    fn balanced_input_is_untouched() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let y = [F, N, F, N];
        let r = smote_resample(&x, &y, 5, 0).unwrap();
        assert_eq!(r.x, x);
        assert!(r.synthetic_mask.iter().all(|m| !m));
        assert_eq!(r.n_synthetic(), 0);
    }

    #[test]
    fn paper_ratio_yields_198_synthetics() {
        let rows: Vec<[f64; 3]> = (0..288).map(|i| [i as f64, (i % 7) as f64, (i % 3) as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<Label> = (0..288).map(|i| if i < 45 { F } else { N }).collect();
        let r = smote_resample(&x, &y, 5, 42).unwrap();
        assert_eq!(r.y.iter().filter(|l| l.is_flaky()).count(), 243);
        assert_eq!(r.n_synthetic(), 198);
        // cyclic visiting: every minority row is an origin 4 or 5 times
        let mut uses = [0; 45];
        r.provenance.iter().for_each(|p| uses[p.origin] += 1);
        assert!(uses.iter().all(|&u| u == 4 || u == 5));
    }

    #[test]
    fn errors() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        assert_eq!(smote_resample(&x, &[F, N, N], 5, 0), Err(ResampleError::MinorityTooSmall(1)));
        assert_eq!(smote_resample(&x, &[F, N], 5, 0), Err(ResampleError::LengthMismatch { rows: 3, labels: 2 }));
        assert_eq!(smote_resample(&x, &[F, F, N], 0, 0), Err(ResampleError::InvalidK));
    }

    #[test]
    fn minority_can_be_nonflaky() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0]]).unwrap();
        let r = smote_resample(&x, &[F, F, F, N, N], 5, 0).unwrap();
        assert_eq!(r.y[5], N);
        assert!((3.0..=4.0).contains(&r.x.get(5, 0)));
    }

    #[test]
    fn neighbor_ties_prefer_lower_index() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [-1.0], [1.0]]).unwrap();
        assert_eq!(nearest_among(&x, 0, &[0, 1, 2, 3], 2), vec![1, 2]);
        assert_eq!(nearest_among(&x, 0, &[3, 2, 1, 0], 3), vec![1, 2, 3]);
    }

    proptest! {
        #[test]
        fn synthetic_rows_are_convex_combinations(
            minority in 2usize..8, majority in 8usize..20, k in 1usize..6, seed: u64,
        ) {
            use rand::Rng;
            let mut rng = crate::seed::rng(seed);
            let n = minority + majority;
            let data: Vec<f64> = (0..n * 3).map(|_| rng.random_range(0..5) as f64).collect();
            let x = Matrix::new(n, 3, data).unwrap();
            let y: Vec<Label> = (0..n).map(|i| if i < minority { F } else { N }).collect();
            let r = smote_resample(&x, &y, k, seed).unwrap();
            prop_assert_eq!(r.y.iter().filter(|l| l.is_flaky()).count(), majority);
            for i in 0..n {
                prop_assert_eq!(r.x.row(i), x.row(i));
            }
            let keff = k.min(minority - 1);
            let idx: Vec<usize> = (0..minority).collect();
            for (s, p) in r.provenance.iter().enumerate() {
                prop_assert!(nearest_among(&x, p.origin, &idx, keff).contains(&p.neighbor));
                prop_assert!((0.0..=1.0).contains(&p.coefficient));
                let row = r.x.row(n + s);
                for j in 0..3 {
                    let want = x.get(p.origin, j) + p.coefficient * (x.get(p.neighbor, j) - x.get(p.origin, j));
                    prop_assert!((row[j] - want).abs() <= 1e-12);
                }
            }
            prop_assert_eq!(r, smote_resample(&x, &y, k, seed).unwrap());
        }
    }
}
