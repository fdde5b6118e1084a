//! Linear soft-margin SVM trained by sequential minimal optimization on the
//! dual, with second-order working-set selection.

use serde::{Deserialize, Serialize};

use super::gbt::sigmoid;
use super::SvmParams;
use crate::corpus::Label;
use crate::linalg::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

impl SvmModel {
    pub fn margin_row(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin_row(row))
    }
}

const TAU: f64 = 1e-12;

/// Solves `min 1/2 a'Qa - e'a` s.t. `0 <= a <= C`, `y'a = 0`.
///
/// The internal positive class is the label of the first training row, so a
/// global label swap poses the identical dual problem; the result is mapped
/// back so that positive margins always mean flaky.
pub(crate) fn fit_svm(x: &Matrix, y: &[Label], params: &SvmParams) -> SvmModel {
    let n = y.len();
    let positive = y[0];
    let ys: Vec<f64> = y.iter().map(|&l| if l == positive { 1.0 } else { -1.0 }).collect();
    let c = params.c;

    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = dot(x.row(i), x.row(j));
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }
    let q = |i: usize, j: usize| ys[i] * ys[j] * kernel[i * n + j];
    let qd: Vec<f64> = (0..n).map(|i| kernel[i * n + i]).collect();

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let max_iter = params.max_iter.max(100 * n);
    let mut iterations = 0;

    while iterations < max_iter {
        // i: maximal violator among the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = -ys[t] * grad[t];
            let movable = if ys[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if movable && v >= gmax {
                gmax = v;
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else { break };
        // j: second-order choice among the "low" set
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            let movable = if ys[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !movable {
                continue;
            }
            let v = ys[t] * grad[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let mut quad = qd[i] + qd[t] - 2.0 * ys[i] * ys[t] * kernel[i * n + t];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -(diff * diff) / quad;
                if obj <= best_obj {
                    best_obj = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel else { break };
        if gmax + gmax2 < params.tol {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if ys[i] != ys[j] {
            let mut quad = qd[i] + qd[j] + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    // bias from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb, mut free_sum, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if upper(alpha[t]) {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    };

    let mut weights = vec![0.0; x.cols()];
    for t in 0..n {
        if alpha[t] != 0.0 {
            let coef = alpha[t] * ys[t];
            for (w, v) in weights.iter_mut().zip(x.row(t)) {
                *w += coef * v;
            }
        }
    }
    let sign = if positive.is_flaky() { 1.0 } else { -1.0 };
    weights.iter_mut().for_each(|w| *w *= sign);
    SvmModel { weights, bias: -rho * sign, iterations }
}
