use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, confusion};
use super::EvalError;
use crate::classifiers::label_for;
use crate::corpus::Label;

pub const GRID_LOW: f64 = 0.1;
pub const GRID_HIGH: f64 = 0.9;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// F1 at each candidate threshold, with the winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub grid: Vec<(f64, f64)>,
    pub best_threshold: f64,
    pub best_f1: f64,
}

impl ThresholdCurve {
    pub fn f1_at(&self, threshold: f64) -> Option<f64> {
        self.grid.iter().find(|(t, _)| *t == threshold).map(|(_, f)| *f)
    }
}

/// `0.1, 0.1 + step, ..., 0.9`, each rounded to the nearest `1e-9` so that
/// decimal steps land on exact values (0.5 is exactly 0.5).
pub fn threshold_grid(step: f64) -> Result<Vec<f64>, EvalError> {
    let span = GRID_HIGH - GRID_LOW;
    if !(step.is_finite() && step > 0.0) {
        return Err(EvalError::BadGridStep(step));
    }
    let n = (span / step).round();
    if (n * step - span).abs() > 1e-9 {
        return Err(EvalError::BadGridStep(step));
    }
    Ok((0..=n as usize).map(|i| ((GRID_LOW + i as f64 * step) * 1e9).round() / 1e9).collect())
}

pub fn f1_at(scores: &[f64], y_true: &[Label], threshold: f64) -> Result<f64, EvalError> {
    let pred: Vec<Label> = scores.iter().map(|&s| label_for(s, threshold)).collect();
    Ok(compute_metrics(&confusion(y_true, &pred)?)?.f1)
}

pub fn tune_threshold(scores: &[f64], y_true: &[Label], grid_step: f64) -> Result<ThresholdCurve, EvalError> {
    tune_threshold_on(scores, y_true, &threshold_grid(grid_step)?)
}

/// Picks the F1-maximizing threshold from an explicit grid; ties go to the
/// lowest threshold.
pub fn tune_threshold_on(scores: &[f64], y_true: &[Label], grid: &[f64]) -> Result<ThresholdCurve, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut curve = Vec::with_capacity(sorted.len());
    let mut best: Option<(f64, f64)> = None;
    for t in sorted {
        let f = f1_at(scores, y_true, t)?;
        if best.is_none_or(|(_, bf)| f > bf) {
            best = Some((t, f));
        }
        curve.push((t, f));
    }
    let (best_threshold, best_f1) = best.expect("grid is non-empty");
    Ok(ThresholdCurve { grid: curve, best_threshold, best_f1 })
}
