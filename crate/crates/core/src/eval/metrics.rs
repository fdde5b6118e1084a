use std::fmt;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::Label;

/// Counts with flaky as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(y_true: &[Label], y_pred: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t.is_flaky(), p.is_flaky()) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (true, false) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
    F1,
    Mcc,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Accuracy, Metric::Precision, Metric::Recall, Metric::F1, Metric::Mcc];

    pub fn key(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
            Metric::Mcc => "mcc",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Metrics whose denominator was zero; each such metric is reported as 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UndefinedMetrics {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
    pub mcc: bool,
}

impl UndefinedMetrics {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1 || self.mcc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
    pub undefined: UndefinedMetrics,
}

impl MetricReport {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Accuracy => self.accuracy,
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
            Metric::Mcc => self.mcc,
        }
    }
}

fn ratio(num: f64, den: f64, undefined: &mut bool) -> f64 {
    if den == 0.0 {
        *undefined = true;
        0.0
    } else {
        num / den
    }
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricReport, EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let (tp, fp, fn_, tn) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64, cm.tn as f64);
    let mut undefined = UndefinedMetrics::default();
    let accuracy = (tp + tn) / (tp + fp + fn_ + tn);
    let precision = ratio(tp, tp + fp, &mut undefined.precision);
    let recall = ratio(tp, tp + fn_, &mut undefined.recall);
    let f1 = ratio(2.0 * precision * recall, precision + recall, &mut undefined.f1);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = ratio(tp * tn - fp * fn_, den, &mut undefined.mcc);
    Ok(MetricReport { accuracy, precision, recall, f1, mcc, undefined })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} (± {:.3})", self.mean, self.std)
    }
}

/// Per-metric mean and population std across folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub mcc: MeanStd,
}

impl AggregateReport {
    pub fn from_folds(folds: &[MetricReport]) -> Result<AggregateReport, EvalError> {
        if folds.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        let of = |m: Metric| MeanStd::of(&folds.iter().map(|r| r.get(m)).collect::<Vec<_>>());
        Ok(AggregateReport {
            accuracy: of(Metric::Accuracy),
            precision: of(Metric::Precision),
            recall: of(Metric::Recall),
            f1: of(Metric::F1),
            mcc: of(Metric::Mcc),
        })
    }

    pub fn get(&self, m: Metric) -> MeanStd {
        match m {
            Metric::Accuracy => self.accuracy,
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
            Metric::Mcc => self.mcc,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Flaky as F, NonFlaky as N};

    fn cm(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    #[test]
    fn confusion_counts() {
        assert_eq!(confusion(&[F, F, N, N], &[F, N, F, N]).unwrap(), cm(1, 1, 1, 1));
        let y = [F, N, N, F];
        let c = confusion(&y, &y).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let mut truth = vec![F; 45];
        truth.extend(vec![N; 243]);
        assert_eq!(confusion(&truth, &vec![F; 288]).unwrap(), cm(45, 243, 0, 0));
        assert!(matches!(confusion(&[F], &[]), Err(EvalError::LengthMismatch { .. })));
    }

    #[test]
    fn metric_values() {
        let r = compute_metrics(&cm(45, 0, 0, 243)).unwrap();
        for m in Metric::ALL {
            assert_eq!(r.get(m), 1.0);
        }
        let r = compute_metrics(&cm(2, 1, 1, 2)).unwrap();
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-9);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-9);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-9);
        assert!((r.mcc - 1.0 / 3.0).abs() < 1e-9);
        let r = compute_metrics(&cm(45, 243, 0, 0)).unwrap();
        assert_eq!(r.recall, 1.0);
        assert_eq!(r.mcc, 0.0);
        assert!(r.undefined.mcc && !r.undefined.recall);
        assert_eq!(compute_metrics(&cm(0, 0, 0, 0)), Err(EvalError::EmptyMatrix));
    }

    #[test]
    fn aggregation() {
        let fold = |v: f64| MetricReport { accuracy: v, precision: v, recall: v, f1: v, mcc: v, undefined: Default::default() };
        let a = AggregateReport::from_folds(&[fold(0.8); 5]).unwrap();
        assert!((a.f1.mean - 0.8).abs() < 1e-15);
        assert_eq!(a.f1.std, 0.0);
        let a = AggregateReport::from_folds(&[fold(1.0), fold(1.0), fold(1.0), fold(1.0), fold(0.0)]).unwrap();
        assert!((a.mcc.mean - 0.8).abs() < 1e-15);
        assert!((a.mcc.std - 0.4).abs() < 1e-15);
        assert_eq!(format!("{}", a.mcc), "0.800 (± 0.400)");
    }

    proptest! {
        #[test]
        fn joint_permutation_leaves_metrics_unchanged(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60), rot in 0usize..60) {
            let to = |b: bool| if b { F } else { N };
            let t: Vec<Label> = pairs.iter().map(|p| to(p.0)).collect();
            let p: Vec<Label> = pairs.iter().map(|p| to(p.1)).collect();
            let mut t2 = t.clone();
            let mut p2 = p.clone();
            let k = rot % t.len();
            t2.rotate_left(k);
            p2.rotate_left(k);
            t2.reverse();
            p2.reverse();
            let a = compute_metrics(&confusion(&t, &p).unwrap()).unwrap();
            let b = compute_metrics(&confusion(&t2, &p2).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn class_swap_keeps_accuracy_and_abs_mcc(tp in 0u64..200, fp in 0u64..200, fn_ in 0u64..200, tn in 0u64..200) {
            prop_assume!(tp + fp + fn_ + tn > 0);
            let a = compute_metrics(&cm(tp, fp, fn_, tn)).unwrap();
            let b = compute_metrics(&cm(tn, fn_, fp, tp)).unwrap();
            prop_assert!((a.accuracy - b.accuracy).abs() < 1e-12);
            prop_assert!((a.mcc.abs() - b.mcc.abs()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.f1) && (-1.0..=1.0).contains(&a.mcc));
        }

        #[test]
        fn aggregate_recomputes(values in prop::collection::vec(0.0f64..1.0, 1..10)) {
            let folds: Vec<MetricReport> = values.iter().map(|&v| MetricReport { accuracy: v, precision: v, recall: v, f1: v, mcc: v, undefined: Default::default() }).collect();
            let a = AggregateReport::from_folds(&folds).unwrap();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!((a.recall.mean - mean).abs() < 1e-12);
            prop_assert!((a.recall.std - std).abs() < 1e-12);
        }
    }
}
