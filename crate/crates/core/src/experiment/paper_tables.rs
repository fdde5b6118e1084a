//! Published reference values, used only to print deltas next to our own
//! numbers. Each entry is `(mean, std)` for accuracy, precision, recall, F1
//! and MCC, in that order.

use super::{DatasetMode, Method};
use crate::classifiers::Family;
use crate::eval::MeanStd;

type Row = [(f64, f64); 5];

const BALANCED: [(Family, Row); 5] = [
    (Family::Xgb, [(0.933, 0.042), (0.924, 0.069), (0.956, 0.089), (0.934, 0.043), (0.877, 0.075)]),
    (Family::Dt, [(0.889, 0.092), (0.938, 0.123), (0.867, 0.163), (0.883, 0.103), (0.805, 0.156)]),
    (Family::Rf, [(0.889, 0.050), (0.878, 0.071), (0.911, 0.083), (0.891, 0.050), (0.786, 0.100)]),
    (Family::Knn, [(0.744, 0.056), (0.872, 0.108), (0.600, 0.151), (0.690, 0.106), (0.525, 0.099)]),
    (Family::Svm, [(0.833, 0.086), (0.858, 0.096), (0.800, 0.130), (0.824, 0.101), (0.673, 0.171)]),
];

const IMBALANCED_VANILLA: [(Family, Row); 5] = [
    (Family::Xgb, [(0.980, 0.040), (0.778, 0.122), (0.859, 0.055), (0.850, 0.055), (0.441, 0.091)]),
    (Family::Dt, [(0.962, 0.025), (0.913, 0.121), (0.867, 0.129), (0.877, 0.079), (0.864, 0.087)]),
    (Family::Rf, [(0.961, 0.020), (0.946, 0.065), (0.800, 0.083), (0.866, 0.082), (0.849, 0.083)]),
    (Family::Knn, [(0.892, 0.013), (0.920, 0.098), (0.356, 0.109), (0.497, 0.110), (0.522, 0.073)]),
    (Family::Svm, [(0.920, 0.024), (0.845, 0.094), (0.622, 0.194), (0.691, 0.128), (0.672, 0.112)]),
];

const IMBALANCED_SMOTE: [(Family, Row); 5] = [
    (Family::Xgb, [(0.969, 0.023), (0.978, 0.044), (0.822, 0.151), (0.884, 0.096), (0.877, 0.094)]),
    (Family::Dt, [(0.955, 0.042), (0.920, 0.160), (0.844, 0.206), (0.850, 0.144), (0.845, 0.140)]),
    (Family::Rf, [(0.944, 0.013), (0.824, 0.048), (0.822, 0.054), (0.822, 0.054), (0.790, 0.049)]),
    (Family::Knn, [(0.872, 0.044), (0.605, 0.138), (0.622, 0.206), (0.592, 0.144), (0.531, 0.162)]),
    (Family::Svm, [(0.920, 0.024), (0.845, 0.094), (0.622, 0.194), (0.691, 0.128), (0.672, 0.112)]),
];

const IMBALANCED_THRESHOLD: [(Family, Row); 5] = [
    (Family::Xgb, [(0.962, 0.013), (0.964, 0.073), (0.800, 0.130), (0.863, 0.056), (0.854, 0.055)]),
    (Family::Dt, [(0.965, 0.027), (0.938, 0.137), (0.866, 0.144), (0.886, 0.083), (0.877, 0.089)]),
    (Family::Rf, [(0.961, 0.023), (0.946, 0.073), (0.800, 0.092), (0.866, 0.082), (0.849, 0.093)]),
    (Family::Knn, [(0.875, 0.031), (0.650, 0.152), (0.556, 0.136), (0.579, 0.094), (0.521, 0.100)]),
    (Family::Svm, [(0.920, 0.015), (0.756, 0.050), (0.733, 0.169), (0.733, 0.082), (0.694, 0.086)]),
];

const IMBALANCED_HYBRID: [(Family, Row); 5] = [
    (Family::Xgb, [(0.969, 0.023), (0.978, 0.044), (0.822, 0.151), (0.884, 0.096), (0.877, 0.094)]),
    (Family::Dt, [(0.956, 0.035), (0.898, 0.155), (0.889, 0.122), (0.876, 0.091), (0.863, 0.098)]),
    (Family::Rf, [(0.944, 0.013), (0.824, 0.048), (0.822, 0.054), (0.822, 0.054), (0.790, 0.049)]),
    (Family::Knn, [(0.899, 0.033), (0.713, 0.084), (0.578, 0.215), (0.623, 0.156), (0.580, 0.161)]),
    (Family::Svm, [(0.937, 0.014), (0.820, 0.092), (0.800, 0.163), (0.792, 0.067), (0.768, 0.069)]),
];

/// Reference values for one cell, or `None` for combinations never
/// published (balanced data with a non-vanilla method).
pub fn reference(dataset: DatasetMode, method: Method, family: Family) -> Option<[MeanStd; 5]> {
    let table = match (dataset, method) {
        (DatasetMode::Balanced, Method::Vanilla) => &BALANCED,
        (DatasetMode::Balanced, _) => return None,
        (DatasetMode::Imbalanced, Method::Vanilla) => &IMBALANCED_VANILLA,
        (DatasetMode::Imbalanced, Method::Smote) => &IMBALANCED_SMOTE,
        (DatasetMode::Imbalanced, Method::Threshold) => &IMBALANCED_THRESHOLD,
        (DatasetMode::Imbalanced, Method::Hybrid) => &IMBALANCED_HYBRID,
    };
    let (_, row) = table.iter().find(|(f, _)| *f == family)?;
    Some(row.map(|(mean, std)| MeanStd { mean, std }))
}
