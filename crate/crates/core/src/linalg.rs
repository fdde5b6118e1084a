//! Dense row-major matrices and principal component analysis.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix data has {got} entries, expected {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, got: usize },
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("requested {requested} components but at most {ceiling} are admissible")]
    RankTooSmall { requested: usize, ceiling: usize },
    #[error("PCA needs at least 2 rows, got {0}")]
    DegenerateInput(usize),
}

/// Row-major matrix of finite `f64` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::ShapeMismatch { rows, cols, got: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite { row: pos / cols.max(1), col: pos % cols.max(1) });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds a matrix from equal-length rows. An empty slice gives a `0 x 0` matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(LinalgError::DimensionMismatch { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Copies the given rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: indices.len(), cols: self.cols, data }
    }

    /// Appends a row. Panics if the length does not match or a value is not finite.
    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row length mismatch");
        assert!(row.iter().all(|v| v.is_finite()), "non-finite row");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        if self.rows > 0 {
            let n = self.rows as f64;
            means.iter_mut().for_each(|m| *m /= n);
        }
        means
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix { rows: self.cols, cols: self.rows, data }
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let o = &mut out[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (dst, &b) in o.iter_mut().zip(other.row(k)) {
                    *dst += a * b;
                }
            }
        }
        Ok(Matrix { rows: self.rows, cols: other.cols, data: out })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Largest admissible component count for a training matrix of this shape.
pub fn pca_ceiling(rows: usize, cols: usize) -> usize {
    rows.saturating_sub(1).min(cols)
}

/// Fitted principal axes.
///
/// `components` is `k x d`; each row is a unit-length principal axis, ordered
/// by decreasing explained variance. Each axis is oriented so that its entry
/// of largest magnitude is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// Fraction of the retained variance carried by each component.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.explained_variance.iter().sum();
        if total == 0.0 {
            return vec![0.0; self.explained_variance.len()];
        }
        self.explained_variance.iter().map(|v| v / total).collect()
    }

    /// Projects rows onto the principal axes: `(X - mean) * components^T`.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix, LinalgError> {
        pca_transform(self, x)
    }

    /// Maps scores back into feature space: `scores * components + mean`.
    pub fn inverse_transform(&self, scores: &Matrix) -> Result<Matrix, LinalgError> {
        let k = self.n_components();
        if scores.cols() != k {
            return Err(LinalgError::DimensionMismatch { expected: k, got: scores.cols() });
        }
        let mut out = scores.matmul(&self.components)?;
        let d = self.n_features();
        for i in 0..out.rows {
            for (v, m) in out.data[i * d..(i + 1) * d].iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(out)
    }
}

/// Fits `k` principal components to `x`.
///
/// The axes are the leading eigenvectors of whichever Gram matrix of the
/// centered data is smaller (`n x n` or `d x d`); explained variance is
/// `sigma_i^2 / (n - 1)`.
pub fn pca_fit(x: &Matrix, k: usize) -> Result<PcaModel, LinalgError> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(LinalgError::DegenerateInput(n));
    }
    let ceiling = pca_ceiling(n, d);
    if k == 0 || k > ceiling {
        return Err(LinalgError::RankTooSmall { requested: k, ceiling });
    }

    let mean = x.column_means();
    let mut centered = x.data.clone();
    for i in 0..n {
        for (v, m) in centered[i * d..(i + 1) * d].iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let centered = Matrix { rows: n, cols: d, data: centered };

    let (eigvals, mut axes) = if n <= d {
        let gram = gram_rows(&centered);
        let (vals, vecs) = sorted_eigen(gram, n);
        let mut axes = Vec::with_capacity(k);
        for (i, &lambda) in vals.iter().enumerate().take(k) {
            let sigma = lambda.max(0.0).sqrt();
            let mut v = vec![0.0; d];
            for (r, row) in centered.iter_rows().enumerate() {
                let u = vecs[(r, i)];
                if u != 0.0 {
                    for (dst, &c) in v.iter_mut().zip(row) {
                        *dst += u * c;
                    }
                }
            }
            if sigma > 0.0 {
                v.iter_mut().for_each(|e| *e /= sigma);
            }
            axes.push(v);
        }
        (vals, axes)
    } else {
        let gram = gram_cols(&centered);
        let (vals, vecs) = sorted_eigen(gram, d);
        let axes = (0..k).map(|i| (0..d).map(|j| vecs[(j, i)]).collect()).collect();
        (vals, axes)
    };

    orthonormalize(&mut axes);
    for axis in &mut axes {
        orient(axis);
    }

    let denom = (n - 1) as f64;
    let mut explained_variance: Vec<f64> = eigvals.iter().take(k).map(|l| l.max(0.0) / denom).collect();
    for i in 1..explained_variance.len() {
        if explained_variance[i] > explained_variance[i - 1] {
            explained_variance[i] = explained_variance[i - 1];
        }
    }

    let components = Matrix::from_rows(&axes)?;
    Ok(PcaModel { mean, components, explained_variance })
}

pub fn pca_transform(model: &PcaModel, x: &Matrix) -> Result<Matrix, LinalgError> {
    let d = model.n_features();
    if x.cols() != d {
        return Err(LinalgError::DimensionMismatch { expected: d, got: x.cols() });
    }
    let k = model.n_components();
    let mut out = Vec::with_capacity(x.rows() * k);
    let mut centered = vec![0.0; d];
    for row in x.iter_rows() {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&model.mean) {
            *c = v - m;
        }
        for axis in model.components.iter_rows() {
            out.push(dot(&centered, axis));
        }
    }
    Matrix::new(x.rows(), k, out)
}

fn gram_rows(c: &Matrix) -> DMatrix<f64> {
    let n = c.rows();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = dot(c.row(i), c.row(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

fn gram_cols(c: &Matrix) -> DMatrix<f64> {
    let d = c.cols();
    let mut g = DMatrix::zeros(d, d);
    for row in c.iter_rows() {
        for i in 0..d {
            if row[i] == 0.0 {
                continue;
            }
            for j in 0..=i {
                g[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            g[(j, i)] = g[(i, j)];
        }
    }
    g
}

/// Eigen-decomposition sorted by decreasing eigenvalue (ties by original index).
fn sorted_eigen(gram: DMatrix<f64>, size: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(size, size);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Two passes of modified Gram-Schmidt. Axes that collapse (zero singular
/// values) are replaced by the first standard basis vector that survives
/// orthogonalization.
fn orthonormalize(axes: &mut [Vec<f64>]) {
    let d = axes.first().map_or(0, Vec::len);
    let mut next_basis = 0;
    for i in 0..axes.len() {
        loop {
            for _ in 0..2 {
                for j in 0..i {
                    let (done, rest) = axes.split_at_mut(i);
                    let proj = dot(&rest[0], &done[j]);
                    for (a, b) in rest[0].iter_mut().zip(&done[j]) {
                        *a -= proj * b;
                    }
                }
            }
            let norm = dot(&axes[i], &axes[i]).sqrt();
            if norm > 1e-10 {
                axes[i].iter_mut().for_each(|v| *v /= norm);
                break;
            }
            assert!(next_basis < d, "cannot complete an orthonormal basis");
            axes[i] = vec![0.0; d];
            axes[i][next_basis] = 1.0;
            next_basis += 1;
        }
    }
}

fn orient(axis: &mut [f64]) {
    let mut best = 0;
    for (i, v) in axis.iter().enumerate() {
        if v.abs() > axis[best].abs() {
            best = i;
        }
    }
    if axis.get(best).is_some_and(|v| *v < 0.0) {
        axis.iter_mut().for_each(|v| *v = -*v);
    }
}
