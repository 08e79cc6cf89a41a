//! Dense linear-algebra primitives shared by the decomposition, inference and
//! simulation modules.
//!
//! Everything here is a pure function of its inputs. Matrices are wrapped in
//! [`RealMatrix`], which guarantees finite entries and non-empty dimensions.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row means larger than this (in absolute value) count as "not centered".
pub const CENTERING_TOLERANCE: f64 = 1e-8;

/// A finite, non-empty dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix(DMatrix<f64>);

impl RealMatrix {
    /// Builds a matrix from entries given in row-major order.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::invalid("rows have unequal lengths"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(rows.len(), ncols, &flat)
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::invalid(format!(
                "matrix must be non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if let Some(pos) = m.iter().position(|x| !x.is_finite()) {
            // nalgebra storage is column-major
            let (i, j) = (pos % m.nrows(), pos / m.nrows());
            return Err(Error::invalid(format!("non-finite entry at ({i}, {j})")));
        }
        Ok(RealMatrix(m))
    }

    /// All-zero matrix. Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        RealMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "matrix dimensions must be positive");
        RealMatrix(DMatrix::identity(n, n))
    }

    /// Wraps a matrix produced by arithmetic on already-validated matrices.
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        debug_assert!(m.nrows() > 0 && m.ncols() > 0);
        RealMatrix(m)
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn row_vec(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    /// Largest absolute row mean.
    pub fn max_abs_row_mean(&self) -> f64 {
        let n = self.0.ncols() as f64;
        self.0
            .row_iter()
            .map(|r| (r.sum() / n).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_row_centered(&self) -> bool {
        self.max_abs_row_mean() <= CENTERING_TOLERANCE
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }
}

impl Deref for RealMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Rank-`r` singular value decomposition `left · diag(singular_values) · rightᵀ`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// d × r, orthonormal columns.
    pub left: DMatrix<f64>,
    /// Non-increasing, non-negative.
    pub singular_values: DVector<f64>,
    /// n × r, orthonormal columns.
    pub right: DMatrix<f64>,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.left.clone();
        for (mut col, s) in scaled.column_iter_mut().zip(self.singular_values.iter()) {
            col *= *s;
        }
        scaled * self.right.transpose()
    }
}

/// Subtracts each row's mean from that row.
pub fn center_rows(m: &RealMatrix) -> RealMatrix {
    let mut out = m.0.clone();
    let n = out.ncols() as f64;
    for mut row in out.row_iter_mut() {
        let mean = row.sum() / n;
        row.add_scalar_mut(-mean);
        // second pass removes the rounding left over by the first
        let residual = row.sum() / n;
        row.add_scalar_mut(-residual);
    }
    RealMatrix(out)
}

/// Best rank-`rank` approximation factors of `m`.
///
/// Singular pairs are sorted by decreasing singular value and each pair is
/// sign-normalized so that the largest-magnitude entry of the left vector is
/// positive.
pub fn truncated_svd(m: &RealMatrix, rank: usize) -> Result<SvdFactors> {
    check_rank(m, rank)?;
    // nalgebra's SVD is unreliable on exactly rank-deficient inputs, which are
    // common here (noise-free signals, stacked bases with repeated rows), so
    // the factorization runs in faer without internal parallelism.
    let src = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m.0[(i, j)]);
    let svd = src
        .thin_svd()
        .map_err(|e| Error::numerical(format!("SVD did not converge: {e:?}")))?;
    let (fu, fv, fs) = (svd.U(), svd.V(), svd.S().column_vector());
    let k = fs.nrows();
    let u = DMatrix::from_fn(m.nrows(), k, |i, j| fu[(i, j)]);
    let v_t = DMatrix::from_fn(k, m.ncols(), |i, j| fv[(j, i)]);
    let singular_values = DVector::from_fn(k, |i, _| fs[i]);
    let order = descending_order(singular_values.as_slice());

    let d = m.nrows();
    let n = m.ncols();
    let mut left = DMatrix::zeros(d, rank);
    let mut right = DMatrix::zeros(n, rank);
    let mut values = DVector::zeros(rank);
    for (k, &src) in order.iter().take(rank).enumerate() {
        let mut lcol = u.column(src).into_owned();
        let mut rcol = v_t.row(src).transpose();
        if pivot_sign(lcol.as_slice()) < 0.0 {
            lcol.neg_mut();
            rcol.neg_mut();
        }
        left.set_column(k, &lcol);
        right.set_column(k, &rcol);
        values[k] = singular_values[src].max(0.0);
    }
    Ok(SvdFactors {
        left,
        singular_values: values,
        right,
    })
}

fn check_rank(m: &RealMatrix, rank: usize) -> Result<()> {
    let max_rank = m.nrows().min(m.ncols());
    if rank == 0 || rank > max_rank {
        return Err(Error::invalid(format!(
            "rank {rank} out of range 1..={max_rank} for a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps the backend's order for exact ties
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

/// Sign of the entry with the largest magnitude (first one wins on ties).
fn pivot_sign(v: &[f64]) -> f64 {
    let mut best = 0.0_f64;
    for &x in v {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Principal components of a row-centered feature × case matrix.
#[derive(Debug, Clone)]
pub struct Pca {
    /// r × n, `loadingsᵀ · m`.
    pub scores: DMatrix<f64>,
    /// d × r, orthonormal columns.
    pub loadings: DMatrix<f64>,
    /// Per-component variance `s² / (n − 1)`, non-increasing.
    pub variances: Vec<f64>,
    /// Total variance `‖m‖²_F / (n − 1)`.
    pub total_variance: f64,
    /// r × n unit-norm score directions (rows of Vᵀ).
    pub normalized_scores: DMatrix<f64>,
}

impl Pca {
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.variances
            .iter()
            .map(|v| if self.total_variance > 0.0 { v / self.total_variance } else { 0.0 })
            .collect()
    }

    /// Loading vector of component `k` as a column of length d.
    pub fn loading(&self, k: usize) -> DVector<f64> {
        self.loadings.column(k).into_owned()
    }
}

pub fn pca(m: &RealMatrix, rank: usize) -> Result<Pca> {
    let worst = m.max_abs_row_mean();
    if worst > CENTERING_TOLERANCE {
        return Err(Error::precondition(format!(
            "PCA input must be row-centered (largest |row mean| = {worst:.3e})"
        )));
    }
    check_rank(m, rank)?;
    let n = m.ncols();
    if n < 2 {
        return Err(Error::invalid("PCA needs at least two cases"));
    }
    let svd = truncated_svd(m, rank)?;
    let denom = (n - 1) as f64;
    let scores = svd.left.transpose() * &m.0;
    let variances = svd.singular_values.iter().map(|s| s * s / denom).collect();
    Ok(Pca {
        scores,
        loadings: svd.left,
        variances,
        total_variance: m.0.norm_squared() / denom,
        normalized_scores: svd.right.transpose(),
    })
}

/// Angle in degrees between the lines spanned by `u` and `v`, in `[0, 90]`.
pub fn vector_angle(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::invalid(format!(
            "vector lengths differ: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("angle with a zero vector is undefined"));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let sign = if dot < 0.0 { -1.0 } else { 1.0 };
    // 2·atan2(|a − b|, |a + b|) stays accurate for nearly parallel vectors
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in u.iter().zip(v) {
        let (a, b) = (x / nu, sign * y / nv);
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    Ok((2.0 * diff.sqrt().atan2(sum.sqrt())).to_degrees())
}

/// Max-abs deviation of `qᵀq` from the identity, for column-orthonormality checks.
pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let gram = q.transpose() * q;
    let eye = DMatrix::<f64>::identity(gram.nrows(), gram.ncols());
    (gram - eye).amax()
}
