//! Dense matrices, singular value decompositions and the four matrix norms.
//!
//! [`DenseMatrix`] is a finite-valued wrapper over [`nalgebra::DMatrix`]. It
//! derefs to the inner matrix so the usual nalgebra arithmetic is available;
//! construction is the only place where finiteness is checked. Singular value
//! decompositions are computed by `faer`.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A real `rows × cols` matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn new(inner: DMatrix<f64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix must be non-empty, got {}x{}",
                inner.nrows(),
                inner.ncols()
            )));
        }
        if let Some(pos) = inner.iter().position(|x| !x.is_finite()) {
            // column-major position
            let (i, j) = (pos % inner.nrows(), pos / inner.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite entry {} at ({i}, {j})",
                inner[pos]
            )));
        }
        Ok(Self(inner))
    }

    /// Builds a matrix from `rows * cols` entries in row-major order.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "matrix dimensions must be positive");
        Self(DMatrix::identity(n, n))
    }

    /// Square diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Wraps a matrix produced by arithmetic on finite inputs.
    pub(crate) fn from_trusted(inner: DMatrix<f64>) -> Self {
        debug_assert!(inner.iter().all(|x| x.is_finite()));
        Self(inner)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }
}

impl Deref for DenseMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl From<DenseMatrix> for DMatrix<f64> {
    fn from(m: DenseMatrix) -> Self {
        m.0
    }
}

/// Full decomposition `M = U diag(sigma) Vᵀ` with square orthogonal factors.
#[derive(Debug, Clone)]
pub struct FullSvd {
    /// `m × m`
    pub u: DMatrix<f64>,
    /// Length `min(m, n)`, nonincreasing.
    pub sigma: DVector<f64>,
    /// `n × n`
    pub v: DMatrix<f64>,
}

impl FullSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let (m, n) = (self.u.nrows(), self.v.nrows());
        let k = self.sigma.len();
        let mut s = DMatrix::zeros(m, n);
        for i in 0..k {
            s[(i, i)] = self.sigma[i];
        }
        &self.u * s * self.v.transpose()
    }
}

/// Top-`r` singular triplets of a matrix. Defines `A_r = U diag(sigma) Vᵀ`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `m × r`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// Length `r`, nonincreasing.
    pub sigma: DVector<f64>,
    /// `n × r`, orthonormal columns.
    pub v: DMatrix<f64>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.u.nrows(), self.v.nrows())
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (k, mut col) in us.column_iter_mut().enumerate() {
            col *= self.sigma[k];
        }
        us * self.v.transpose()
    }

    /// `U Vᵀ`, the sign-flip invariant part of the subdifferential at `A_r`.
    pub fn uv_t(&self) -> DMatrix<f64> {
        &self.u * self.v.transpose()
    }
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD sorted by nonincreasing singular value: `(U: m×k, sigma: k, V: n×k)`
/// with `k = min(m, n)`.
pub(crate) fn thin_svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let svd = to_faer(m).thin_svd().map_err(|_| Error::SvdNoConvergence)?;
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
    let k = fs.nrows();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| fs[b].total_cmp(&fs[a]));
    let sigma = DVector::from_iterator(k, order.iter().map(|&o| fs[o]));
    let u = DMatrix::from_fn(m.nrows(), k, |i, c| fu[(i, order[c])]);
    let v = DMatrix::from_fn(m.ncols(), k, |j, c| fv[(j, order[c])]);
    Ok((u, sigma, v))
}

/// Extends an `n × k` matrix with orthonormal columns to an `n × n` orthogonal
/// matrix whose leading `k` columns are the input.
fn complete_basis(q: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = q.shape();
    if k == n {
        return q.clone();
    }
    let mut aug = DMatrix::zeros(n, k + n);
    aug.view_mut((0, 0), (n, k)).copy_from(q);
    aug.view_mut((0, k), (n, n)).fill_with_identity();
    let mut full = aug.qr().q();
    full.view_mut((0, 0), (n, k)).copy_from(q);
    full
}

/// Full singular value decomposition.
pub fn svd(m: &DenseMatrix) -> Result<FullSvd> {
    let (u, sigma, v) = thin_svd(m)?;
    Ok(FullSvd {
        u: complete_basis(&u),
        sigma,
        v: complete_basis(&v),
    })
}

/// Best rank-`r` approximation (Eckart–Young).
pub fn truncate(m: &DenseMatrix, r: usize) -> Result<TruncatedSvd> {
    let k = m.rows().min(m.cols());
    if r == 0 || r > k {
        return Err(Error::InvalidArgument(format!(
            "rank {r} out of range 1..={k}"
        )));
    }
    let (u, sigma, v) = thin_svd(m)?;
    Ok(TruncatedSvd {
        u: u.columns(0, r).into_owned(),
        sigma: sigma.rows(0, r).into_owned(),
        v: v.columns(0, r).into_owned(),
    })
}

/// `‖M − M_r‖_F`: ℓ2 norm of the singular values past index `r`.
pub fn tail_norm(sigma: &DVector<f64>, r: usize) -> f64 {
    sigma.iter().skip(r).map(|s| s * s).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Norms {
    pub nuclear: f64,
    pub frobenius: f64,
    pub spectral: f64,
    pub max_abs: f64,
}

pub fn norms(m: &DenseMatrix) -> Result<Norms> {
    let (_, sigma, _) = thin_svd(m)?;
    Ok(Norms {
        nuclear: sigma.sum(),
        frobenius: m.norm(),
        spectral: sigma[0],
        max_abs: m.amax(),
    })
}

pub(crate) fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let mut sv = to_faer(m)
        .singular_values()
        .map_err(|_| Error::SvdNoConvergence)?;
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(DVector::from_vec(sv))
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?[0])
}

pub(crate) fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.sum())
}

/// Frobenius inner product `⟨A, B⟩ = Σ A_ij B_ij`.
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// Matrix with i.i.d. standard normal entries.
pub fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    // Fill column by column so the draw order is fixed.
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `n × k` matrix with orthonormal columns, Haar-distributed: QR of a
/// Gaussian matrix with the signs of `R`'s diagonal absorbed into `Q`.
pub fn haar<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(k <= n, "cannot draw {k} orthonormal columns in dimension {n}");
    let qr = gaussian(n, k, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}
