//! Tangent space of the rank-`r` manifold at `A_r`, coherence, and sample-size
//! conditions.
//!
//! With `P_U = UUᵀ` and `P_V = VVᵀ`:
//!
//! ```text
//! P_T(Z)  = P_U Z + Z P_V − P_U Z P_V
//! P_T⊥(Z) = (I − P_U) Z (I − P_V)
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::linalg::{gaussian, DenseMatrix, TruncatedSvd};
use crate::rng;
use crate::sampling::{romega_raw, SampleMultiset};

const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TangentSpace {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
}

impl TangentSpace {
    /// `u` is `m × r` and `v` is `n × r`, both with orthonormal columns.
    pub fn new(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        let r = u.ncols();
        if r == 0 || v.ncols() != r {
            return Err(Error::InvalidArgument(format!(
                "factor ranks differ or are zero: {} vs {}",
                u.ncols(),
                v.ncols()
            )));
        }
        if r > u.nrows() || r > v.nrows() {
            return Err(Error::InvalidArgument(format!(
                "rank {r} exceeds dimensions {}x{}",
                u.nrows(),
                v.nrows()
            )));
        }
        for (name, q) in [("U", &u), ("V", &v)] {
            let err = (q.transpose() * q - DMatrix::identity(r, r)).amax();
            if err > ORTHONORMAL_TOL {
                return Err(Error::InvalidInput(format!(
                    "{name} columns not orthonormal (error {err:.3e})"
                )));
            }
        }
        Ok(Self { u, v })
    }

    pub fn from_svd(svd: &TruncatedSvd) -> Result<Self> {
        Self::new(svd.u.clone(), svd.v.clone())
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.u.nrows(), self.v.nrows())
    }

    /// Dimension of T as a subspace of the `m × n` matrices: `r(m + n − r)`.
    pub fn dim(&self) -> usize {
        let (m, n) = self.dims();
        let r = self.rank();
        r * (m + n - r)
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub(crate) fn project_t_raw(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let ut_z = self.u.transpose() * z; // r × n
        let z_v = z * &self.v; // m × r
        let ut_z_v = &ut_z * &self.v; // r × r
        &self.u * ut_z + z_v * self.v.transpose() - &self.u * ut_z_v * self.v.transpose()
    }

    pub(crate) fn project_tperp_raw(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let left = z - &self.u * (self.u.transpose() * z);
        &left - (&left * &self.v) * self.v.transpose()
    }
}

pub fn project_t(ts: &TangentSpace, z: &DenseMatrix) -> Result<DenseMatrix> {
    check_dims(ts.dims(), z.dims())?;
    Ok(DenseMatrix::from_trusted(ts.project_t_raw(z)))
}

pub fn project_tperp(ts: &TangentSpace, z: &DenseMatrix) -> Result<DenseMatrix> {
    check_dims(ts.dims(), z.dims())?;
    Ok(DenseMatrix::from_trusted(ts.project_tperp_raw(z)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceProfile {
    pub mu0: f64,
    pub mu1: f64,
    pub r: usize,
    pub m: usize,
    pub n: usize,
}

pub fn coherence(ts: &TangentSpace) -> CoherenceProfile {
    let (m, n) = ts.dims();
    let r = ts.rank();
    let rf = r as f64;
    // ‖P_U e_i‖² is the squared norm of row i of U.
    let max_row = |q: &DMatrix<f64>| {
        q.row_iter()
            .map(|row| row.norm_squared())
            .fold(0.0_f64, f64::max)
    };
    let mu0 = (m as f64 / rf * max_row(&ts.u)).max(n as f64 / rf * max_row(&ts.v));
    let uv = &ts.u * ts.v.transpose();
    let mu1 = ((m * n) as f64 / rf).sqrt() * uv.amax();
    CoherenceProfile { mu0, mu1, r, m, n }
}

/// Magnitudes of the residual `A − A_r` entering the second sample-size term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailStats {
    pub max_abs_residual: f64,
    pub frobenius_residual: f64,
}

/// Leading constant of the incoherence sample-size term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SampleConstant {
    /// 114: the full-rank recovery guarantee.
    #[default]
    FullRank,
    /// 32: the low-rank completion guarantee alone.
    LowRank,
}

impl SampleConstant {
    pub fn value(self) -> f64 {
        match self {
            SampleConstant::FullRank => 114.0,
            SampleConstant::LowRank => 32.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeBound {
    /// `C max(μ0, μ1²) r (m + n) β log²(2n)`
    pub bound1: f64,
    /// `8 mn ‖A − A_r‖∞² / (3 ‖A − A_r‖_F²) · β log n`, zero for an exactly low-rank matrix.
    pub bound2: f64,
    pub required: f64,
    pub constant: f64,
}

pub fn required_sample_size(
    profile: &CoherenceProfile,
    tail: &TailStats,
    beta: f64,
    constant: SampleConstant,
) -> Result<SampleSizeBound> {
    if !(beta > 1.0) {
        return Err(Error::InvalidArgument(format!("beta must exceed 1, got {beta}")));
    }
    let (m, n, r) = (profile.m as f64, profile.n as f64, profile.r as f64);
    let c = constant.value();
    let log2n = (2.0 * n).ln();
    let bound1 = c * profile.mu0.max(profile.mu1 * profile.mu1) * r * (m + n) * beta * log2n * log2n;
    let bound2 = if tail.frobenius_residual > 0.0 {
        let ratio = tail.max_abs_residual / tail.frobenius_residual;
        8.0 * m * n * ratio * ratio / 3.0 * beta * n.ln()
    } else {
        0.0
    };
    Ok(SampleSizeBound {
        bound1,
        bound2,
        required: bound1.max(bound2),
        constant: c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIterationOptions {
    pub min_iters: usize,
    pub max_iters: usize,
    /// Stop once the relative change of the estimate falls below this.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        Self {
            min_iters: 200,
            max_iters: 3000,
            rel_tol: 1e-10,
            seed: 0,
        }
    }
}

/// `‖(mn/|Ω|) P_T R_Ω P_T − P_T‖` with default power-iteration options.
pub fn estimate_pt_romega_pt_deviation(ts: &TangentSpace, omega: &SampleMultiset) -> Result<f64> {
    estimate_pt_romega_pt_deviation_with(ts, omega, &PowerIterationOptions::default())
}

/// Power iteration on the self-adjoint operator `X ↦ (mn/|Ω|) P_T R_Ω(X) − X`
/// restricted to T (it vanishes on T⊥). Iterates are re-projected onto T.
pub fn estimate_pt_romega_pt_deviation_with(
    ts: &TangentSpace,
    omega: &SampleMultiset,
    opts: &PowerIterationOptions,
) -> Result<f64> {
    check_dims(ts.dims(), omega.dims())?;
    let (m, n) = ts.dims();
    let scale = (m * n) as f64 / omega.len() as f64;
    let apply = |x: &DMatrix<f64>| ts.project_t_raw(&romega_raw(omega, x)) * scale - x;

    let mut g = rng::stream(opts.seed, rng::STREAM_POWER);
    let mut x = ts.project_t_raw(&gaussian(m, n, &mut g));
    x /= x.norm();

    let mut estimate = 0.0;
    for it in 0..opts.max_iters {
        let y = ts.project_t_raw(&apply(&x));
        let norm = y.norm();
        if norm <= f64::MIN_POSITIVE {
            return Ok(0.0);
        }
        let converged = (norm - estimate).abs() <= opts.rel_tol * norm;
        estimate = norm;
        if converged && it + 1 >= opts.min_iters {
            break;
        }
        x = y / norm;
    }
    Ok(estimate)
}
