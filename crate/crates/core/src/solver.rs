//! Nuclear-norm regularized least squares
//!
//! ```text
//! min_B  ½ Σ_{(i,j)∈Ω} (B_ij − A_ij)² + λ ‖B‖_*
//! ```
//!
//! solved by proximal gradient with singular value thresholding. The smooth
//! part has a diagonal Hessian with entries `t_ij`, so `1 / max t_ij` is the
//! exact inverse Lipschitz constant and no line search is needed.
//!
//! The accelerated path uses Nesterov momentum with gradient-mapping restarts
//! and, by default, a continuation schedule on λ: small targets (λ → 0 for
//! exactly low-rank data) are reached through a geometric sequence of warm
//! started problems. The plain path (`acceleration = false`) is ISTA and is
//! monotone.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::geometry::TangentSpace;
use crate::linalg::{nuclear_norm, spectral_norm, thin_svd, DenseMatrix, TruncatedSvd};
use crate::sampling::{max_multiplicity, ObservationSet};

/// Singular values at or below `RANK_CUT · σ₁` are treated as zero when
/// identifying the tangent space of an iterate.
pub const RANK_CUT: f64 = 1e-8;

/// λ used in place of zero for exactly low-rank data, relative to the rms of
/// the observed values.
pub const LAMBDA_FLOOR_FACTOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    /// `1 / max_multiplicity(Ω)`
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    pub max_iters: usize,
    pub rel_obj_tol: f64,
    /// Bound on the optimality residual implied by the prox-gradient step,
    /// `(1/η + L) ‖x⁺ − y‖_F / λ`, required alongside `rel_obj_tol`. Raised
    /// to the level rounding permits when λ is tiny relative to `‖B‖_F`.
    pub kkt_tol: f64,
    pub step_size: StepSize,
    pub acceleration: bool,
    /// Warm-started λ continuation; only used with `acceleration`.
    pub continuation: bool,
    /// Reserved for randomized restarts; the default path is deterministic.
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            max_iters: 20_000,
            rel_obj_tol: 1e-10,
            kkt_tol: 1e-8,
            step_size: StepSize::Auto,
            acceleration: true,
            continuation: true,
            seed: 0,
        }
    }

    /// Plain proximal gradient (ISTA) without continuation.
    pub fn plain(lambda: f64) -> Self {
        Self {
            acceleration: false,
            continuation: false,
            ..Self::new(lambda)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    pub tangent_gap: f64,
    pub spectral_slack: f64,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub b_star: DenseMatrix,
    /// Objective at the target λ, starting with the value at `B₀ = 0`.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub kkt: KktResidual,
    pub converged: bool,
    pub lambda: f64,
}

impl SolverResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }
}

/// `½ Σ_Ω (B_ij − A_ij)²` with duplicates counted.
fn smooth_part(obs: &ObservationSet, b: &DMatrix<f64>) -> f64 {
    0.5 * obs
        .cells()
        .map(|(i, j, t, a)| {
            let d = b[(i, j)] - a;
            t * d * d
        })
        .sum::<f64>()
}

fn gradient_raw(obs: &ObservationSet, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = obs.dims();
    let mut g = DMatrix::zeros(m, n);
    for (i, j, t, a) in obs.cells() {
        g[(i, j)] = t * (b[(i, j)] - a);
    }
    g
}

pub fn objective(obs: &ObservationSet, b: &DenseMatrix, lambda: f64) -> Result<f64> {
    check_dims(obs.dims(), b.dims())?;
    Ok(smooth_part(obs, b) + lambda * nuclear_norm(b)?)
}

/// `R_Ω(B − A)`, the gradient of the smooth part.
pub fn gradient(obs: &ObservationSet, b: &DenseMatrix) -> Result<DenseMatrix> {
    check_dims(obs.dims(), b.dims())?;
    Ok(DenseMatrix::from_trusted(gradient_raw(obs, b)))
}

/// Singular value soft-thresholding. Returns the result and its nuclear norm.
fn svt_raw(z: &DMatrix<f64>, tau: f64) -> Result<(DMatrix<f64>, f64)> {
    let (u, sigma, v) = thin_svd(z)?;
    let kept = sigma.iter().take_while(|&&s| s > tau).count();
    if kept == 0 {
        return Ok((DMatrix::zeros(z.nrows(), z.ncols()), 0.0));
    }
    let shrunk = DVector::from_iterator(kept, sigma.iter().take(kept).map(|s| s - tau));
    let mut us = u.columns(0, kept).into_owned();
    for (k, mut col) in us.column_iter_mut().enumerate() {
        col *= shrunk[k];
    }
    Ok((us * v.columns(0, kept).transpose(), shrunk.sum()))
}

/// Proximal map of `τ‖·‖_*`: `U max(Σ − τ, 0) Vᵀ`.
pub fn svt_prox(z: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "threshold must be finite and nonnegative, got {tau}"
        )));
    }
    Ok(DenseMatrix::from_trusted(svt_raw(z, tau)?.0))
}

/// Distance of `G` from the nuclear-norm subdifferential at `X`,
/// `∂‖X‖_* = {U Vᵀ + W : UᵀW = 0, WV = 0, ‖W‖ ≤ 1}`, where `U, V` span the
/// singular triplets of `X` above the [`RANK_CUT`].
pub fn subgradient_residual(x: &DenseMatrix, g: &DenseMatrix) -> Result<KktResidual> {
    check_dims(x.dims(), g.dims())?;
    let (u, sigma, v) = thin_svd(x)?;
    let cut = RANK_CUT * sigma[0];
    let k = sigma.iter().take_while(|&&s| s > cut && s > 0.0).count();
    if k == 0 {
        return Ok(KktResidual {
            tangent_gap: 0.0,
            spectral_slack: (spectral_norm(g)? - 1.0).max(0.0),
        });
    }
    let ts = TangentSpace::new(u.columns(0, k).into_owned(), v.columns(0, k).into_owned())?;
    let uv = ts.u() * ts.v().transpose();
    let tangent_gap = (ts.project_t_raw(g) - uv).norm();
    let spectral_slack = (spectral_norm(&ts.project_tperp_raw(g))? - 1.0).max(0.0);
    Ok(KktResidual {
        tangent_gap,
        spectral_slack,
    })
}

/// Optimality residual: whether `−R_Ω(B − A)/λ ∈ ∂‖B‖_*`.
pub fn kkt_residual(obs: &ObservationSet, b: &DenseMatrix, lambda: f64) -> Result<KktResidual> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    check_dims(obs.dims(), b.dims())?;
    let g = gradient_raw(obs, b) * (-1.0 / lambda);
    subgradient_residual(b, &DenseMatrix::from_trusted(g))
}

/// Both sides of the first-order optimality inequality
/// `λ⟨B − A_r, UVᵀ⟩ + λ‖P_T⊥(B)‖_* ≤ ⟨R_Ω(B − A), A_r − B⟩`,
/// which holds at the exact minimizer for any rank-`r` reference `A_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalityInequality {
    pub lhs: f64,
    pub rhs: f64,
}

impl OptimalityInequality {
    /// Holds up to `rel_slack · (1 + |rhs|)`.
    pub fn holds(&self, rel_slack: f64) -> bool {
        self.lhs <= self.rhs + rel_slack * (1.0 + self.rhs.abs())
    }
}

pub fn optimality_inequality(
    obs: &ObservationSet,
    b: &DenseMatrix,
    reference: &TruncatedSvd,
    lambda: f64,
) -> Result<OptimalityInequality> {
    check_dims(obs.dims(), b.dims())?;
    check_dims(obs.dims(), reference.dims())?;
    let ts = TangentSpace::from_svd(reference)?;
    let ar = reference.reconstruct();
    let diff = b.as_matrix() - &ar;
    let lhs = lambda * diff.dot(&reference.uv_t())
        + lambda * nuclear_norm(&ts.project_tperp_raw(b))?;
    let rhs = -gradient_raw(obs, b).dot(&diff);
    Ok(OptimalityInequality { lhs, rhs })
}

/// λ minimizing the perpendicular recovery bound:
/// `(2|Ω|ε / mn) · sqrt(2 / (3 r log 2n))`.
pub fn select_lambda(m: usize, n: usize, r: usize, omega_size: usize, epsilon: f64) -> Result<f64> {
    if m == 0 || n == 0 || r == 0 || omega_size == 0 {
        return Err(Error::InvalidArgument(format!(
            "m, n, r and |Ω| must be positive (got {m}, {n}, {r}, {omega_size})"
        )));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let (m, n, r, k) = (m as f64, n as f64, r as f64, omega_size as f64);
    Ok(2.0 * k * epsilon / (m * n) * (2.0 / (3.0 * r * (2.0 * n).ln())).sqrt())
}

/// The λ substituted for zero on exactly low-rank data.
pub fn lambda_floor(obs: &ObservationSet) -> f64 {
    LAMBDA_FLOOR_FACTOR * obs.rms()
}

// continuation schedule
const CONTINUATION_DECAY: f64 = 0.25;
const STAGE_KKT_TOL: f64 = 1e-3;
const STAGE_MAX_ITERS: usize = 1000;
const ROUNDING: f64 = 16.0 * f64::EPSILON;

pub fn solve(obs: &ObservationSet, config: &SolverConfig) -> Result<SolverResult> {
    let lambda = config.lambda;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    if !(config.rel_obj_tol > 0.0) || !(config.kkt_tol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    let lipschitz = f64::from(max_multiplicity(obs.sample()));
    let step = match config.step_size {
        StepSize::Auto => 1.0 / lipschitz,
        StepSize::Fixed(s) if s > 0.0 && s.is_finite() => s,
        StepSize::Fixed(s) => {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {s}")))
        }
    };
    let (m, n) = obs.dims();
    let zero = DMatrix::zeros(m, n);

    let mut stage_lambda = if config.acceleration && config.continuation {
        let start = spectral_norm(&gradient_raw(obs, &zero))? * CONTINUATION_DECAY;
        start.max(lambda)
    } else {
        lambda
    };

    // gradient-mapping norm attainable when iterates are exact up to rounding
    let rounding_floor = (1.0 / step + lipschitz) * ROUNDING;

    let mut x = zero.clone();
    let mut x_nuc = 0.0;
    let mut y = zero;
    let mut t = 1.0_f64;
    let mut stage_obj = smooth_part(obs, &x) + stage_lambda * x_nuc;
    let mut stage_iters = 0;
    let mut trace = vec![stage_obj];
    let mut converged = false;

    for _ in 0..config.max_iters {
        let grad = gradient_raw(obs, &y);
        let (x_new, nuc_new) = svt_raw(&(&y - grad * step), step * stage_lambda)?;
        let kkt_estimate = (1.0 / step + lipschitz) * (&x_new - &y).norm() / stage_lambda;
        let smooth_new = smooth_part(obs, &x_new);
        let obj_new = smooth_new + stage_lambda * nuc_new;
        trace.push(smooth_new + lambda * nuc_new);
        stage_iters += 1;

        if config.acceleration {
            if (&y - &x_new).dot(&(&x_new - &x)) > 0.0 {
                // gradient-mapping restart
                t = 1.0;
                y = x_new.clone();
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                y = &x_new + (&x_new - &x) * ((t - 1.0) / t_next);
                t = t_next;
            }
        } else {
            y = x_new.clone();
        }

        let rel_change = (obj_new - stage_obj).abs() / stage_obj.abs().max(f64::MIN_POSITIVE);
        x = x_new;
        x_nuc = nuc_new;
        stage_obj = obj_new;

        if stage_lambda > lambda {
            if kkt_estimate <= STAGE_KKT_TOL || stage_iters >= STAGE_MAX_ITERS {
                stage_lambda = (stage_lambda * CONTINUATION_DECAY).max(lambda);
                stage_obj = smooth_new + stage_lambda * x_nuc;
                stage_iters = 0;
                t = 1.0;
                y = x.clone();
            }
        } else if rel_change < config.rel_obj_tol
            && kkt_estimate <= config.kkt_tol.max(rounding_floor * x.norm() / stage_lambda)
        {
            converged = true;
            break;
        }
    }

    let b_star = DenseMatrix::from_trusted(x);
    let kkt = kkt_residual(obs, &b_star, lambda)?;
    Ok(SolverResult {
        b_star,
        iterations: trace.len() - 1,
        objective_trace: trace,
        kkt,
        converged,
        lambda,
    })
}
