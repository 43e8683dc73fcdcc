//! Planted instances, end-to-end recovery trials and sweeps over `|Ω|`.
//!
//! A planted instance is `A = U diag(σ) Vᵀ + N` with Haar factors and a tail
//! `N` lying in T⊥ of the planted factors, so the best rank-`r`
//! approximation of `A` is the planted part whenever `‖N‖_F < σ_r`.
//!
//! Trial `k` of a sweep cell uses instance seed `spec.seed ^ k` and sample
//! seed `seed ^ k`. Records are a pure function of their inputs, whatever
//! the size of the rayon pool they run on.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundInputs, BoundReport, CompetitorExtras, MeasuredErrors};
use crate::error::{Error, Result};
use crate::geometry::{
    coherence, required_sample_size, CoherenceProfile, SampleConstant, SampleSizeBound, TailStats,
    TangentSpace,
};
use crate::linalg::{gaussian, haar, spectral_norm, DenseMatrix, TruncatedSvd};
use crate::rng;
use crate::sampling::{romega_inner_raw, sample_uniform, ObservationSet};
use crate::solver::{
    lambda_floor, optimality_inequality, select_lambda, solve, KktResidual, OptimalityInequality,
    SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    /// `σ_k = top`
    Flat,
    /// `σ_k = top · ratio^k`
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub kind: SpectrumKind,
    pub top: f64,
    #[serde(default = "one")]
    pub ratio: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    None,
    GaussianScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub kind: TailKind,
    #[serde(default)]
    pub epsilon_target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FactorModel {
    /// QR of a Gaussian matrix.
    #[default]
    Haar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub spectrum: Spectrum,
    pub tail: Tail,
    #[serde(default)]
    pub factor_model: FactorModel,
    #[serde(default)]
    pub seed: u64,
}

impl PlantedSpec {
    pub fn sigma(&self) -> Vec<f64> {
        let Spectrum { kind, top, ratio } = self.spectrum;
        (0..self.r)
            .map(|k| match kind {
                SpectrumKind::Flat => top,
                SpectrumKind::Geometric => top * ratio.powi(k as i32),
            })
            .collect()
    }

    fn epsilon_target(&self) -> f64 {
        match self.tail.kind {
            TailKind::None => 0.0,
            TailKind::GaussianScaled => self.tail.epsilon_target,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > self.m.min(self.n) {
            return Err(Error::InvalidArgument(format!(
                "rank {} out of range 1..={}",
                self.r,
                self.m.min(self.n)
            )));
        }
        let Spectrum { kind, top, ratio } = self.spectrum;
        if !(top > 0.0) || !top.is_finite() {
            return Err(Error::InvalidArgument(format!("spectrum top must be positive, got {top}")));
        }
        if kind == SpectrumKind::Geometric && !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "geometric ratio must lie in (0, 1], got {ratio}"
            )));
        }
        let eps = self.tail.epsilon_target;
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!("epsilon_target must be nonnegative, got {eps}")));
        }
        let sigma_r = self.sigma()[self.r - 1];
        if self.epsilon_target() >= sigma_r {
            return Err(Error::InvalidArgument(format!(
                "epsilon_target {} must be below sigma_r = {sigma_r}",
                self.epsilon_target()
            )));
        }
        if self.epsilon_target() > 0.0 && self.r == self.m.min(self.n) {
            return Err(Error::InvalidArgument("a nonzero tail needs r < min(m, n)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub a: DenseMatrix,
    /// The planted factors; equal to the best rank-`r` approximation of `a`.
    pub planted: TruncatedSvd,
    /// `A − A_r`
    pub tail: DMatrix<f64>,
    /// `‖A − A_r‖_F`
    pub epsilon: f64,
    pub coherence: CoherenceProfile,
}

impl PlantedInstance {
    pub fn tangent_space(&self) -> TangentSpace {
        TangentSpace::from_svd(&self.planted).expect("planted factors are orthonormal")
    }
}

pub fn generate_planted(spec: &PlantedSpec) -> Result<PlantedInstance> {
    spec.validate()?;
    let PlantedSpec { m, n, r, .. } = *spec;
    let mut g = rng::stream(spec.seed, rng::STREAM_PLANTED);
    let planted = TruncatedSvd {
        u: haar(m, r, &mut g),
        sigma: DVector::from_vec(spec.sigma()),
        v: haar(n, r, &mut g),
    };
    let ts = TangentSpace::from_svd(&planted)?;
    let target = spec.epsilon_target();
    let tail = if target > 0.0 {
        let mut noise = ts.project_tperp_raw(&gaussian(m, n, &mut g));
        let norm = noise.norm();
        if norm <= f64::MIN_POSITIVE {
            return Err(Error::InvalidInput("projected tail vanished".into()));
        }
        noise *= target / norm;
        noise
    } else {
        DMatrix::zeros(m, n)
    };
    let a = DenseMatrix::new(planted.reconstruct() + &tail)?;
    Ok(PlantedInstance {
        a,
        epsilon: tail.norm(),
        tail,
        coherence: coherence(&ts),
        planted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// The selection rule with the true ε; the floor `1e-6 · rms` when ε = 0.
    Corollary1,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub spec: PlantedSpec,
    pub omega_size: usize,
    pub seed: u64,
    pub beta: f64,
    pub lambda_mode: LambdaMode,
    pub lambda_used: f64,
    pub epsilon: f64,
    pub coherence: CoherenceProfile,
    pub measured: MeasuredErrors,
    /// `‖A − B*‖_F`
    pub error_vs_a: f64,
    pub bound_report: BoundReport,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub kkt: KktResidual,
    pub optimality: OptimalityInequality,
    pub sample_size: SampleSizeBound,
    pub sample_size_low_rank: SampleSizeBound,
    /// Wall-clock time; excluded from serialized output so that records are reproducible.
    #[serde(skip)]
    pub runtime_ms: f64,
}

impl ExperimentRecord {
    /// `‖A_r − B*‖_F / ε`, undefined when ε = 0.
    pub fn ratio(&self) -> Option<f64> {
        (self.epsilon > 0.0).then(|| self.measured.total / self.epsilon)
    }

    pub fn perp_within_bound(&self) -> bool {
        self.measured.perp <= self.bound_report.cor1_perp
    }

    pub fn tangent_within_bound(&self) -> bool {
        self.measured.tangent <= self.bound_report.cor1_tangent
    }
}

pub fn run_trial(
    spec: &PlantedSpec,
    omega_size: usize,
    lambda_mode: LambdaMode,
    beta: f64,
    seed: u64,
) -> Result<ExperimentRecord> {
    let start = std::time::Instant::now();
    if omega_size == 0 {
        return Err(Error::InvalidArgument("omega_size must be at least 1".into()));
    }
    if !(beta > 1.0) {
        return Err(Error::InvalidArgument(format!("beta must exceed 1, got {beta}")));
    }
    let inst = generate_planted(spec)?;
    let PlantedSpec { m, n, r, .. } = *spec;
    let omega = sample_uniform(m, n, omega_size, seed)?;
    let obs = ObservationSet::from_matrix(omega, &inst.a)?;

    let lambda = match lambda_mode {
        LambdaMode::Corollary1 => {
            let l = select_lambda(m, n, r, omega_size, inst.epsilon)?;
            if l > 0.0 {
                l
            } else {
                lambda_floor(&obs)
            }
        }
        LambdaMode::Fixed(l) => l,
    };
    let config = SolverConfig { seed, ..SolverConfig::new(lambda) };
    let result = solve(&obs, &config)?;
    let b = &result.b_star;

    let ts = inst.tangent_space();
    let diff = inst.planted.reconstruct() - b.as_matrix();
    let measured = MeasuredErrors {
        perp: ts.project_tperp_raw(b).norm(),
        tangent: ts.project_t_raw(&diff).norm(),
        total: diff.norm(),
    };

    let inputs = BoundInputs {
        m,
        n,
        r,
        omega_size,
        beta,
        epsilon: inst.epsilon,
        lambda,
        perp_norm: measured.perp,
    };
    let extras = CompetitorExtras {
        sampled_residual: romega_inner_raw(obs.sample(), &inst.tail, &inst.tail).sqrt(),
        spectral_noise: if inst.epsilon > 0.0 { spectral_norm(&inst.tail)? } else { 0.0 },
        max_abs_ar: inst.planted.reconstruct().amax(),
    };
    let tail_stats = TailStats {
        max_abs_residual: inst.tail.amax(),
        frobenius_residual: inst.epsilon,
    };

    Ok(ExperimentRecord {
        spec: *spec,
        omega_size,
        seed,
        beta,
        lambda_mode,
        lambda_used: lambda,
        epsilon: inst.epsilon,
        coherence: inst.coherence,
        error_vs_a: (inst.a.as_matrix() - b.as_matrix()).norm(),
        bound_report: BoundReport::evaluate(&inputs, &extras, Some(&measured))?,
        measured,
        iterations: result.iterations,
        converged: result.converged,
        objective: result.objective(),
        kkt: result.kkt,
        optimality: optimality_inequality(&obs, b, &inst.planted, lambda)?,
        sample_size: required_sample_size(&inst.coherence, &tail_stats, beta, SampleConstant::FullRank)?,
        sample_size_low_rank: required_sample_size(
            &inst.coherence,
            &tail_stats,
            beta,
            SampleConstant::LowRank,
        )?,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs `trials_per_cell` trials for every `|Ω|` in the grid, in grid order.
pub fn sweep(
    spec: &PlantedSpec,
    omega_grid: &[usize],
    lambda_mode: LambdaMode,
    beta: f64,
    trials_per_cell: usize,
    seed: u64,
) -> Result<Vec<ExperimentRecord>> {
    if omega_grid.is_empty() || trials_per_cell == 0 {
        return Err(Error::InvalidArgument("grid and trial count must be nonempty".into()));
    }
    spec.validate()?;
    let jobs: Vec<(usize, u64)> = omega_grid
        .iter()
        .flat_map(|&k| (0..trials_per_cell as u64).map(move |t| (k, t)))
        .collect();
    jobs.par_iter()
        .map(|&(omega_size, t)| {
            let trial_spec = PlantedSpec {
                seed: rng::trial_seed(spec.seed, t),
                ..*spec
            };
            run_trial(&trial_spec, omega_size, lambda_mode, beta, rng::trial_seed(seed, t))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub omega_size: usize,
    pub trials: usize,
    pub converged: usize,
    /// Median of `‖A_r − B*‖_F / ε` over the cell; absent when ε = 0.
    pub median_ratio: Option<f64>,
    pub median_total_error: f64,
    /// Reference scale `sqrt(mnr/|Ω|)` of the relative bound.
    pub rate: f64,
    pub perp_bound_violations: usize,
    pub tangent_bound_violations: usize,
    pub optimality_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: Vec<CellSummary>,
    /// Number of adjacent cells in which the median ratio increases with `|Ω|`.
    pub inversions: usize,
    /// Least-squares slope of `log median_ratio` against `log |Ω|`.
    pub slope: Option<f64>,
}

/// Slack for the first-order optimality inequality at a converged solution.
pub const OPTIMALITY_SLACK: f64 = 1e-6;

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

/// Groups records by `|Ω|` (in order of first appearance) and summarizes each cell.
pub fn summarize(records: &[ExperimentRecord]) -> SweepSummary {
    let mut grid: Vec<usize> = Vec::new();
    for rec in records {
        if !grid.contains(&rec.omega_size) {
            grid.push(rec.omega_size);
        }
    }
    let cells: Vec<CellSummary> = grid
        .iter()
        .map(|&k| {
            let cell: Vec<&ExperimentRecord> = records.iter().filter(|r| r.omega_size == k).collect();
            let spec = cell[0].spec;
            let converged: Vec<&&ExperimentRecord> = cell.iter().filter(|r| r.converged).collect();
            let ratios: Option<Vec<f64>> = cell.iter().map(|r| r.ratio()).collect();
            CellSummary {
                omega_size: k,
                trials: cell.len(),
                converged: converged.len(),
                median_ratio: ratios.map(median),
                median_total_error: median(cell.iter().map(|r| r.measured.total).collect()),
                rate: ((spec.m * spec.n * spec.r) as f64 / k as f64).sqrt(),
                perp_bound_violations: converged.iter().filter(|r| !r.perp_within_bound()).count(),
                tangent_bound_violations: converged.iter().filter(|r| !r.tangent_within_bound()).count(),
                optimality_failures: converged
                    .iter()
                    .filter(|r| !r.optimality.holds(OPTIMALITY_SLACK))
                    .count(),
            }
        })
        .collect();

    let mut sorted: Vec<(f64, f64)> = cells
        .iter()
        .filter_map(|c| c.median_ratio.map(|q| (c.omega_size as f64, q)))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let inversions = sorted.windows(2).filter(|w| w[1].1 > w[0].1).count();
    let slope = (sorted.len() >= 2 && sorted.iter().all(|p| p.1 > 0.0)).then(|| {
        let pts: Vec<(f64, f64)> = sorted.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    });
    SweepSummary { cells, inversions, slope }
}

#[derive(Debug, Serialize)]
struct CsvRow {
    m: usize,
    n: usize,
    r: usize,
    instance_seed: u64,
    seed: u64,
    omega_size: usize,
    beta: f64,
    epsilon: f64,
    lambda: f64,
    mu0: f64,
    mu1: f64,
    measured_perp: f64,
    measured_tangent: f64,
    measured_total: f64,
    error_vs_a: f64,
    ratio: Option<f64>,
    cor1_perp: f64,
    cor1_tangent: f64,
    cor1_total: f64,
    thm1_perp: f64,
    thm1_tangent: f64,
    gamma: f64,
    candes_plan: f64,
    keshavan_additive: f64,
    foygel_additive: f64,
    koltchinskii: f64,
    iterations: usize,
    converged: bool,
    objective: f64,
    tangent_gap: f64,
    spectral_slack: f64,
    optimality_lhs: f64,
    optimality_rhs: f64,
    required_sample_size: f64,
}

impl From<&ExperimentRecord> for CsvRow {
    fn from(r: &ExperimentRecord) -> Self {
        let b = &r.bound_report;
        Self {
            m: r.spec.m,
            n: r.spec.n,
            r: r.spec.r,
            instance_seed: r.spec.seed,
            seed: r.seed,
            omega_size: r.omega_size,
            beta: r.beta,
            epsilon: r.epsilon,
            lambda: r.lambda_used,
            mu0: r.coherence.mu0,
            mu1: r.coherence.mu1,
            measured_perp: r.measured.perp,
            measured_tangent: r.measured.tangent,
            measured_total: r.measured.total,
            error_vs_a: r.error_vs_a,
            ratio: r.ratio(),
            cor1_perp: b.cor1_perp,
            cor1_tangent: b.cor1_tangent,
            cor1_total: b.cor1_total,
            thm1_perp: b.thm1_perp,
            thm1_tangent: b.thm1_tangent,
            gamma: b.gamma,
            candes_plan: b.candes_plan,
            keshavan_additive: b.keshavan_additive,
            foygel_additive: b.foygel_additive,
            koltchinskii: b.koltchinskii,
            iterations: r.iterations,
            converged: r.converged,
            objective: r.objective,
            tangent_gap: r.kkt.tangent_gap,
            spectral_slack: r.kkt.spectral_slack,
            optimality_lhs: r.optimality.lhs,
            optimality_rhs: r.optimality.rhs,
            required_sample_size: r.sample_size.required,
        }
    }
}

/// One flat row per record, with a header.
pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], w: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for rec in records {
        writer.serialize(CsvRow::from(rec))?;
    }
    writer.flush()?;
    Ok(())
}

/// Full records plus the per-cell summary.
#[derive(Debug, Serialize)]
pub struct SweepSidecar<'a> {
    pub records: &'a [ExperimentRecord],
    pub summary: SweepSummary,
}
