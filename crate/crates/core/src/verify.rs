//! Seeded verification suites for the supporting lemmas, the sampling
//! operator bounds, the proximal map and solver optimality.
//!
//! Trial `k` of every suite draws from seed `seed ^ k`; trials run in
//! parallel and are aggregated in index order.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::lemma2_check;
use crate::error::{Error, Result};
use crate::experiments::{
    generate_planted, run_trial, FactorModel, LambdaMode, PlantedSpec, Spectrum, SpectrumKind, Tail,
    TailKind, OPTIMALITY_SLACK,
};
use crate::geometry::{estimate_pt_romega_pt_deviation_with, PowerIterationOptions, TangentSpace};
use crate::linalg::{gaussian, haar, nuclear_norm, DenseMatrix};
use crate::rng;
use crate::sampling::{max_multiplicity, romega_inner_raw, romega_raw, sample_uniform, SampleMultiset};
use crate::solver::{subgradient_residual, svt_prox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Lemma1,
    Lemma2,
    Thm2,
    Prox,
    Kkt,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Lemma1, Suite::Lemma2, Suite::Thm2, Suite::Prox, Suite::Kkt];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma1 => "lemma1",
            Suite::Lemma2 => "lemma2",
            Suite::Thm2 => "thm2",
            Suite::Prox => "prox",
            Suite::Kkt => "kkt",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::Lemma1 | Suite::Lemma2 => 1000,
            Suite::Thm2 => 100,
            Suite::Prox => 200,
            Suite::Kkt => 20,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub evaluated: usize,
    pub failures: usize,
    pub failure_rate: f64,
    /// The check passes when `failure_rate ≤ allowed_rate`.
    pub allowed_rate: f64,
    /// Largest value of the checked statistic (see each suite).
    pub worst: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, outcomes: impl IntoIterator<Item = (bool, f64)>, allowed_rate: f64) -> Self {
        let (mut evaluated, mut failures, mut worst) = (0, 0, f64::NEG_INFINITY);
        for (ok, stat) in outcomes {
            evaluated += 1;
            failures += usize::from(!ok);
            worst = worst.max(stat);
        }
        Self::from_counts(name, evaluated, failures, worst, allowed_rate)
    }

    fn from_counts(name: &str, evaluated: usize, failures: usize, worst: f64, allowed_rate: f64) -> Self {
        let failure_rate = if evaluated == 0 { 0.0 } else { failures as f64 / evaluated as f64 };
        Self {
            name: name.to_owned(),
            evaluated,
            failures,
            failure_rate,
            allowed_rate,
            worst,
            passed: evaluated > 0 && failure_rate <= allowed_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub trials: usize,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<SuiteReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let checks = match suite {
        Suite::Lemma1 => lemma1(trials, seed),
        Suite::Lemma2 => lemma2(trials, seed)?,
        Suite::Thm2 => thm2(trials, seed)?,
        Suite::Prox => prox(trials, seed)?,
        Suite::Kkt => kkt(trials, seed)?,
    };
    Ok(SuiteReport {
        suite,
        trials,
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn trial_rng(seed: u64, t: u64) -> rand_chacha::ChaCha8Rng {
    rng::stream(rng::trial_seed(seed, t), rng::STREAM_VERIFY)
}

const LEMMA1_TOL: f64 = 1e-10;
const ADJOINT_TOL: f64 = 1e-12;

/// `⟨R_Ω(Z), Z⟩ ≤ ‖R_Ω(Z)‖_F²` and the Cauchy–Schwarz form
/// `|⟨R_Ω(Z), W⟩| ≤ sqrt(⟨R_Ω(Z), Z⟩ ⟨R_Ω(W), W⟩)` on random shapes with
/// every Ω containing at least one repeated index. Statistics are the
/// relative excess of the left side.
fn lemma1(trials: usize, seed: u64) -> Vec<Check> {
    let rows: Vec<[(bool, f64); 3]> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut g = trial_rng(seed, t);
            let m = g.random_range(1..=8);
            let n = g.random_range(1..=8);
            let count = g.random_range(1..=2 * m * n);
            let mut pairs: Vec<(usize, usize)> =
                (0..count).map(|_| (g.random_range(0..m), g.random_range(0..n))).collect();
            for _ in 0..g.random_range(1..=count) {
                let k = g.random_range(0..pairs.len());
                pairs.push(pairs[k]);
            }
            let omega = SampleMultiset::new(m, n, pairs, t).expect("indices in range");
            let scale = 10f64.powf(g.random_range(-3.0..3.0));
            let z = gaussian(m, n, &mut g) * scale;
            let w = gaussian(m, n, &mut g);

            let rz = romega_raw(&omega, &z);
            let zz = rz.dot(&z);
            let rz_sq = rz.norm_squared();
            let e12 = (zz - rz_sq) / (1.0 + rz_sq);

            let zw = rz.dot(&w);
            let ww = romega_inner_raw(&omega, &w, &w);
            let cs = (zz.max(0.0) * ww.max(0.0)).sqrt();
            let e13 = (zw.abs() - cs) / (1.0 + cs);

            let adj = (zw - z.dot(&romega_raw(&omega, &w))).abs() / (1.0 + zw.abs());
            [(e12 <= LEMMA1_TOL, e12), (e13 <= LEMMA1_TOL, e13), (adj <= ADJOINT_TOL, adj)]
        })
        .collect();
    vec![
        Check::new("quadratic_form", rows.iter().map(|r| r[0]), 0.0),
        Check::new("cauchy_schwarz", rows.iter().map(|r| r[1]), 0.0),
        Check::new("self_adjoint", rows.iter().map(|r| r[2]), 0.0),
    ]
}

/// Planted 50 × 50 rank-2 instance with a Gaussian tail of norm 0.1, sampled
/// at `|Ω| = 1250`, `β = 2`. The sample-size condition of the lemma holds
/// for this tail; the statistic is the largest observed ratio of the
/// sampled residual to `ε sqrt(2|Ω|/mn)`.
fn lemma2(trials: usize, seed: u64) -> Result<Vec<Check>> {
    let (m, r, omega_size, beta) = (50, 2, 1250, 2.0);
    let inst = generate_planted(&PlantedSpec {
        m,
        n: m,
        r,
        spectrum: Spectrum { kind: SpectrumKind::Flat, top: 1.0, ratio: 1.0 },
        tail: Tail { kind: TailKind::GaussianScaled, epsilon_target: 0.1 },
        factor_model: FactorModel::Haar,
        seed,
    })?;
    let out = lemma2_check(&inst.a, r, omega_size, beta, trials, seed)?;
    let eq16 = Check::from_counts("sampled_residual", out.trials, out.violations, out.max_ratio, out.threshold);
    let condition = Check::new(
        "sample_size_condition",
        [(out.condition_holds, out.required_omega / omega_size as f64)],
        0.0,
    );
    Ok(vec![eq16, condition])
}

const DEVIATION_LIMIT: f64 = 0.5;

/// Haar rank-2 tangent spaces at m = n = 40 with `|Ω| = 800`:
/// `‖(mn/|Ω|) P_T R_Ω P_T − P_T‖ ≤ 1/2` in at least 95% of trials, and
/// `‖R_Ω‖ ≤ (8/3) sqrt(β) log n` (β = 2) in at least `1 − n^{1−β}` of them.
fn thm2(trials: usize, seed: u64) -> Result<Vec<Check>> {
    let (m, n, r, omega_size, beta) = (40, 40, 2, 800, 2.0_f64);
    let rows: Vec<((bool, f64), (bool, f64))> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<_> {
            let s = rng::trial_seed(seed, t);
            let mut g = trial_rng(seed, t);
            let ts = TangentSpace::new(haar(m, r, &mut g), haar(n, r, &mut g))?;
            let omega = sample_uniform(m, n, omega_size, s)?;
            let opts = PowerIterationOptions { seed: s, ..Default::default() };
            let dev = estimate_pt_romega_pt_deviation_with(&ts, &omega, &opts)?;
            let mult = f64::from(max_multiplicity(&omega));
            let limit = 8.0 / 3.0 * beta.sqrt() * (n as f64).ln();
            Ok(((dev <= DEVIATION_LIMIT, dev), (mult <= limit, mult / limit)))
        })
        .collect::<Result<_>>()?;
    Ok(vec![
        Check::new("tangent_deviation", rows.iter().map(|r| r.0), 0.05),
        Check::new("operator_norm", rows.iter().map(|r| r.1), (n as f64).powf(1.0 - beta)),
    ])
}

const PROX_TOL: f64 = 1e-8;
const PERTURBATIONS: usize = 50;

fn prox_objective(x: &DMatrix<f64>, z: &DMatrix<f64>, tau: f64) -> Result<f64> {
    Ok(0.5 * (x - z).norm_squared() + tau * nuclear_norm(x)?)
}

/// Random 5 × 7 matrices and thresholds: `(Z − X)/τ` must lie in the
/// subdifferential of the nuclear norm at `X = prox(Z)`, and `X` must beat
/// 50 random perturbations in the prox objective.
fn prox(trials: usize, seed: u64) -> Result<Vec<Check>> {
    let rows: Vec<((bool, f64), (bool, f64))> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<_> {
            let mut g = trial_rng(seed, t);
            let z = gaussian(5, 7, &mut g) * g.random_range(0.5..2.0);
            let tau = g.random_range(0.05..2.0);
            let x = svt_prox(&DenseMatrix::from_trusted(z.clone()), tau)?;
            let sub = DenseMatrix::from_trusted((&z - x.as_matrix()) / tau);
            let kkt = subgradient_residual(&x, &sub)?;
            let worst_kkt = kkt.tangent_gap.max(kkt.spectral_slack);

            let best = prox_objective(&x, &z, tau)?;
            let mut worst_gain = f64::NEG_INFINITY;
            for _ in 0..PERTURBATIONS {
                let delta = 10f64.powf(g.random_range(-4.0..0.0));
                let cand = x.as_matrix() + gaussian(5, 7, &mut g) * delta;
                // positive when the perturbation beats the prox output
                let gain = (best - prox_objective(&cand, &z, tau)?) / (1.0 + best.abs());
                worst_gain = worst_gain.max(gain);
            }
            Ok(((worst_kkt <= PROX_TOL, worst_kkt), (worst_gain <= 1e-12, worst_gain)))
        })
        .collect::<Result<_>>()?;
    Ok(vec![
        Check::new("subgradient", rows.iter().map(|r| r.0), 0.0),
        Check::new("beats_perturbations", rows.iter().map(|r| r.1), 0.0),
    ])
}

const KKT_TOL: f64 = 1e-6;

/// Planted 30 × 30 rank-2 instances with tail norm 0.05 sampled at
/// `|Ω| = 450`, solved at the selected λ: the solver must converge, the
/// optimality residual must vanish, and the first-order optimality
/// inequality at the planted `A_r` must hold.
fn kkt(trials: usize, seed: u64) -> Result<Vec<Check>> {
    let records = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = rng::trial_seed(seed, t);
            let spec = PlantedSpec {
                m: 30,
                n: 30,
                r: 2,
                spectrum: Spectrum { kind: SpectrumKind::Flat, top: 1.0, ratio: 1.0 },
                tail: Tail { kind: TailKind::GaussianScaled, epsilon_target: 0.05 },
                factor_model: FactorModel::Haar,
                seed: s,
            };
            run_trial(&spec, 450, LambdaMode::Corollary1, 2.0, s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![
        Check::new(
            "converged",
            records.iter().map(|r| (r.converged, r.iterations as f64)),
            0.0,
        ),
        Check::new(
            "kkt_residual",
            records.iter().map(|r| {
                let worst = r.kkt.tangent_gap.max(r.kkt.spectral_slack);
                (worst <= KKT_TOL, worst)
            }),
            0.0,
        ),
        Check::new(
            "optimality_inequality",
            records.iter().map(|r| {
                let o = r.optimality;
                (o.holds(OPTIMALITY_SLACK), (o.lhs - o.rhs) / (1.0 + o.rhs.abs()))
            }),
            0.0,
        ),
    ])
}
