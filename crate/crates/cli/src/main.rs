use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nnmc::bounds::{BoundInputs, BoundReport, CompetitorExtras};
use nnmc::experiments::{
    generate_planted, summarize, sweep, write_records_csv, FactorModel, LambdaMode, PlantedSpec,
    Spectrum, SpectrumKind, SweepSidecar, Tail, TailKind,
};
use nnmc::geometry::{coherence, required_sample_size, SampleConstant, SampleSizeBound, TailStats};
use nnmc::io::{load_dense_csv, save_dense_csv, save_json, to_json};
use nnmc::linalg::{tail_norm, truncate};
use nnmc::sampling::{sample_uniform, ObservationSet};
use nnmc::solver::{lambda_floor, select_lambda, solve, KktResidual, SolverConfig};
use nnmc::verify::{run_suite, Suite};
use nnmc::{CoherenceProfile, TangentSpace};

const EXIT_INVALID: u8 = 1;
const EXIT_VERIFY_FAILED: u8 = 2;

#[derive(Parser)]
#[command(name = "nnmc", version, about = "Nuclear-norm matrix completion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted matrix `U diag(σ) Vᵀ + N` with Haar factors.
    Gen(GenArgs),
    /// Draw entries uniformly with replacement and write an observation file.
    Sample(SampleArgs),
    /// Solve the nuclear-norm regularized least-squares problem.
    Solve(SolveArgs),
    /// Coherence of the best rank-r approximation and the implied sample size.
    Coherence(CoherenceArgs),
    /// Evaluate every recovery bound at one parameter point.
    Bounds(BoundsArgs),
    /// Run a seeded verification suite; exits with 2 when it fails.
    Verify(VerifyArgs),
    /// Run planted-recovery trials over a grid of sample sizes.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SpectrumArg {
    Flat,
    Geometric,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, value_enum, default_value = "flat")]
    spectrum: SpectrumArg,
    #[arg(long, default_value_t = 1.0)]
    top: f64,
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    /// Frobenius norm of the tail `A − A_r`.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_matrix: PathBuf,
    /// Metadata JSON; printed to stdout when omitted.
    #[arg(long)]
    out_meta: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SampleArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct SolveArgs {
    #[arg(long)]
    obs: PathBuf,
    /// A positive number, or `auto` for the selection rule (needs --eps and --r).
    #[arg(long, default_value = "auto")]
    lambda: String,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    /// Relative objective change tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    out_b: Option<PathBuf>,
    /// Result JSON; printed to stdout when omitted.
    #[arg(long)]
    out_result: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CoherenceArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
}

#[derive(clap::Args)]
struct BoundsArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    omega: usize,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long)]
    eps: f64,
    /// Defaults to the selection rule at the given ε.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    perp_norm: f64,
    /// `‖A_r‖∞`, used by the max-norm competitor bound.
    #[arg(long, default_value_t = 0.0)]
    max_abs_ar: f64,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long, value_parser = parse_suite)]
    suite: Suite,
    /// Defaults to the suite's own trial count.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report JSON; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SweepArgs {
    /// JSON planted-instance description.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    omega_grid: Vec<usize>,
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `corollary1` or a fixed positive value.
    #[arg(long, default_value = "corollary1", value_parser = parse_lambda_mode)]
    lambda: LambdaMode,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long)]
    out: PathBuf,
    /// Records and per-cell summary as JSON; defaults to the CSV path with a `.json` extension.
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: nnmc::Error| e.to_string())
}

fn parse_lambda_mode(s: &str) -> std::result::Result<LambdaMode, String> {
    if s == "corollary1" {
        return Ok(LambdaMode::Corollary1);
    }
    match s.parse::<f64>() {
        Ok(l) if l > 0.0 && l.is_finite() => Ok(LambdaMode::Fixed(l)),
        _ => Err(format!("expected `corollary1` or a positive number, got {s:?}")),
    }
}

#[derive(Serialize)]
struct GenMeta {
    spec: PlantedSpec,
    epsilon: f64,
    sigma: Vec<f64>,
    coherence: CoherenceProfile,
}

#[derive(Serialize)]
struct SolveOutput {
    lambda: f64,
    iterations: usize,
    objective: f64,
    kkt: KktResidual,
    converged: bool,
}

#[derive(Serialize)]
struct CoherenceOutput {
    mu0: f64,
    mu1: f64,
    m: usize,
    n: usize,
    r: usize,
    beta: f64,
    epsilon: f64,
    required_sample_size: f64,
    sample_size: SampleSizeBound,
    sample_size_low_rank: SampleSizeBound,
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => save_json(value, p).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{}", to_json(value)?);
            Ok(())
        }
    }
}

fn gen(args: GenArgs) -> Result<()> {
    let spec = PlantedSpec {
        m: args.m,
        n: args.n,
        r: args.r,
        spectrum: Spectrum {
            kind: match args.spectrum {
                SpectrumArg::Flat => SpectrumKind::Flat,
                SpectrumArg::Geometric => SpectrumKind::Geometric,
            },
            top: args.top,
            ratio: args.ratio,
        },
        tail: Tail {
            kind: if args.eps > 0.0 { TailKind::GaussianScaled } else { TailKind::None },
            epsilon_target: args.eps,
        },
        factor_model: FactorModel::Haar,
        seed: args.seed,
    };
    let inst = generate_planted(&spec)?;
    save_dense_csv(&inst.a, &args.out_matrix)
        .with_context(|| format!("writing {}", args.out_matrix.display()))?;
    let meta = GenMeta {
        spec,
        epsilon: inst.epsilon,
        sigma: spec.sigma(),
        coherence: inst.coherence,
    };
    emit(&meta, args.out_meta.as_deref())
}

fn sample(args: SampleArgs) -> Result<()> {
    let a = load_dense_csv(&args.matrix).with_context(|| format!("reading {}", args.matrix.display()))?;
    let omega = sample_uniform(a.rows(), a.cols(), args.count, args.seed)?;
    let obs = ObservationSet::from_matrix(omega, &a)?;
    let file = File::create(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let mut w = BufWriter::new(file);
    obs.write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn solve_cmd(args: SolveArgs) -> Result<()> {
    let file = File::open(&args.obs).with_context(|| format!("reading {}", args.obs.display()))?;
    let obs = ObservationSet::read(BufReader::new(file))?;
    let lambda = if args.lambda == "auto" {
        let (Some(eps), Some(r)) = (args.eps, args.r) else {
            bail!("--lambda auto needs both --eps and --r");
        };
        let (m, n) = obs.dims();
        let l = select_lambda(m, n, r, obs.sample().len(), eps)?;
        if l > 0.0 { l } else { lambda_floor(&obs) }
    } else {
        match args.lambda.parse::<f64>() {
            Ok(l) if l > 0.0 && l.is_finite() => l,
            _ => bail!("--lambda must be `auto` or a positive number, got {:?}", args.lambda),
        }
    };
    let config = SolverConfig {
        max_iters: args.max_iters,
        rel_obj_tol: args.tol,
        ..SolverConfig::new(lambda)
    };
    let result = solve(&obs, &config)?;
    if let Some(p) = &args.out_b {
        save_dense_csv(&result.b_star, p).with_context(|| format!("writing {}", p.display()))?;
    }
    let out = SolveOutput {
        lambda: result.lambda,
        iterations: result.iterations,
        objective: result.objective(),
        kkt: result.kkt,
        converged: result.converged,
    };
    emit(&out, args.out_result.as_deref())
}

fn coherence_cmd(args: CoherenceArgs) -> Result<()> {
    let a = load_dense_csv(&args.matrix).with_context(|| format!("reading {}", args.matrix.display()))?;
    if args.r == 0 || args.r > a.rows().min(a.cols()) {
        bail!("--r must lie in 1..={}", a.rows().min(a.cols()));
    }
    let full = nnmc::linalg::svd(&a)?;
    let ar = truncate(&a, args.r)?;
    let profile = coherence(&TangentSpace::from_svd(&ar)?);
    let residual = a.as_matrix() - ar.reconstruct();
    let tail = TailStats {
        max_abs_residual: residual.amax(),
        frobenius_residual: tail_norm(&full.sigma, args.r),
    };
    let full_rank = required_sample_size(&profile, &tail, args.beta, SampleConstant::FullRank)?;
    let low_rank = required_sample_size(&profile, &tail, args.beta, SampleConstant::LowRank)?;
    let out = CoherenceOutput {
        mu0: profile.mu0,
        mu1: profile.mu1,
        m: profile.m,
        n: profile.n,
        r: profile.r,
        beta: args.beta,
        epsilon: tail.frobenius_residual,
        required_sample_size: full_rank.required,
        sample_size: full_rank,
        sample_size_low_rank: low_rank,
    };
    emit(&out, None)
}

fn bounds_cmd(args: BoundsArgs) -> Result<()> {
    let lambda = match args.lambda {
        Some(l) => l,
        None => select_lambda(args.m, args.n, args.r, args.omega, args.eps)?,
    };
    let inputs = BoundInputs {
        m: args.m,
        n: args.n,
        r: args.r,
        omega_size: args.omega,
        beta: args.beta,
        epsilon: args.eps,
        lambda,
        perp_norm: args.perp_norm,
    };
    let extras = CompetitorExtras::nominal(&inputs, args.max_abs_ar);
    emit(&BoundReport::evaluate(&inputs, &extras, None)?, None)
}

fn verify_cmd(args: VerifyArgs) -> Result<bool> {
    let trials = args.trials.unwrap_or_else(|| args.suite.default_trials());
    let report = run_suite(args.suite, trials, args.seed)?;
    emit(&report, args.out.as_deref())?;
    Ok(report.passed)
}

fn sweep_cmd(args: SweepArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let spec: PlantedSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.spec.display()))?;
    let records = sweep(&spec, &args.omega_grid, args.lambda, args.beta, args.trials, args.seed)?;
    let file = File::create(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    write_records_csv(&records, BufWriter::new(file))?;
    let summary = summarize(&records);
    let sidecar = args.sidecar.unwrap_or_else(|| args.out.with_extension("json"));
    save_json(&SweepSidecar { records: &records, summary: summary.clone() }, &sidecar)
        .with_context(|| format!("writing {}", sidecar.display()))?;
    emit(&summary, None)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => gen(a).map(|()| true),
        Command::Sample(a) => sample(a).map(|()| true),
        Command::Solve(a) => solve_cmd(a).map(|()| true),
        Command::Coherence(a) => coherence_cmd(a).map(|()| true),
        Command::Bounds(a) => bounds_cmd(a).map(|()| true),
        Command::Verify(a) => verify_cmd(a),
        Command::Sweep(a) => sweep_cmd(a).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
