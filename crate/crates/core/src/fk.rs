//! Path-dependent Feynman–Kac checks: Euler–Maruyama simulation of
//! `dX = a(t, X_{∧t}) dt + σ(t, X_{∧t}) dB`, Monte Carlo estimates of
//! `F(t, x) = E[exp(−∫_t^T r) g(X) | X_{∧t} = x_{∧t}]`, the pathwise PDE residual and
//! a martingale test.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::scaffold;
use crate::functional::{DirectionField, Functional, FunctionalWithDerivatives};
use crate::path::GridPath;
use crate::rng::NormalStream;

type MatrixFn = dyn Fn(f64, &GridPath) -> Vec<f64> + Send + Sync;

/// A `d×m` matrix-valued non-anticipative functional, stored row-major.
#[derive(Clone)]
pub struct Diffusion {
    label: String,
    dim: usize,
    noise_dim: usize,
    f: Arc<MatrixFn>,
}

impl Diffusion {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        noise_dim: usize,
        f: impl Fn(f64, &GridPath) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Diffusion { label: label.into(), dim, noise_dim, f: Arc::new(f) }
    }

    pub fn constant(dim: usize, noise_dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * noise_dim {
            return Err(Error::DimensionMismatch { expected: dim * noise_dim, got: entries.len() });
        }
        Ok(Diffusion::new("constant", dim, noise_dim, move |_, _| entries.clone()))
    }

    pub fn eval(&self, t: f64, x: &GridPath) -> Vec<f64> {
        (self.f)(t, x)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Diffusion({}, {}×{})", self.label, self.dim, self.noise_dim)
    }
}

#[derive(Debug, Clone)]
pub struct SdeSpec {
    pub drift: DirectionField,
    pub diffusion: Diffusion,
    /// Discount rate `r(t, x_{∧t})`.
    pub rate: Functional,
    /// Terminal payoff `g(x)`, evaluated as `g(T, x)`.
    pub terminal: Functional,
    pub horizon: f64,
}

impl SdeSpec {
    pub fn new(drift: DirectionField, diffusion: Diffusion, rate: Functional, terminal: Functional, horizon: f64) -> Result<Self> {
        if diffusion.dim() != drift.dim() {
            return Err(Error::DimensionMismatch { expected: drift.dim(), got: diffusion.dim() });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        Ok(SdeSpec { drift, diffusion, rate, terminal, horizon })
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }
}

/// A model together with a closed-form candidate for `F`.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub name: &'static str,
    pub spec: SdeSpec,
    pub solution: FunctionalWithDerivatives,
}

pub const BENCHMARKS: &[&str] = &["gaussian", "drifted", "discounted", "deterministic", "corrupted"];

const DRIFT: f64 = 0.5;
const RATE: f64 = 0.3;

fn at(t: f64, x: &GridPath) -> f64 {
    x.eval_comp(t, 0)
}

/// One-dimensional benchmarks on `[0, 1]`. `corrupted` pairs the Brownian model
/// with `x²`, which is not its value function.
pub fn benchmark(name: &str) -> Result<Benchmark> {
    let horizon = 1.0;
    let unit = || Diffusion::constant(1, 1, vec![1.0]).expect("1×1");
    let zero_rate = || Functional::constant("0", 0.0);
    let square_payoff = || Functional::new("x(T)^2", |t, x| at(t, x).powi(2));
    let linear_payoff = || Functional::new("x(T)", at);
    let b = match name {
        "gaussian" | "corrupted" => {
            let spec = SdeSpec::new(DirectionField::zero(1), unit(), zero_rate(), square_payoff(), horizon)?;
            let solution = if name == "gaussian" {
                FunctionalWithDerivatives::new(Functional::new("x^2 + (T-t)", move |t, x| at(t, x).powi(2) + (horizon - t)), 1)
                    .with_partial_t(Functional::constant("-1", -1.0))
            } else {
                FunctionalWithDerivatives::new(Functional::new("x^2", |t, x| at(t, x).powi(2)), 1)
                    .with_partial_t(Functional::constant("0", 0.0))
            };
            let solution = solution
                .with_grad(vec![Functional::new("2x", |t, x| 2.0 * at(t, x))])
                .with_hess(vec![vec![Functional::constant("2", 2.0)]]);
            Benchmark { name: if name == "gaussian" { "gaussian" } else { "corrupted" }, spec, solution }
        }
        "drifted" => Benchmark {
            name: "drifted",
            spec: SdeSpec::new(DirectionField::constant(vec![DRIFT]), unit(), zero_rate(), linear_payoff(), horizon)?,
            solution: FunctionalWithDerivatives::new(Functional::new("x + mu(T-t)", move |t, x| at(t, x) + DRIFT * (horizon - t)), 1)
                .with_partial_t(Functional::constant("-mu", -DRIFT))
                .with_grad(vec![Functional::constant("1", 1.0)])
                .with_hess(vec![vec![Functional::constant("0", 0.0)]]),
        },
        "discounted" => Benchmark {
            name: "discounted",
            spec: SdeSpec::new(
                DirectionField::zero(1),
                unit(),
                Functional::constant("rho", RATE),
                Functional::constant("1", 1.0),
                horizon,
            )?,
            solution: FunctionalWithDerivatives::new(Functional::new("exp(-rho(T-t))", move |t, _| (-RATE * (horizon - t)).exp()), 1)
                .with_partial_t(Functional::new("rho exp(-rho(T-t))", move |t, _| RATE * (-RATE * (horizon - t)).exp()))
                .with_grad(vec![Functional::constant("0", 0.0)])
                .with_hess(vec![vec![Functional::constant("0", 0.0)]]),
        },
        "deterministic" => Benchmark {
            name: "deterministic",
            spec: SdeSpec::new(
                DirectionField::constant(vec![1.0]),
                Diffusion::constant(1, 1, vec![0.0])?,
                zero_rate(),
                linear_payoff(),
                horizon,
            )?,
            solution: FunctionalWithDerivatives::new(Functional::new("x + (T-t)", move |t, x| at(t, x) + (horizon - t)), 1)
                .with_partial_t(Functional::constant("-1", -1.0))
                .with_grad(vec![Functional::constant("1", 1.0)])
                .with_hess(vec![vec![Functional::constant("0", 0.0)]]),
        },
        other => return Err(Error::UnknownName(format!("benchmark `{other}`; known: {}", BENCHMARKS.join(", ")))),
    };
    Ok(b)
}

fn check_start(spec: &SdeSpec, t: f64, x: &GridPath) -> Result<()> {
    if x.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: x.dim() });
    }
    if (x.horizon() - spec.horizon).abs() > 1e-12 * spec.horizon.max(1.0) {
        return Err(Error::GridMismatch(format!("path horizon {} differs from model horizon {}", x.horizon(), spec.horizon)));
    }
    if !(0.0 <= t && t <= spec.horizon) {
        return Err(Error::domain(format!("start time {t} outside [0, {}]", spec.horizon)));
    }
    Ok(())
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::config(format!("time step must be positive, got {step}")));
    }
    Ok(())
}

/// Cells of length at most `step` on each interval between consecutive `knots`
/// (all after `t`), ending at `T`.
fn simulation_grid(t: f64, knots: &[f64], horizon: f64, step: f64) -> Vec<f64> {
    let mut ext = Vec::new();
    let mut a = t;
    for &b in knots.iter().chain(std::iter::once(&horizon)) {
        if b <= a {
            continue;
        }
        let n = (((b - a) / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        ext.extend((1..n).map(|j| a + (b - a) * (j as f64 / n as f64)));
        ext.push(b);
        a = b;
    }
    ext
}

/// Euler–Maruyama path with `x` on `[0, t]` and simulated nodes `ext`; also
/// returns the index of `t` and the left-point integral of `r` from `t` to each node.
fn simulate_on(spec: &SdeSpec, t: f64, x: &GridPath, ext: &[f64], seed: u64, path_index: u64) -> Result<(GridPath, usize, Vec<f64>)> {
    let (mut path, start) = scaffold(x, t, ext)?;
    let d = spec.dim();
    let m = spec.diffusion.noise_dim();
    let mut normals = NormalStream::new(seed, path_index);
    let mut xi = vec![0.0; m];
    let mut discount = vec![0.0];
    let times = path.times().to_vec();
    for j in start..start + ext.len() {
        let (s, dt) = (times[j], times[j + 1] - times[j]);
        let a = spec.drift.eval(s, &path);
        let sigma = spec.diffusion.eval(s, &path);
        let r = spec.rate.eval(s, &path);
        let sq = dt.sqrt();
        for z in xi.iter_mut() {
            *z = normals.next_normal();
        }
        let next: Vec<f64> = (0..d)
            .map(|k| path.value_comp(j, k) + a[k] * dt + sq * (0..m).map(|l| sigma[k * m + l] * xi[l]).sum::<f64>())
            .collect();
        path.set_node(j + 1, &next);
        discount.push(discount.last().unwrap() + r * dt);
    }
    crate::flow::hold_tail(&mut path, start + ext.len());
    Ok((path, start, discount))
}

/// One Euler–Maruyama path from `(t, x_{∧t})` to `T` with cells of length at most
/// `step`, driven by substream `path_index` of `seed`.
pub fn simulate_sde(spec: &SdeSpec, t: f64, x: &GridPath, step: f64, seed: u64, path_index: u64) -> Result<GridPath> {
    check_start(spec, t, x)?;
    check_step(step)?;
    let ext = simulation_grid(t, &[], spec.horizon, step);
    Ok(simulate_on(spec, t, x, &ext, seed, path_index)?.0)
}

/// Order-independent summation: fixed binary splitting of the input order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Mean and standard error of the mean, summed pairwise.
fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    let mean = pairwise_sum(samples) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Monte Carlo estimate of `F(t, x)`; at `t = T` this is `g(x)` exactly.
pub fn estimate_f(spec: &SdeSpec, t: f64, x: &GridPath, n_paths: usize, step: f64, seed: u64) -> Result<McEstimate> {
    check_start(spec, t, x)?;
    check_step(step)?;
    if n_paths == 0 {
        return Err(Error::config("need at least one path"));
    }
    if t == spec.horizon {
        let g = spec.terminal.eval(spec.horizon, x);
        return Ok(McEstimate { mean: g, stderr: 0.0, n_paths, seed });
    }
    let ext = simulation_grid(t, &[], spec.horizon, step);
    let samples = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let (path, _, discount) = simulate_on(spec, t, x, &ext, seed, i as u64)?;
            Ok((-discount.last().unwrap()).exp() * spec.terminal.eval(spec.horizon, &path))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = mean_stderr(&samples);
    Ok(McEstimate { mean, stderr, n_paths, seed })
}

/// `∂F + ⟨a, ∇̃F⟩ − rF + ½ Tr(∇̃²F σσᵀ)` at `(t, x_{∧t})`.
pub fn fk_residual(f: &FunctionalWithDerivatives, spec: &SdeSpec, t: f64, x: &GridPath) -> Result<f64> {
    check_start(spec, t, x)?;
    if f.dim != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: f.dim });
    }
    let need = |e: Error| match e {
        Error::MissingDerivative(m) => Error::config(format!("the Feynman–Kac residual needs {m}")),
        other => other,
    };
    let partial = f.partial_t().map_err(need)?;
    let grad = f.grad().map_err(need)?;
    let hess = f.hess().map_err(need)?;
    let stopped = x.stop(t)?;
    let xs = stopped.path();
    let d = spec.dim();
    let m = spec.diffusion.noise_dim();
    let a = spec.drift.eval(t, xs);
    let sigma = spec.diffusion.eval(t, xs);
    let mut res = partial.eval(t, xs) - spec.rate.eval(t, xs) * f.eval(t, xs);
    for i in 0..d {
        res += a[i] * grad[i].eval(t, xs);
        for j in 0..d {
            let cov: f64 = (0..m).map(|l| sigma[i * m + l] * sigma[j * m + l]).sum();
            res += 0.5 * hess[i][j].eval(t, xs) * cov;
        }
    }
    Ok(res)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementStat {
    pub from: f64,
    pub to: f64,
    pub mean: f64,
    pub stderr: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub n_paths: usize,
    pub seed: u64,
    pub increments: Vec<IncrementStat>,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.increments.iter().all(|s| !s.flagged)
    }
}

/// Simulates from `(t_grid[0], x)` and tests whether
/// `h(t) = exp(−∫_{t_0}^t r)·F(t, X_{∧t})` has zero-mean increments between
/// consecutive points of `t_grid`. An increment is flagged when its mean exceeds
/// three standard errors (plus a rounding allowance).
pub fn martingale_check(
    spec: &SdeSpec,
    f: &Functional,
    x: &GridPath,
    t_grid: &[f64],
    n_paths: usize,
    step: f64,
    seed: u64,
) -> Result<MartingaleReport> {
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config("the martingale grid needs at least two increasing times"));
    }
    let t0 = t_grid[0];
    check_start(spec, t0, x)?;
    check_step(step)?;
    if *t_grid.last().unwrap() > spec.horizon {
        return Err(Error::domain(format!("martingale grid exceeds the horizon {}", spec.horizon)));
    }
    if n_paths < 2 {
        return Err(Error::config("need at least two paths"));
    }
    let ext = simulation_grid(t0, &t_grid[1..], spec.horizon, step);
    let per_path = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let (path, start, discount) = simulate_on(spec, t0, x, &ext, seed, i as u64)?;
            t_grid
                .iter()
                .map(|&s| {
                    let j = path.grid_index(s).expect("grid contains the martingale times");
                    let stopped = path.stop(s)?;
                    Ok((-discount[j - start]).exp() * f.eval(s, stopped.path()))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let increments = (0..t_grid.len() - 1)
        .map(|k| {
            let diffs: Vec<f64> = per_path.iter().map(|h| h[k + 1] - h[k]).collect();
            let scale = per_path.iter().map(|h| h[k].abs().max(h[k + 1].abs())).fold(1.0, f64::max);
            let (mean, stderr) = mean_stderr(&diffs);
            IncrementStat { from: t_grid[k], to: t_grid[k + 1], mean, stderr, flagged: mean.abs() > 3.0 * stderr + 1e-12 * scale }
        })
        .collect();
    Ok(MartingaleReport { n_paths, seed, increments })
}
