//! Pathwise calculus along a refining partition sequence: quadratic covariation,
//! left-point partition integrals, the functional Itô residual and averaged-endpoint
//! (Fisk–Stratonovich) sums.
//!
//! Partition points are snapped to the nearest grid time of the path, so every
//! increment is an exact difference of stored samples.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functional::{FunctionalWithDerivatives, VectorFunctional};
use crate::path::{uniform_grid, GridPath, InterpMode};
use crate::rng::brownian_path;

#[derive(Debug, Clone, PartialEq)]
pub enum PartitionKind {
    /// `π_n` has `2^n` equal cells.
    Dyadic,
    /// `π_n` has `n` equal cells.
    Uniform,
    /// Explicit grids, `π_n = levels[n]`.
    Custom(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSequence {
    kind: PartitionKind,
    horizon: f64,
}

impl PartitionSequence {
    pub fn dyadic(horizon: f64) -> Self {
        PartitionSequence { kind: PartitionKind::Dyadic, horizon }
    }

    pub fn uniform(horizon: f64) -> Self {
        PartitionSequence { kind: PartitionKind::Uniform, horizon }
    }

    /// Each level must run from 0 to `T` strictly increasing, with strictly
    /// decreasing mesh from one level to the next.
    pub fn custom(levels: Vec<Vec<f64>>) -> Result<Self> {
        let horizon = *levels
            .first()
            .and_then(|l| l.last())
            .ok_or_else(|| Error::config("a custom partition sequence needs at least one level"))?;
        let mut prev_mesh = f64::INFINITY;
        for (n, grid) in levels.iter().enumerate() {
            if grid.len() < 2 || grid[0] != 0.0 || *grid.last().unwrap() != horizon {
                return Err(Error::config(format!("level {n} must run from 0 to {horizon}")));
            }
            if grid.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::config(format!("level {n} is not strictly increasing")));
            }
            let mesh = mesh_of(grid);
            if !(mesh < prev_mesh) {
                return Err(Error::config(format!("mesh does not decrease at level {n}")));
            }
            prev_mesh = mesh;
        }
        Ok(PartitionSequence { kind: PartitionKind::Custom(levels), horizon })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn kind(&self) -> &PartitionKind {
        &self.kind
    }

    pub fn level(&self, n: usize) -> Result<Vec<f64>> {
        match &self.kind {
            PartitionKind::Dyadic => {
                if n > 40 {
                    return Err(Error::config(format!("dyadic level {n} is too fine")));
                }
                Ok(uniform_grid(1 << n, self.horizon))
            }
            PartitionKind::Uniform => {
                if n == 0 {
                    return Err(Error::config("uniform partitions start at level 1"));
                }
                Ok(uniform_grid(n, self.horizon))
            }
            PartitionKind::Custom(levels) => {
                levels.get(n).cloned().ok_or_else(|| Error::config(format!("partition has no level {n}")))
            }
        }
    }

    pub fn mesh(&self, n: usize) -> Result<f64> {
        Ok(mesh_of(&self.level(n)?))
    }
}

fn mesh_of(grid: &[f64]) -> f64 {
    grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

/// Grid indices of the partition points of level `n`, snapped to the nearest
/// grid time of `x`.
pub fn snap_partition(x: &GridPath, pi: &PartitionSequence, n: usize) -> Result<Vec<usize>> {
    let horizon = x.horizon();
    if (pi.horizon() - horizon).abs() > 1e-12 * horizon.max(1.0) {
        return Err(Error::GridMismatch(format!("partition horizon {} differs from path horizon {horizon}", pi.horizon())));
    }
    let times = x.times();
    let mut out: Vec<usize> = Vec::new();
    for tau in pi.level(n)? {
        let j = times.partition_point(|&s| s < tau);
        let idx = if j == 0 {
            0
        } else if j == times.len() {
            times.len() - 1
        } else if tau - times[j - 1] <= times[j] - tau {
            j - 1
        } else {
            j
        };
        if let Some(&last) = out.last() {
            if idx <= last {
                return Err(Error::GridMismatch(format!(
                    "partition point {tau} snaps onto grid time {} already used; the path grid is too coarse for level {n}",
                    times[idx]
                )));
            }
        }
        out.push(idx);
    }
    Ok(out)
}

/// Running `Σ Δx_i Δx_iᵀ` at the partition times.
#[derive(Debug, Clone, PartialEq)]
pub struct QVMatrixPath {
    pub times: Vec<f64>,
    pub dim: usize,
    /// Row-major `d×d` blocks, one per time.
    pub matrices: Vec<f64>,
}

impl QVMatrixPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn at(&self, i: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.matrices[i * dd..(i + 1) * dd]
    }

    pub fn entry(&self, i: usize, a: usize, b: usize) -> f64 {
        self.at(i)[a * self.dim + b]
    }

    /// `[x]_π(T)`.
    pub fn terminal(&self) -> &[f64] {
        self.at(self.len() - 1)
    }
}

fn increment(x: &GridPath, a: usize, b: usize) -> Vec<f64> {
    (0..x.dim()).map(|k| x.value_comp(b, k) - x.value_comp(a, k)).collect()
}

pub fn quadratic_covariation(x: &GridPath, pi: &PartitionSequence, n: usize) -> Result<QVMatrixPath> {
    let idx = snap_partition(x, pi, n)?;
    let d = x.dim();
    let mut acc = vec![0.0; d * d];
    let mut matrices = Vec::with_capacity(idx.len() * d * d);
    matrices.extend_from_slice(&acc);
    for w in idx.windows(2) {
        let dx = increment(x, w[0], w[1]);
        for a in 0..d {
            for b in 0..d {
                acc[a * d + b] += dx[a] * dx[b];
            }
        }
        matrices.extend_from_slice(&acc);
    }
    Ok(QVMatrixPath { times: idx.iter().map(|&i| x.times()[i]).collect(), dim: d, matrices })
}

/// The three partition sums of an integrand `G` against `x` on one level,
/// computed from the same evaluations of `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSums {
    /// `Σ ⟨G(τ_i), Δx_i⟩`.
    pub ito: f64,
    /// `Σ ⟨(G(τ_i) + G(τ_{i+1}))/2, Δx_i⟩`.
    pub stratonovich: f64,
    /// `Σ ⟨G(τ_{i+1}) − G(τ_i), Δx_i⟩`.
    pub covariation: f64,
}

/// `G` is evaluated on the full path at partition times; non-anticipativity makes
/// that the same as evaluating on `x_{∧τ}`.
pub fn partition_sums(g: &VectorFunctional, x: &GridPath, pi: &PartitionSequence, n: usize) -> Result<PartitionSums> {
    if g.out_dim() != x.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: g.out_dim() });
    }
    let idx = snap_partition(x, pi, n)?;
    let times = x.times();
    let mut sums = PartitionSums { ito: 0.0, stratonovich: 0.0, covariation: 0.0 };
    let mut g_prev = g.eval(times[idx[0]], x);
    for w in idx.windows(2) {
        let g_next = g.eval(times[w[1]], x);
        let dx = increment(x, w[0], w[1]);
        for k in 0..dx.len() {
            sums.ito += g_prev[k] * dx[k];
            sums.stratonovich += 0.5 * (g_prev[k] + g_next[k]) * dx[k];
            sums.covariation += (g_next[k] - g_prev[k]) * dx[k];
        }
        g_prev = g_next;
    }
    Ok(sums)
}

/// Left-point sum `Σ ⟨G(τ_i, x_{∧τ_i}), Δx_i⟩`.
pub fn partition_integral(g: &VectorFunctional, x: &GridPath, pi: &PartitionSequence, n: usize) -> Result<f64> {
    Ok(partition_sums(g, x, pi, n)?.ito)
}

/// Averaged-endpoint sum `Σ ⟨(G(τ_i) + G(τ_{i+1}))/2, Δx_i⟩`.
pub fn stratonovich_integral(g: &VectorFunctional, x: &GridPath, pi: &PartitionSequence, n: usize) -> Result<f64> {
    Ok(partition_sums(g, x, pi, n)?.stratonovich)
}

/// `Σ ⟨G(τ_{i+1}) − G(τ_i), Δx_i⟩`.
pub fn discrete_covariation(g: &VectorFunctional, x: &GridPath, pi: &PartitionSequence, n: usize) -> Result<f64> {
    Ok(partition_sums(g, x, pi, n)?.covariation)
}

/// Terms of the discrete functional Itô identity on one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItoResidual {
    /// `F(T, x) − F(0, x_{∧0})`.
    pub increment: f64,
    /// `Σ ∂F(τ_i) Δτ_i`.
    pub time_term: f64,
    /// `Σ ⟨∇̃F(τ_i), Δx_i⟩`.
    pub integral_term: f64,
    /// `½ Σ Tr(∇̃²F(τ_i) Δx_i Δx_iᵀ)`.
    pub qv_term: f64,
    pub residual: f64,
    /// Sum of the absolute values of every summand, the natural rounding scale.
    pub magnitude: f64,
}

impl ItoResidual {
    pub fn relative(&self) -> f64 {
        if self.magnitude > 0.0 {
            self.residual.abs() / self.magnitude
        } else {
            self.residual.abs()
        }
    }
}

pub fn ito_residual_terms(
    fd: &FunctionalWithDerivatives,
    x: &GridPath,
    pi: &PartitionSequence,
    n: usize,
) -> Result<ItoResidual> {
    if fd.dim != x.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: fd.dim });
    }
    let partial = fd.partial_t().map_err(as_config)?;
    let grad = fd.grad().map_err(as_config)?;
    let hess = fd.hess().map_err(as_config)?;
    let idx = snap_partition(x, pi, n)?;
    let times = x.times();
    let d = x.dim();

    let f_end = fd.eval(x.horizon(), x);
    let f_start = fd.eval(0.0, x.stop(0.0)?.path());
    let mut r = ItoResidual {
        increment: f_end - f_start,
        time_term: 0.0,
        integral_term: 0.0,
        qv_term: 0.0,
        residual: 0.0,
        magnitude: f_end.abs() + f_start.abs(),
    };
    for w in idx.windows(2) {
        let t = times[w[0]];
        let dt = times[w[1]] - t;
        let dx = increment(x, w[0], w[1]);
        let a = partial.eval(t, x) * dt;
        r.time_term += a;
        r.magnitude += a.abs();
        for i in 0..d {
            let b = grad[i].eval(t, x) * dx[i];
            r.integral_term += b;
            r.magnitude += b.abs();
            for j in 0..d {
                let c = 0.5 * hess[i][j].eval(t, x) * dx[i] * dx[j];
                r.qv_term += c;
                r.magnitude += c.abs();
            }
        }
    }
    r.residual = r.increment - r.time_term - r.integral_term - r.qv_term;
    Ok(r)
}

fn as_config(e: Error) -> Error {
    match e {
        Error::MissingDerivative(m) => Error::config(format!("the Itô residual needs {m}")),
        other => other,
    }
}

/// `F(T,x) − F(0,x_{∧0}) − ∫∂F dt − ∫∇̃F·d^πx − ½∫Tr(∇̃²F d[x]_π)` on level `n`.
pub fn ito_residual(fd: &FunctionalWithDerivatives, x: &GridPath, pi: &PartitionSequence, n: usize) -> Result<f64> {
    Ok(ito_residual_terms(fd, x, pi, n)?.residual)
}

/// Linear interpolation of `x` through its (snapped) values at the level-`n` points.
pub fn polygonal_approximation(x: &GridPath, pi: &PartitionSequence, n: usize) -> Result<GridPath> {
    let idx = snap_partition(x, pi, n)?;
    let mut times: Vec<f64> = idx.iter().map(|&i| x.times()[i]).collect();
    let mut values: Vec<f64> = idx.iter().flat_map(|&i| x.value(i).to_vec()).collect();
    if *times.last().unwrap() < x.horizon() {
        times.push(x.horizon());
        values.extend_from_slice(x.value(x.len() - 1));
    }
    GridPath::from_flat(times, values, x.dim(), InterpMode::Linear)
}

/// Brownian paths on a common `2^k` base grid, regenerated on demand from
/// `(seed, path index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BrownianCorpus {
    pub seed: u64,
    pub n_paths: usize,
    pub base_log2: u32,
    pub dim: usize,
}

impl BrownianCorpus {
    pub fn new(seed: u64, n_paths: usize) -> Self {
        BrownianCorpus { seed, n_paths, base_log2: 16, dim: 1 }
    }

    pub fn path(&self, i: usize) -> GridPath {
        brownian_path(self.seed, i as u64, 1 << self.base_log2, 1.0, &vec![0.0; self.dim])
    }

    /// Applies `f` to every path in parallel; results are in path order.
    pub fn map<R: Send>(&self, f: impl Fn(usize, &GridPath) -> R + Sync) -> Vec<R> {
        (0..self.n_paths).into_par_iter().map(|i| f(i, &self.path(i))).collect()
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
