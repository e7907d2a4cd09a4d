//! Difference-quotient engines for `D^γF`, the horizontal derivative `DF` and the
//! vertical derivatives `∂_iF`, with a trichotomous verdict on each limit.
//!
//! Every engine evaluates a geometric ladder `η_k = η₀ρ^k` and classifies it:
//! converged when the tail is flat, oscillating when the ladder keeps turning
//! with a non-vanishing amplitude, inconclusive otherwise. The structural
//! identities `D^γF = DF + ⟨∇F, γ⟩` and the gradient recovery from `d` directions
//! are built on top of those reports.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flow::{solve_flow_on, FlowConfig};
use crate::functional::{DirectionField, Functional, FunctionalWithDerivatives};
use crate::path::GridPath;

#[derive(Debug, Clone, PartialEq)]
pub struct LadderConfig {
    pub eta0: f64,
    pub ratio: f64,
    pub count: usize,
    /// Number of trailing quotients used for the verdict and the estimate.
    pub tail: usize,
    /// Converged when the tail spread is below `conv_rel·max(1, |median|)`.
    pub conv_rel: f64,
    /// Oscillation needs a tail spread of at least `osc_rel·max(1, |median|)`.
    pub osc_rel: f64,
    /// Oscillation needs this many direction changes along the ladder.
    pub min_alternations: usize,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig { eta0: 1e-2, ratio: 0.5, count: 20, tail: 5, conv_rel: 1e-4, osc_rel: 1e-2, min_alternations: 3 }
    }
}

impl LadderConfig {
    pub fn with_eta0(mut self, eta0: f64) -> Self {
        self.eta0 = eta0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::config(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::config(format!("ladder ratio must lie in (0, 1), got {}", self.ratio)));
        }
        if self.tail < 2 || self.count < self.tail {
            return Err(Error::config(format!("need 2 ≤ tail ≤ count, got tail {} and count {}", self.tail, self.count)));
        }
        Ok(())
    }

    /// Nominal scales `η₀ρ^k`, `k = 0..count`.
    pub fn etas(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.eta0 * self.ratio.powi(k as i32)).collect()
    }
}

/// Scales actually used (after rounding of `t + η`) and the quotients at them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientLadder {
    pub etas: Vec<f64>,
    pub quotients: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    Oscillating,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Oscillating => "oscillating",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    /// Richardson-extrapolated tail mean; only meaningful when converged.
    pub estimate: f64,
    pub ladder: QuotientLadder,
    pub verdict: Verdict,
    /// `max − min` of the tail quotients.
    pub spread_tail: f64,
}

impl DerivativeReport {
    pub fn converged(&self) -> bool {
        self.verdict == Verdict::Converged
    }

    /// The estimate, or a non-differentiability error naming `which`.
    pub fn require(&self, which: impl Into<String>) -> Result<f64> {
        match self.verdict {
            Verdict::Converged => Ok(self.estimate),
            verdict => Err(Error::NonDifferentiable { which: which.into(), verdict }),
        }
    }

    /// Rows `eta,quotient` followed by the summary row `verdict,estimate,spread_tail`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["eta", "quotient"])?;
        for (eta, q) in self.ladder.etas.iter().zip(&self.ladder.quotients) {
            w.write_record([format!("{eta:e}"), format!("{q:e}")])?;
        }
        w.write_record([self.verdict.to_string(), format!("{:e}", self.estimate), format!("{:e}", self.spread_tail)])?;
        w.flush()?;
        Ok(())
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Number of sign changes between successive non-zero differences.
fn direction_changes(q: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut changes = 0;
    for w in q.windows(2) {
        let d = w[1] - w[0];
        if d == 0.0 {
            continue;
        }
        if last != 0.0 && d.signum() != last.signum() {
            changes += 1;
        }
        last = d;
    }
    changes
}

/// Applies the verdict rules to a ladder; `order` is the leading error order of
/// the quotients (1 for one-sided, 2 for central), used for extrapolation.
pub fn classify(ladder: QuotientLadder, cfg: &LadderConfig, order: i32) -> DerivativeReport {
    let n = ladder.quotients.len();
    let tail = &ladder.quotients[n.saturating_sub(cfg.tail)..];
    if tail.is_empty() || ladder.quotients.iter().any(|q| !q.is_finite()) {
        return DerivativeReport { estimate: f64::NAN, ladder, verdict: Verdict::Inconclusive, spread_tail: f64::NAN };
    }
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    let scale = median(tail).abs().max(1.0);

    let verdict = if spread <= cfg.conv_rel * scale {
        Verdict::Converged
    } else if spread >= cfg.osc_rel * scale && direction_changes(&ladder.quotients) >= cfg.min_alternations {
        Verdict::Oscillating
    } else {
        Verdict::Inconclusive
    };

    // Richardson on consecutive pairs, using the realised scale ratios.
    let start = n - tail.len();
    let mut acc = 0.0;
    let mut count = 0;
    for k in start..n - 1 {
        let r = (ladder.etas[k + 1] / ladder.etas[k]).powi(order);
        acc += (ladder.quotients[k + 1] - r * ladder.quotients[k]) / (1.0 - r);
        count += 1;
    }
    let estimate = if count > 0 { acc / count as f64 } else { tail[0] };
    DerivativeReport { estimate, ladder, verdict, spread_tail: spread }
}

fn check_time(x: &GridPath, t: f64) -> Result<()> {
    if !(0.0..x.horizon()).contains(&t) {
        return Err(Error::domain(format!("derivative time {t} must lie in [0, {})", x.horizon())));
    }
    Ok(())
}

/// Nodes `t + η_k` and the realised scales `(t + η_k) − t`, largest first.
fn ladder_points(t: f64, cfg: &LadderConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    let points: Vec<f64> = cfg.etas().iter().map(|e| t + e).collect();
    let etas: Vec<f64> = points.iter().map(|p| p - t).collect();
    if etas.iter().any(|&e| !(e > 0.0)) || points.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::config(format!("ladder scales collapse at t = {t}; increase eta0 or reduce count")));
    }
    Ok((points, etas))
}

/// Flow grid after `t`: each shell between consecutive ladder points, and the
/// innermost one down to `t`, split into at least 8 cells no longer than `window`.
fn ladder_grid(t: f64, points: &[f64], window: f64) -> Vec<f64> {
    let mut bounds: Vec<f64> = points.iter().rev().copied().collect();
    bounds.insert(0, t);
    let mut grid = Vec::new();
    for w in bounds.windows(2) {
        let len = w[1] - w[0];
        let m = ((len / window) * (1.0 + 1e-9)).ceil().max(8.0) as usize;
        for j in 1..m {
            let u = w[0] + len * (j as f64 / m as f64);
            if u > *grid.last().unwrap_or(&t) && u < w[1] {
                grid.push(u);
            }
        }
        grid.push(w[1]);
    }
    grid
}

/// `D^γF(t, x)`: quotients `(F(t+η, Y_{∧(t+η)}) − F(t, x_{∧t}))/η` along one flow
/// solve of `Y^{t,x,γ}` whose grid contains every ladder point.
pub fn d_gamma(f: &Functional, gamma: &DirectionField, t: f64, x: &GridPath, cfg: &LadderConfig) -> Result<DerivativeReport> {
    check_time(x, t)?;
    let (points, etas) = ladder_points(t, cfg)?;
    let x_ext = x.extend_to(points[0]);
    let flow_cfg = FlowConfig { picard_tol: 1e-14, max_iters: 200, ..FlowConfig::default() };
    let window = 1.0 / (2.0 * gamma.lipschitz());
    let grid = ladder_grid(t, &points, window);
    let flow = solve_flow_on(&x_ext, t, gamma, &grid, &flow_cfg)?;
    let base = f.eval(t, x.stop(t)?.path());
    let quotients = points
        .iter()
        .zip(&etas)
        .map(|(&p, &eta)| Ok((f.eval(p, flow.path.stop(p)?.path()) - base) / eta))
        .collect::<Result<Vec<f64>>>()?;
    Ok(classify(QuotientLadder { etas, quotients }, cfg, 1))
}

/// `DF(t, x)`: quotients `(F(t+η, x_{∧t}) − F(t, x_{∧t}))/η` on the stopped path.
pub fn d_horizontal(f: &Functional, t: f64, x: &GridPath, cfg: &LadderConfig) -> Result<DerivativeReport> {
    check_time(x, t)?;
    let (points, etas) = ladder_points(t, cfg)?;
    let stopped = x.stop(t)?.into_path().extend_to(points[0]);
    let base = f.eval(t, &stopped);
    let quotients = points.iter().zip(&etas).map(|(&p, &eta)| (f.eval(p, &stopped) - base) / eta).collect();
    Ok(classify(QuotientLadder { etas, quotients }, cfg, 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceQuotient {
    Central,
    Forward,
}

/// `∂_iF(t, x)` from vertical bumps `x^{±h e_i}_{∧t}` over the ladder of `h`.
pub fn d_space(
    f: &Functional,
    axis: usize,
    t: f64,
    x: &GridPath,
    cfg: &LadderConfig,
    mode: SpaceQuotient,
) -> Result<DerivativeReport> {
    if axis >= x.dim() {
        return Err(Error::domain(format!("axis {axis} out of range for dimension {}", x.dim())));
    }
    if !(0.0..=x.horizon()).contains(&t) {
        return Err(Error::domain(format!("time {t} outside [0, {}]", x.horizon())));
    }
    cfg.validate()?;
    let stopped = x.stop(t)?;
    let xi = stopped.eval_comp(t, axis);
    let base = f.eval(t, &stopped);
    let bumped = |h: f64| -> Result<f64> {
        let mut e = vec![0.0; x.dim()];
        e[axis] = h;
        Ok(f.eval(t, stopped.bump(&e)?.path()))
    };
    let mut etas = Vec::with_capacity(cfg.count);
    let mut quotients = Vec::with_capacity(cfg.count);
    for h in cfg.etas() {
        let up = (xi + h) - xi;
        let q = match mode {
            SpaceQuotient::Forward => (bumped(up)? - base) / up,
            SpaceQuotient::Central => {
                let down = xi - (xi - h);
                (bumped(up)? - bumped(-down)?) / (up + down)
            }
        };
        etas.push(up);
        quotients.push(q);
    }
    let order = if mode == SpaceQuotient::Central { 2 } else { 1 };
    Ok(classify(QuotientLadder { etas, quotients }, cfg, order))
}

/// Where `DF` and `∇F` come from in [`relation_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeSource {
    /// Difference quotients for every term.
    Numerical,
    /// Coded `∂F` and `∇̃F`; `D^γF` is still a difference quotient.
    Coded,
}

fn gradient(fd: &FunctionalWithDerivatives, source: DerivativeSource, t: f64, x: &GridPath, cfg: &LadderConfig) -> Result<Vec<f64>> {
    match source {
        DerivativeSource::Coded => {
            let xs = x.stop(t)?;
            fd.grad_at(t, &xs)
        }
        DerivativeSource::Numerical => (0..x.dim())
            .map(|i| d_space(&fd.base, i, t, x, cfg, SpaceQuotient::Central)?.require(format!("∂_{}F", i + 1)))
            .collect(),
    }
}

/// `D^γF − DF − ⟨∇F, γ(t, x_{∧t})⟩`. Fails with [`Error::NonDifferentiable`] when any
/// difference-quotient report does not converge.
pub fn relation_residual(
    fd: &FunctionalWithDerivatives,
    source: DerivativeSource,
    gamma: &DirectionField,
    t: f64,
    x: &GridPath,
    cfg: &LadderConfig,
) -> Result<f64> {
    if gamma.dim() != x.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: gamma.dim() });
    }
    let dg = d_gamma(&fd.base, gamma, t, x, cfg)?.require("D^γF")?;
    let xs = x.stop(t)?;
    let df = match source {
        DerivativeSource::Coded => fd.partial_t()?.eval(t, &xs),
        DerivativeSource::Numerical => d_horizontal(&fd.base, t, x, cfg)?.require("DF")?,
    };
    let grad = gradient(fd, source, t, x, cfg)?;
    let g = gamma.eval(t, &xs);
    let inner: f64 = grad.iter().zip(&g).map(|(a, b)| a * b).sum();
    Ok(dg - df - inner)
}

/// Largest singular value over the smallest; infinite when singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Condition numbers above this are rejected by [`recover_gradient`].
pub const CONDITION_CAP: f64 = 1e8;

/// `∇F = Γ⁻¹(D^γF − DF·1)` where the rows of `Γ` are `γ_i(t, x_{∧t})`.
pub fn recover_gradient(
    f: &Functional,
    gammas: &[DirectionField],
    t: f64,
    x: &GridPath,
    cfg: &LadderConfig,
) -> Result<Vec<f64>> {
    let d = x.dim();
    if gammas.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: gammas.len() });
    }
    if let Some(g) = gammas.iter().find(|g| g.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: g.dim() });
    }
    let xs = x.stop(t)?;
    let rows: Vec<f64> = gammas.iter().flat_map(|g| g.eval(t, &xs)).collect();
    let m = DMatrix::from_row_slice(d, d, &rows);
    let condition = condition_number(&m);
    if !(condition <= CONDITION_CAP) {
        return Err(Error::IllConditioned { condition });
    }
    let df = d_horizontal(f, t, x, cfg)?.require("DF")?;
    let rhs = gammas
        .iter()
        .enumerate()
        .map(|(i, g)| Ok(d_gamma(f, g, t, x, cfg)?.require(format!("D^γ{}F", i + 1))? - df))
        .collect::<Result<Vec<f64>>>()?;
    let sol = m.lu().solve(&DVector::from_vec(rhs)).ok_or(Error::IllConditioned { condition })?;
    Ok(sol.iter().copied().collect())
}

/// `(1/h)∫_t^{t+h} [D^γF(s, x_{∧t}) − ⟨∇F(s, x_{∧t}), γ(s, x_{∧t})⟩] ds` by the
/// trapezoid rule on `nodes + 1` equally spaced points.
pub fn horizontal_from_gamma(
    f: &Functional,
    gamma: &DirectionField,
    t: f64,
    x: &GridPath,
    h: f64,
    nodes: usize,
    cfg: &LadderConfig,
) -> Result<f64> {
    check_time(x, t)?;
    if !(h > 0.0) || nodes == 0 {
        return Err(Error::config(format!("need h > 0 and at least one cell, got h = {h}, {nodes} cells")));
    }
    let stopped = x.stop(t)?.into_path().extend_to(t + h + cfg.eta0 * 2.0);
    let integrand = |s: f64| -> Result<f64> {
        let dg = d_gamma(f, gamma, s, &stopped, cfg)?.require("D^γF")?;
        let g = gamma.eval(s, &stopped);
        let mut inner = 0.0;
        for (i, gi) in g.iter().enumerate() {
            inner += d_space(f, i, s, &stopped, cfg, SpaceQuotient::Central)?.require(format!("∂_{}F", i + 1))? * gi;
        }
        Ok(dg - inner)
    };
    let mut acc = 0.0;
    for j in 0..=nodes {
        let s = t + h * (j as f64 / nodes as f64);
        let w = if j == 0 || j == nodes { 0.5 } else { 1.0 };
        acc += w * integrand(s)?;
    }
    Ok(acc / nodes as f64)
}

/// Steps used by [`numerical_derivatives`].
pub const FD_TIME_STEP: f64 = 1e-5;
pub const FD_GRAD_STEP: f64 = 1e-4;
pub const FD_HESS_STEP: f64 = 1e-3;

fn bump_eval(f: &Functional, t: f64, x: &GridPath, h: &[f64]) -> f64 {
    let xs = x.stop(t).expect("time within horizon");
    f.eval(t, &xs.bump(h).expect("matching dimension"))
}

/// `∂F`, `∇̃F` and `∇̃²F` by fixed-step differences: a forward horizontal quotient,
/// central vertical quotients and central second differences.
pub fn numerical_derivatives(base: Functional, dim: usize) -> FunctionalWithDerivatives {
    let label = base.label().to_string();
    let fb = base.clone();
    let partial_t = Functional::new(format!("d_t {label} (numerical)"), move |t, x| {
        let stopped = x.stop(t).expect("time within horizon").into_path().extend_to(t + FD_TIME_STEP);
        (fb.eval(t + FD_TIME_STEP, &stopped) - fb.eval(t, &stopped)) / FD_TIME_STEP
    });
    let grad = (0..dim)
        .map(|i| {
            let fb = base.clone();
            Functional::new(format!("grad {label}[{i}] (numerical)"), move |t, x| {
                let mut e = vec![0.0; dim];
                e[i] = FD_GRAD_STEP;
                let up = bump_eval(&fb, t, x, &e);
                e[i] = -FD_GRAD_STEP;
                (up - bump_eval(&fb, t, x, &e)) / (2.0 * FD_GRAD_STEP)
            })
        })
        .collect();
    let hess = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let fb = base.clone();
                    Functional::new(format!("hess {label}[{i}][{j}] (numerical)"), move |t, x| {
                        let h = FD_HESS_STEP;
                        let at = |a: f64, b: f64| {
                            let mut e = vec![0.0; dim];
                            e[i] += a;
                            e[j] += b;
                            bump_eval(&fb, t, x, &e)
                        };
                        if i == j {
                            (at(h, 0.0) - 2.0 * at(0.0, 0.0) + at(-h, 0.0)) / (h * h)
                        } else {
                            // symmetric in (i, j) by construction
                            (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
                        }
                    })
                })
                .collect()
        })
        .collect();
    FunctionalWithDerivatives::new(base, dim).with_partial_t(partial_t).with_grad(grad).with_hess(hess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{builtin, direction};
    use crate::path::{uniform_grid, InterpMode};

    fn path(f: impl Fn(f64) -> f64) -> GridPath {
        GridPath::from_fn(uniform_grid(256, 1.0), 1, InterpMode::Linear, |s| vec![f(s)]).unwrap()
    }

    #[test]
    fn eval_along_constant_direction() {
        let f = builtin("eval").unwrap().base;
        let x = path(|s| s.sin());
        let r = d_gamma(&f, &DirectionField::constant(vec![3.0]), 0.4, &x, &LadderConfig::default()).unwrap();
        assert!(r.converged(), "{r:?}");
        assert!((r.estimate - 3.0).abs() < 1e-6);
        assert_eq!(r.ladder.etas.len(), 20);
    }

    #[test]
    fn integral_along_any_direction_is_current_value() {
        let f = builtin("integral").unwrap().base;
        let x = path(|s| 1.0 + s * s);
        for name in ["one", "eval", "running_avg"] {
            let g = direction(name, 1).unwrap();
            let r = d_gamma(&f, &g, 0.3, &x, &LadderConfig::default()).unwrap();
            assert!(r.converged());
            assert!((r.estimate - x.eval_comp(0.3, 0)).abs() < 1e-6, "{name}: {}", r.estimate);
        }
    }

    #[test]
    fn horizontal_examples() {
        let x = path(|s| 2.0 - s);
        let cfg = LadderConfig::default();
        let sq = d_horizontal(&builtin("square").unwrap().base, 0.5, &x, &cfg).unwrap();
        assert!(sq.converged() && sq.estimate == 0.0);
        let tx0 = d_horizontal(&builtin("t_times_x0").unwrap().base, 0.5, &x, &cfg).unwrap();
        assert!(tx0.converged() && (tx0.estimate - 2.0).abs() < 1e-9);
        let int = d_horizontal(&builtin("integral").unwrap().base, 0.5, &x, &cfg).unwrap();
        assert!(int.converged() && (int.estimate - 1.5).abs() < 1e-9);
        for q in &int.ladder.quotients {
            assert!((q - 1.5).abs() < 1e-7);
        }
        assert!(d_horizontal(&builtin("square").unwrap().base, 1.0, &x, &cfg).is_err());
    }

    #[test]
    fn horizontal_near_horizon_uses_stopped_extension() {
        let x = path(|s| s);
        let r = d_horizontal(&builtin("integral").unwrap().base, 0.999, &x, &LadderConfig::default()).unwrap();
        assert!(r.converged() && (r.estimate - 0.999).abs() < 1e-9);
    }

    #[test]
    fn space_examples() {
        let x = path(|s| 0.5 + s);
        let cfg = LadderConfig::default();
        let sq = d_space(&builtin("square").unwrap().base, 0, 0.25, &x, &cfg, SpaceQuotient::Central).unwrap();
        for q in &sq.ladder.quotients {
            assert!((q - 1.5).abs() < 1e-9, "{q}");
        }
        assert!(sq.converged());
        let int = d_space(&builtin("integral").unwrap().base, 0, 0.25, &x, &cfg, SpaceQuotient::Central).unwrap();
        assert!(int.converged() && int.estimate == 0.0);
        assert!(d_space(&builtin("square").unwrap().base, 1, 0.25, &x, &cfg, SpaceQuotient::Central).is_err());
    }

    #[test]
    fn zero_direction_matches_horizontal() {
        let f = builtin("sin_integral").unwrap().base;
        let x = path(|s| (4.0 * s).cos());
        let cfg = LadderConfig::default();
        let a = d_gamma(&f, &DirectionField::zero(1), 0.6, &x, &cfg).unwrap();
        let b = d_horizontal(&f, 0.6, &x, &cfg).unwrap();
        assert_eq!(a.ladder.etas, b.ladder.etas);
        for ((p, q), eta) in a.ladder.quotients.iter().zip(&b.ladder.quotients).zip(&a.ladder.etas) {
            assert!(((p - q) * eta).abs() <= 1e-14, "{p} vs {q}");
        }
        assert_eq!(a.verdict, b.verdict);
    }

    #[test]
    fn verdict_rules() {
        let cfg = LadderConfig::default();
        let etas = cfg.etas();
        let flat = classify(QuotientLadder { etas: etas.clone(), quotients: vec![1.0; 20] }, &cfg, 1);
        assert_eq!(flat.verdict, Verdict::Converged);
        assert_eq!(flat.estimate, 1.0);

        let osc: Vec<f64> = etas.iter().map(|e| e.ln().sin()).collect();
        let r = classify(QuotientLadder { etas: etas.clone(), quotients: osc }, &cfg, 1);
        assert_eq!(r.verdict, Verdict::Oscillating);

        let drift: Vec<f64> = etas.iter().map(|e| e.ln()).collect();
        let r = classify(QuotientLadder { etas: etas.clone(), quotients: drift }, &cfg, 1);
        assert_eq!(r.verdict, Verdict::Inconclusive);

        let mut bad = vec![1.0; 20];
        bad[3] = f64::NAN;
        assert_eq!(classify(QuotientLadder { etas, quotients: bad }, &cfg, 1).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn richardson_removes_first_order_term() {
        let cfg = LadderConfig::default();
        let etas = cfg.etas();
        let q: Vec<f64> = etas.iter().map(|e| 2.0 + 0.3 * e).collect();
        let r = classify(QuotientLadder { etas, quotients: q }, &cfg, 1);
        assert!((r.estimate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn relation_examples() {
        let cfg = LadderConfig::default();
        let x = path(|s| 1.0 + 0.5 * s);
        let eval = builtin("eval").unwrap();
        let r = relation_residual(&eval, DerivativeSource::Numerical, &DirectionField::constant(vec![0.7]), 0.4, &x, &cfg).unwrap();
        assert!(r.abs() < 1e-6);
        let sq = builtin("square").unwrap();
        let g = direction("eval", 1).unwrap();
        for source in [DerivativeSource::Numerical, DerivativeSource::Coded] {
            let r = relation_residual(&sq, source, &g, 0.4, &x, &cfg).unwrap();
            assert!(r.abs() < 1e-4, "{source:?}: {r}");
        }
    }

    #[test]
    fn gradient_recovery() {
        let cfg = LadderConfig::default();
        let x = path(|s| 1.0 + s);
        let one = vec![DirectionField::constant(vec![1.0])];
        let g = recover_gradient(&builtin("eval").unwrap().base, &one, 0.5, &x, &cfg).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-6);
        let g = recover_gradient(&builtin("square").unwrap().base, &one, 0.5, &x, &cfg).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-4);

        let x2 = GridPath::from_fn(uniform_grid(64, 1.0), 2, InterpMode::Linear, |s| vec![1.0 + s, 2.0 - s]).unwrap();
        let canon = vec![DirectionField::constant(vec![1.0, 0.0]), DirectionField::constant(vec![0.0, 1.0])];
        let g = recover_gradient(&builtin("product").unwrap().base, &canon, 0.5, &x2, &cfg).unwrap();
        assert!((g[0] - 1.5).abs() < 1e-4 && (g[1] - 1.5).abs() < 1e-4, "{g:?}");

        let singular = vec![DirectionField::constant(vec![1.0, 1.0]), DirectionField::constant(vec![2.0, 2.0])];
        assert!(matches!(
            recover_gradient(&builtin("product").unwrap().base, &singular, 0.5, &x2, &cfg),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn radon_nikodym_reconstruction() {
        let cfg = LadderConfig::default();
        let x = path(|s| 1.0 + s * s);
        let xt = x.eval_comp(0.3, 0);
        let int = builtin("integral").unwrap().base;
        let v = horizontal_from_gamma(&int, &direction("eval", 1).unwrap(), 0.3, &x, 0.1, 4, &cfg).unwrap();
        assert!((v - xt).abs() < 1e-5);
        let sq = builtin("square").unwrap().base;
        let v = horizontal_from_gamma(&sq, &DirectionField::constant(vec![1.0]), 0.3, &x, 0.1, 4, &cfg).unwrap();
        assert!(v.abs() < 1e-4);
        let tx = builtin("t_times_eval").unwrap().base;
        let v = horizontal_from_gamma(&tx, &DirectionField::zero(1), 0.3, &x, 1e-3, 4, &cfg).unwrap();
        assert!((v - xt).abs() < 1e-5);
    }

    #[test]
    fn numerical_derivatives_match_coded() {
        let x = path(|s| 1.0 + s);
        let coded = builtin("square_plus_integral").unwrap();
        let num = numerical_derivatives(coded.base.clone(), 1);
        let t = 0.4;
        assert!((num.partial_t().unwrap().eval(t, &x) - coded.partial_t().unwrap().eval(t, &x)).abs() < 1e-4);
        assert!((num.grad().unwrap()[0].eval(t, &x) - coded.grad().unwrap()[0].eval(t, &x)).abs() < 1e-6);
        assert!((num.hess().unwrap()[0][0].eval(t, &x) - 2.0).abs() < 1e-4);
    }

    #[test]
    fn report_csv_layout() {
        let cfg = LadderConfig { count: 6, ..LadderConfig::default() };
        let r = d_horizontal(&builtin("integral").unwrap().base, 0.2, &path(|s| s), &cfg).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "eta,quotient");
        assert_eq!(lines.len(), 8);
        assert!(lines[7].starts_with("converged,"));
    }
}
