//! The extension `Y^{s,w,γ}` solving `dy = γ(t, y_{∧t}) dt` after `s`, with
//! `y = w` on `[0, s]`.
//!
//! [`solve_flow`] runs the windowed Picard iteration: on each window of length at
//! most `1/(2K)` the integral map is a contraction with constant `≤ 1/2`, so the
//! fixed point is unique and the iteration converges geometrically.
//! [`euler_flow`] is an explicit Euler scheme kept as an independent oracle.

use crate::error::{Error, Result};
use crate::functional::DirectionField;
use crate::path::GridPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicardInit {
    /// Every node of a window starts at the value at the window start.
    Constant,
    /// Warm start from an explicit Euler pass over the window.
    Euler,
}

/// Quadrature rule used to integrate `γ` along the computed path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Trapezoid,
    LeftRectangle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    /// Extension grid step; defaults to `(until − s)/1024`.
    pub substep: Option<f64>,
    /// Upper bound on the Picard window; the window never exceeds `1/(2K)`.
    pub window: Option<f64>,
    pub picard_tol: f64,
    pub max_iters: usize,
    pub init: PicardInit,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig { substep: None, window: None, picard_tol: 1e-10, max_iters: 100, init: PicardInit::Constant }
    }
}

impl FlowConfig {
    pub fn with_substep(mut self, substep: f64) -> Self {
        self.substep = Some(substep);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.picard_tol = tol;
        self
    }

    pub fn with_init(mut self, init: PicardInit) -> Self {
        self.init = init;
        self
    }
}

#[derive(Debug, Clone)]
pub struct FlowSolution {
    /// Equal to `w` on `[0, s]`, the computed extension on `(s, until]` and held
    /// constant afterwards.
    pub path: GridPath,
    pub start: f64,
    pub until: f64,
    pub direction: DirectionField,
    /// Largest cell of the extension grid.
    pub substep: f64,
    pub picard_tol: f64,
    /// Picard sweeps summed over windows (0 for Euler).
    pub iterations: usize,
    pub windows: usize,
    pub quadrature: Quadrature,
}

impl FlowSolution {
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        self.path.eval(t)
    }

    fn start_index(&self) -> usize {
        self.path.grid_index(self.start).expect("start time is a grid node")
    }

    fn end_index(&self) -> usize {
        self.path.grid_index(self.until).expect("end time is a grid node")
    }

    /// Largest `|y(u) − w(s) − ∫_s^u γ(r, y_{∧r}) dr|` over the extension nodes,
    /// integrating with the solver's own rule.
    pub fn max_residual(&self) -> f64 {
        let (a, b) = (self.start_index(), self.end_index());
        let times = self.path.times();
        let d = self.path.dim();
        let y0 = self.path.value(a).to_vec();
        let mut acc = vec![0.0; d];
        let mut prev = self.direction.eval(times[a], &self.path);
        let mut worst = 0.0f64;
        for j in a + 1..=b {
            let dt = times[j] - times[j - 1];
            let g = self.direction.eval(times[j], &self.path);
            for k in 0..d {
                acc[k] += match self.quadrature {
                    Quadrature::Trapezoid => dt * 0.5 * (prev[k] + g[k]),
                    Quadrature::LeftRectangle => dt * prev[k],
                };
                worst = worst.max((self.path.value_comp(j, k) - y0[k] - acc[k]).abs());
            }
            prev = g;
        }
        worst
    }

    /// `max(10·ε_P·scale, C·Δ)` with `C = sup |γ|` along the solution and `scale`
    /// the largest path value on the extension (at least 1).
    pub fn residual_tolerance(&self) -> f64 {
        let (a, b) = (self.start_index(), self.end_index());
        let times = self.path.times();
        let mut sup_gamma = 0.0f64;
        let mut scale = 1.0f64;
        for j in a..=b {
            for v in self.direction.eval(times[j], &self.path) {
                sup_gamma = sup_gamma.max(v.abs());
            }
            for &v in self.path.value(j) {
                scale = scale.max(v.abs());
            }
        }
        (10.0 * self.picard_tol * scale).max(sup_gamma * self.substep)
    }
}

fn check_inputs(w: &GridPath, s: f64, gamma: &DirectionField, until: f64) -> Result<()> {
    if gamma.dim() != w.dim() {
        return Err(Error::DimensionMismatch { expected: w.dim(), got: gamma.dim() });
    }
    let horizon = w.horizon();
    if !(0.0 <= s && s <= until && until <= horizon) {
        return Err(Error::domain(format!("need 0 ≤ s ≤ until ≤ T, got s = {s}, until = {until}, T = {horizon}")));
    }
    Ok(())
}

/// `n` equal cells from `s` to `until` (excluding `s`), with `n = ⌈(until − s)/Δ⌉`.
fn extension_grid(s: f64, until: f64, substep: f64) -> Vec<f64> {
    let len = until - s;
    let n = ((len / substep) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut ext: Vec<f64> = (1..n).map(|j| s + len * (j as f64 / n as f64)).collect();
    ext.push(until);
    ext
}

fn resolve_substep(cfg: &FlowConfig, s: f64, until: f64) -> Result<f64> {
    let substep = cfg.substep.unwrap_or((until - s) / 1024.0);
    if !(substep > 0.0 && substep.is_finite()) {
        return Err(Error::config(format!("substep must be positive, got {substep}")));
    }
    Ok(substep)
}

fn window_length(cfg: &FlowConfig, gamma: &DirectionField) -> Result<f64> {
    let contraction = 1.0 / (2.0 * gamma.lipschitz());
    let window = cfg.window.map_or(contraction, |w| w.min(contraction));
    if !(window > 0.0) {
        return Err(Error::config(format!("window must be positive, got {window}")));
    }
    Ok(window)
}

/// `w` on `[0, s]`, the nodes `ext` initialised to `w(s)`, and `T` if `until < T`.
/// Returns the path and the grid index of `s`.
pub(crate) fn scaffold(w: &GridPath, s: f64, ext: &[f64]) -> Result<(GridPath, usize)> {
    let stopped = w.stop(s)?;
    let base = stopped.path();
    let d = w.dim();
    let idx_s = base.grid_index(s).expect("stop time is on the grid");
    let mut times = base.times()[..=idx_s].to_vec();
    let mut values = base.flat_values()[..(idx_s + 1) * d].to_vec();
    let mut left: Vec<f64> = (0..=idx_s).flat_map(|i| base.left_value(i)).collect();
    let ws = base.value(idx_s).to_vec();
    for &u in ext {
        times.push(u);
        values.extend_from_slice(&ws);
        left.extend_from_slice(&ws);
    }
    let until = *times.last().unwrap();
    if until < w.horizon() {
        times.push(w.horizon());
        values.extend_from_slice(&ws);
        left.extend_from_slice(&ws);
    }
    Ok((GridPath::with_left_limits(times, values, left, d, w.mode()), idx_s))
}

pub(crate) fn hold_tail(path: &mut GridPath, last: usize) {
    if last + 1 < path.len() {
        let v = path.value(last).to_vec();
        path.set_node(last + 1, &v);
    }
}

/// Windowed Picard solve of the flow from `s` to `until`.
pub fn solve_flow(w: &GridPath, s: f64, gamma: &DirectionField, until: f64, cfg: &FlowConfig) -> Result<FlowSolution> {
    check_inputs(w, s, gamma, until)?;
    if s == until {
        return Ok(degenerate(w, s, gamma, cfg));
    }
    let substep = resolve_substep(cfg, s, until)?;
    let window = window_length(cfg, gamma)?;
    if substep >= window {
        return Err(Error::config(format!("substep {substep} is not below the Picard window {window}")));
    }
    solve_flow_on(w, s, gamma, &extension_grid(s, until, substep), cfg)
}

fn degenerate(w: &GridPath, s: f64, gamma: &DirectionField, cfg: &FlowConfig) -> FlowSolution {
    FlowSolution {
        path: w.stop(s).expect("checked range").into_path(),
        start: s,
        until: s,
        direction: gamma.clone(),
        substep: cfg.substep.unwrap_or(0.0),
        picard_tol: cfg.picard_tol,
        iterations: 0,
        windows: 0,
        quadrature: Quadrature::Trapezoid,
    }
}

/// Picard solve on a caller-supplied extension grid `s < ext[0] < ... < ext[n−1] = until`.
/// Every cell must fit inside one window.
pub(crate) fn solve_flow_on(
    w: &GridPath,
    s: f64,
    gamma: &DirectionField,
    ext: &[f64],
    cfg: &FlowConfig,
) -> Result<FlowSolution> {
    let until = *ext.last().ok_or_else(|| Error::config("empty extension grid"))?;
    check_inputs(w, s, gamma, until)?;
    let window = window_length(cfg, gamma)?;
    let (mut path, idx_s) = scaffold(w, s, ext)?;
    let last = idx_s + ext.len();
    let times = path.times().to_vec();
    let d = path.dim();
    let tol = cfg.picard_tol;

    let mut substep = 0.0f64;
    let mut total_iters = 0;
    let mut windows = 0;
    let mut start = idx_s;
    while start < last {
        let mut end = start;
        while end < last && times[end + 1] - times[start] <= window * (1.0 + 1e-12) {
            end += 1;
        }
        if end == start {
            return Err(Error::config(format!(
                "grid cell [{}, {}] is longer than the Picard window {window}",
                times[start],
                times[start + 1]
            )));
        }
        for j in start..end {
            substep = substep.max(times[j + 1] - times[j]);
        }
        windows += 1;

        let y0 = path.value(start).to_vec();
        match cfg.init {
            PicardInit::Constant => {
                for j in start + 1..=end {
                    path.set_node(j, &y0);
                }
            }
            PicardInit::Euler => {
                for j in start..end {
                    let g = gamma.eval(times[j], &path);
                    let dt = times[j + 1] - times[j];
                    let next: Vec<f64> = (0..d).map(|k| path.value_comp(j, k) + dt * g[k]).collect();
                    path.set_node(j + 1, &next);
                }
            }
        }

        let g_start = gamma.eval(times[start], &path);
        let mut iters = 0;
        loop {
            iters += 1;
            let g: Vec<Vec<f64>> = (start + 1..=end).map(|j| gamma.eval(times[j], &path)).collect();
            let mut acc = y0.clone();
            let mut change = 0.0f64;
            let mut scale = 1.0f64;
            let mut prev = &g_start;
            for (j, gj) in (start + 1..=end).zip(&g) {
                let dt = times[j] - times[j - 1];
                for k in 0..d {
                    acc[k] += dt * 0.5 * (prev[k] + gj[k]);
                    change = change.max((acc[k] - path.value_comp(j, k)).abs());
                    scale = scale.max(acc[k].abs());
                }
                if !acc.iter().all(|v| v.is_finite()) {
                    change = f64::INFINITY;
                    break;
                }
                path.set_node(j, &acc);
                prev = gj;
            }
            if change <= tol * scale {
                break;
            }
            if iters >= cfg.max_iters {
                hold_tail(&mut path, last);
                return Err(Error::PicardNonConvergence {
                    window_start: times[start],
                    iterations: iters,
                    last_change: change,
                    last_iterate: Box::new(path),
                });
            }
        }
        total_iters += iters;
        start = end;
    }
    hold_tail(&mut path, last);
    Ok(FlowSolution {
        path,
        start: s,
        until,
        direction: gamma.clone(),
        substep,
        picard_tol: tol,
        iterations: total_iters,
        windows,
        quadrature: Quadrature::Trapezoid,
    })
}

/// Explicit path-dependent Euler: `y(u + Δ) = y(u) + Δ·γ(u, y_{∧u})`.
pub fn euler_flow(w: &GridPath, s: f64, gamma: &DirectionField, until: f64, substep: f64) -> Result<FlowSolution> {
    check_inputs(w, s, gamma, until)?;
    let cfg = FlowConfig::default().with_substep(substep);
    if s == until {
        return Ok(degenerate(w, s, gamma, &cfg));
    }
    let substep = resolve_substep(&cfg, s, until)?;
    let ext = extension_grid(s, until, substep);
    let (mut path, idx_s) = scaffold(w, s, &ext)?;
    let last = idx_s + ext.len();
    let times = path.times().to_vec();
    let d = path.dim();
    let mut max_cell = 0.0f64;
    for j in idx_s..last {
        let g = gamma.eval(times[j], &path);
        let dt = times[j + 1] - times[j];
        max_cell = max_cell.max(dt);
        let next: Vec<f64> = (0..d).map(|k| path.value_comp(j, k) + dt * g[k]).collect();
        path.set_node(j + 1, &next);
    }
    hold_tail(&mut path, last);
    Ok(FlowSolution {
        path,
        start: s,
        until,
        direction: gamma.clone(),
        substep: max_cell,
        picard_tol: 0.0,
        iterations: 0,
        windows: 0,
        quadrature: Quadrature::LeftRectangle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::direction;
    use crate::path::{uniform_grid, InterpMode};

    fn ones() -> GridPath {
        GridPath::constant(&[1.0], 1.0, InterpMode::Linear).unwrap()
    }

    #[test]
    fn constant_slope() {
        let sol = solve_flow(&ones(), 0.5, &DirectionField::constant(vec![2.0]), 1.0, &FlowConfig::default()).unwrap();
        assert!((sol.value_at(1.0)[0] - 2.0).abs() < 1e-12);
        assert_eq!(sol.value_at(0.25)[0], 1.0);
        assert!(sol.max_residual() <= sol.residual_tolerance());
    }

    #[test]
    fn exponential_growth() {
        let gamma = direction("eval", 1).unwrap();
        let sol = solve_flow(&ones(), 0.0, &gamma, 1.0, &FlowConfig::default().with_substep(1e-4)).unwrap();
        let err = (sol.value_at(1.0)[0] - std::f64::consts::E).abs();
        assert!(err < 1e-6, "error {err}");
        assert_eq!(sol.windows, 2);
        assert!(sol.max_residual() <= sol.residual_tolerance());
    }

    #[test]
    fn zero_direction_is_stopping() {
        let x = GridPath::from_fn(uniform_grid(32, 1.0), 1, InterpMode::Linear, |s| vec![s * s]).unwrap();
        let stopped = x.stop(0.3).unwrap();
        let sol = solve_flow(&x, 0.3, &DirectionField::zero(1), 1.0, &FlowConfig::default()).unwrap();
        assert_eq!(sol.path.sup_distance(&stopped).unwrap(), 0.0);
        let eu = euler_flow(&x, 0.3, &DirectionField::zero(1), 1.0, 0.01).unwrap();
        assert_eq!(eu.path.sup_distance(&stopped).unwrap(), 0.0);
    }

    #[test]
    fn prefix_is_untouched() {
        let x = GridPath::from_fn(uniform_grid(16, 1.0), 1, InterpMode::Linear, |s| vec![s.sin()]).unwrap();
        let sol = solve_flow(&x, 0.5, &direction("eval", 1).unwrap(), 0.9, &FlowConfig::default()).unwrap();
        for &t in x.times().iter().filter(|&&t| t <= 0.5) {
            assert_eq!(sol.path.eval_comp(t, 0), x.eval_comp(t, 0));
        }
    }

    #[test]
    fn running_average_against_fine_euler() {
        // independent oracle: Euler at Δ = 1e-6 with an incrementally updated integral
        let n = 500_000;
        let dt = 0.5 / n as f64;
        let (mut y, mut int) = (1.0f64, 0.0f64);
        for i in 0..n {
            let t = i as f64 * dt;
            let avg = if i == 0 { y } else { int / t };
            let next = y + dt * avg;
            int += dt * 0.5 * (y + next);
            y = next;
        }
        let gamma = direction("running_avg", 1).unwrap();
        let sol = solve_flow(&ones(), 0.0, &gamma, 0.5, &FlowConfig::default()).unwrap();
        let got = sol.value_at(0.5)[0];
        assert!((got - y).abs() < 1e-5, "{got} vs {y}");
        // not the exponential
        assert!((got - 0.5f64.exp()).abs() > 1e-2);
    }

    #[test]
    fn euler_examples() {
        let eu = euler_flow(&ones(), 0.25, &DirectionField::constant(vec![-3.0]), 1.0, 0.1).unwrap();
        assert!((eu.value_at(1.0)[0] - (1.0 - 3.0 * 0.75)).abs() < 1e-12);
        assert!(eu.max_residual() < 1e-12);

        let gamma = direction("eval", 1).unwrap();
        let eu = euler_flow(&ones(), 0.0, &gamma, 1.0, 1e-3).unwrap();
        let pi = solve_flow(&ones(), 0.0, &gamma, 1.0, &FlowConfig::default().with_substep(1e-3)).unwrap();
        for t in uniform_grid(10, 1.0) {
            assert!((eu.value_at(t)[0] - pi.value_at(t)[0]).abs() < 5e-3);
        }
    }

    #[test]
    fn initial_guess_does_not_matter() {
        let x = GridPath::from_fn(uniform_grid(64, 1.0), 1, InterpMode::Linear, |s| vec![(3.0 * s).cos()]).unwrap();
        let gamma = direction("running_max", 1).unwrap();
        let cfg = FlowConfig::default();
        let a = solve_flow(&x, 0.2, &gamma, 1.0, &cfg).unwrap();
        let b = solve_flow(&x, 0.2, &gamma, 1.0, &cfg.clone().with_init(PicardInit::Euler)).unwrap();
        assert!(a.path.sup_distance(&b.path).unwrap() <= 10.0 * cfg.picard_tol * 3.0);
    }

    fn log_slope(errors: &[f64]) -> f64 {
        let n = errors.len() as f64;
        let xs: Vec<f64> = (0..errors.len()).map(|i| -(i as f64) * 2f64.ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        cov / var
    }

    #[test]
    fn refinement_rates() {
        let gamma = direction("eval", 1).unwrap();
        let steps = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
        let e = std::f64::consts::E;
        let euler: Vec<f64> = steps
            .iter()
            .map(|&h| (euler_flow(&ones(), 0.0, &gamma, 1.0, h).unwrap().value_at(1.0)[0] - e).abs())
            .collect();
        let slope = log_slope(&euler);
        assert!((0.8..=1.2).contains(&slope), "euler slope {slope}");

        let picard: Vec<f64> = steps
            .iter()
            .map(|&h| {
                let cfg = FlowConfig::default().with_substep(h).with_tol(1e-14);
                (solve_flow(&ones(), 0.0, &gamma, 1.0, &cfg).unwrap().value_at(1.0)[0] - e).abs()
            })
            .collect();
        assert!(log_slope(&picard) >= 1.0);
    }

    #[test]
    fn semigroup() {
        let x = GridPath::from_fn(uniform_grid(20, 1.0), 1, InterpMode::Linear, |s| vec![1.0 + s]).unwrap();
        let gamma = direction("running_avg", 1).unwrap();
        let cfg = FlowConfig::default().with_substep(1e-3);
        let direct = solve_flow(&x, 0.2, &gamma, 1.0, &cfg).unwrap();
        let half = solve_flow(&x, 0.2, &gamma, 0.6, &cfg).unwrap();
        let rest = solve_flow(&half.path, 0.6, &gamma, 1.0, &cfg).unwrap();
        assert!((direct.value_at(1.0)[0] - rest.value_at(1.0)[0]).abs() < 1e-6);
    }

    #[test]
    fn degenerate_and_errors() {
        let x = ones();
        let sol = solve_flow(&x, 0.4, &direction("eval", 1).unwrap(), 0.4, &FlowConfig::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.path.sup_distance(&x.stop(0.4).unwrap()).unwrap(), 0.0);

        let gamma = direction("eval", 1).unwrap();
        let too_coarse = FlowConfig::default().with_substep(0.6);
        assert!(matches!(solve_flow(&x, 0.0, &gamma, 1.0, &too_coarse), Err(Error::Config(_))));
        assert!(solve_flow(&x, 0.6, &gamma, 0.5, &FlowConfig::default()).is_err());
        assert!(solve_flow(&x, 0.0, &DirectionField::zero(2), 0.5, &FlowConfig::default()).is_err());

        let starved = FlowConfig { max_iters: 1, ..FlowConfig::default() };
        match solve_flow(&x, 0.0, &gamma, 0.4, &starved) {
            Err(Error::PicardNonConvergence { last_iterate, iterations, .. }) => {
                assert_eq!(iterations, 1);
                assert!(last_iterate.eval_comp(0.4, 0) > 1.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
