//! Càdlàg paths on a time grid and the exact pathwise primitives built on them:
//! stopping, vertical bumps, concatenation and the stopped-path distance.
//!
//! A [`GridPath`] is piecewise linear between grid times with jumps allowed only
//! at grid times. Each grid time `τ_i` carries the value `x(τ_i)` and the left
//! limit `x(τ_i−)`; on `[τ_i, τ_{i+1})` the path moves linearly from `x(τ_i)`
//! towards `x(τ_{i+1}−)`. A hold (step) path is the special case where every left
//! limit equals the previous value, so the same evaluation and quadrature rules
//! serve both interpolation modes exactly.

use std::ops::Deref;

use crate::error::{Error, Result};

/// Declared interpolation mode of a path built from samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterpMode {
    /// Right-continuous step path: `x(s) = x(τ_i)` on `[τ_i, τ_{i+1})`.
    CadlagHold,
    /// Linear interpolation between grid samples (continuous unless jumps are inserted).
    Linear,
}

impl InterpMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InterpMode::CadlagHold => "cadlag_hold",
            InterpMode::Linear => "linear",
        }
    }
}

impl std::str::FromStr for InterpMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cadlag_hold" | "hold" => Ok(InterpMode::CadlagHold),
            "linear" => Ok(InterpMode::Linear),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

/// Storage of left limits; only paths with jumps inside a linear segment pay for
/// an explicit copy.
#[derive(Debug, Clone, PartialEq)]
enum LeftLimits {
    /// `x(τ_i−) = x(τ_i)`.
    Continuous,
    /// `x(τ_i−) = x(τ_{i−1})`.
    Hold,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    times: Vec<f64>,
    values: Vec<f64>,
    left: LeftLimits,
    dim: usize,
    mode: InterpMode,
}

/// Uniform grid `0, T/n, ..., T` (exact dyadic times when `n` is a power of two and `T = 1`).
pub fn uniform_grid(n: usize, horizon: f64) -> Vec<f64> {
    (0..=n).map(|i| (i as f64 / n as f64) * horizon).collect()
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidPath("a path needs at least two grid times".into()));
    }
    if times[0] != 0.0 {
        return Err(Error::InvalidPath(format!("first grid time must be 0, got {}", times[0])));
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(Error::InvalidPath(format!(
                "grid times must be finite and strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

impl GridPath {
    /// Builds a path from flattened row-major values (`times.len() * dim` entries).
    pub fn from_flat(times: Vec<f64>, values: Vec<f64>, dim: usize, mode: InterpMode) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPath("dimension must be positive".into()));
        }
        validate_times(&times)?;
        if values.len() != times.len() * dim {
            return Err(Error::InvalidPath(format!(
                "{} values do not match {} times of dimension {}",
                values.len(),
                times.len(),
                dim
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("path values must be finite".into()));
        }
        let left = match mode {
            InterpMode::CadlagHold => LeftLimits::Hold,
            InterpMode::Linear => LeftLimits::Continuous,
        };
        Ok(GridPath { times, values, left, dim, mode })
    }

    pub fn from_rows(times: Vec<f64>, rows: &[Vec<f64>], mode: InterpMode) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        GridPath::from_flat(times, rows.concat(), dim, mode)
    }

    /// One-dimensional path from scalar samples.
    pub fn scalar(times: Vec<f64>, values: Vec<f64>, mode: InterpMode) -> Result<Self> {
        GridPath::from_flat(times, values, 1, mode)
    }

    /// Samples `f` on the given grid.
    pub fn from_fn(times: Vec<f64>, dim: usize, mode: InterpMode, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(times.len() * dim);
        for &t in &times {
            let v = f(t);
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            values.extend_from_slice(&v);
        }
        GridPath::from_flat(times, values, dim, mode)
    }

    /// Constant path on `[0, T]`.
    pub fn constant(value: &[f64], horizon: f64, mode: InterpMode) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidPath(format!("horizon must be positive, got {horizon}")));
        }
        GridPath::from_flat(vec![0.0, horizon], [value, value].concat(), value.len(), mode)
    }

    /// Raw constructor for paths whose left limits are given explicitly.
    pub(crate) fn with_left_limits(
        times: Vec<f64>,
        values: Vec<f64>,
        left: Vec<f64>,
        dim: usize,
        mode: InterpMode,
    ) -> Self {
        debug_assert_eq!(values.len(), left.len());
        debug_assert_eq!(values.len(), times.len() * dim);
        GridPath { times, values, left: LeftLimits::Explicit(left), dim, mode }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty grid")
    }

    pub fn mode(&self) -> InterpMode {
        self.mode
    }

    /// Value `x(τ_i)` at grid index `i`.
    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value_comp(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.dim + k]
    }

    /// Left limit `x(τ_i−)` at grid index `i` (equal to `x(0)` at `i = 0`).
    pub fn left_comp(&self, i: usize, k: usize) -> f64 {
        match &self.left {
            LeftLimits::Continuous => self.values[i * self.dim + k],
            LeftLimits::Hold if i == 0 => self.values[k],
            LeftLimits::Hold => self.values[(i - 1) * self.dim + k],
            LeftLimits::Explicit(l) => l[i * self.dim + k],
        }
    }

    pub fn left_value(&self, i: usize) -> Vec<f64> {
        (0..self.dim).map(|k| self.left_comp(i, k)).collect()
    }

    /// Flattened values, row-major by grid time.
    pub fn flat_values(&self) -> &[f64] {
        &self.values
    }

    /// Index `i` with `τ_i ≤ t < τ_{i+1}` (the last index when `t ≥ T`).
    pub fn locate(&self, t: f64) -> usize {
        self.times.partition_point(|&tau| tau <= t).saturating_sub(1)
    }

    /// Exact grid index of `t`, if `t` is a grid time.
    pub fn grid_index(&self, t: f64) -> Option<usize> {
        let i = self.locate(t);
        (self.times[i] == t).then_some(i)
    }

    pub fn eval_comp(&self, t: f64, k: usize) -> f64 {
        let i = self.locate(t);
        let v = self.value_comp(i, k);
        if t <= self.times[i] || i + 1 == self.times.len() {
            return v;
        }
        let frac = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        v + frac * (self.left_comp(i + 1, k) - v)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        (0..self.dim).map(|k| self.eval_comp(t, k)).collect()
    }

    /// Left limit `x(t−)`; equals `x(t)` away from grid jumps.
    pub fn left_limit_comp(&self, t: f64, k: usize) -> f64 {
        match self.grid_index(t) {
            Some(0) => self.value_comp(0, k),
            Some(i) => self.left_comp(i, k),
            None => self.eval_comp(t, k),
        }
    }

    pub fn left_limit(&self, t: f64) -> Vec<f64> {
        (0..self.dim).map(|k| self.left_limit_comp(t, k)).collect()
    }

    /// `∫_0^t x_k(s) ds`, exact for the piecewise-linear semantics (a left-rectangle
    /// sum on hold paths). Only values on `[0, t)` enter, so a jump at `t` does not.
    pub fn integral_comp(&self, t: f64, k: usize) -> f64 {
        let last = self.locate(t);
        let mut acc = 0.0;
        for i in 0..last {
            let dt = self.times[i + 1] - self.times[i];
            acc += dt * (self.value_comp(i, k) + self.left_comp(i + 1, k)) * 0.5;
        }
        if t > self.times[last] && last + 1 < self.times.len() {
            let dt = t - self.times[last];
            acc += dt * (self.value_comp(last, k) + self.eval_comp(t, k)) * 0.5;
        }
        acc
    }

    /// `max_{s ≤ t} x_k(s)`.
    pub fn running_max_comp(&self, t: f64, k: usize) -> f64 {
        let last = self.locate(t);
        let mut m = self.value_comp(0, k);
        for i in 1..=last {
            m = m.max(self.left_comp(i, k)).max(self.value_comp(i, k));
        }
        m.max(self.eval_comp(t, k))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(Error::domain(format!("time {t} outside [0, {}]", self.horizon())));
        }
        Ok(())
    }

    /// The stopped path `x_{∧t}`. The result's grid contains `t` exactly.
    pub fn stop(&self, t: f64) -> Result<StoppedPath> {
        self.check_time(t)?;
        let d = self.dim;
        let horizon = self.horizon();
        let keep = self.times.partition_point(|&tau| tau < t);
        let mut times = Vec::with_capacity(keep + 2);
        times.extend_from_slice(&self.times[..keep]);
        let at_t = self.eval(t);
        let left_t = self.left_limit(t);

        let path = match self.left {
            // Stopping preserves the compact left-limit representations.
            LeftLimits::Hold | LeftLimits::Continuous => {
                let mut values = self.values[..keep * d].to_vec();
                times.push(t);
                values.extend_from_slice(&at_t);
                if t < horizon {
                    times.push(horizon);
                    values.extend_from_slice(&at_t);
                }
                GridPath { times, values, left: self.left.clone(), dim: d, mode: self.mode }
            }
            LeftLimits::Explicit(ref l) => {
                let mut values = self.values[..keep * d].to_vec();
                let mut left = l[..keep * d].to_vec();
                times.push(t);
                values.extend_from_slice(&at_t);
                left.extend_from_slice(if keep == 0 { &at_t } else { &left_t });
                if t < horizon {
                    times.push(horizon);
                    values.extend_from_slice(&at_t);
                    left.extend_from_slice(&at_t);
                }
                GridPath::with_left_limits(times, values, left, d, self.mode)
            }
        };
        Ok(StoppedPath { path, stop_time: t })
    }

    /// Converts to explicit left-limit storage.
    fn explicit_left(&self) -> Vec<f64> {
        match &self.left {
            LeftLimits::Explicit(l) => l.clone(),
            _ => (0..self.times.len()).flat_map(|i| (0..self.dim).map(move |k| (i, k))).map(|(i, k)| self.left_comp(i, k)).collect(),
        }
    }

    /// Whether the path has no jumps (every left limit equals the value).
    pub fn is_continuous(&self) -> bool {
        match &self.left {
            LeftLimits::Continuous => true,
            LeftLimits::Hold => (1..self.len()).all(|i| self.value(i) == self.value(i - 1)),
            LeftLimits::Explicit(l) => l == &self.values,
        }
    }

    /// Restriction of `self` to `[0, s)` followed by `b(· − s)` on `[s, T]`, where `T`
    /// is the horizon of `self`. A jump at `s` is permitted.
    pub fn concat(&self, s: f64, b: &GridPath) -> Result<GridPath> {
        self.check_time(s)?;
        if b.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: b.dim });
        }
        let horizon = self.horizon();
        let tail_len = horizon - s;
        // Allow the usual rounding slack when b was built on [0, T - s].
        if b.horizon() < tail_len * (1.0 - 1e-12) {
            return Err(Error::domain(format!(
                "second path covers [0, {}] but [0, {}] is needed",
                b.horizon(),
                tail_len
            )));
        }
        let d = self.dim;
        let keep = self.times.partition_point(|&tau| tau < s);
        let mut times = self.times[..keep].to_vec();
        let mut values = self.values[..keep * d].to_vec();
        let mut left = self.explicit_left();
        left.truncate(keep * d);

        let left_at_s = if keep == 0 { b.value(0).to_vec() } else { self.left_limit(s) };
        times.push(s);
        values.extend_from_slice(b.value(0));
        left.extend_from_slice(&left_at_s);

        for j in 1..b.len() {
            let u = b.times[j];
            let t = s + u;
            if u >= tail_len || t >= horizon {
                break;
            }
            if t <= *times.last().unwrap() {
                continue;
            }
            times.push(t);
            values.extend((0..d).map(|k| b.value_comp(j, k)));
            left.extend((0..d).map(|k| b.left_comp(j, k)));
        }
        if s < horizon {
            times.push(horizon);
            values.extend(b.eval(tail_len));
            left.extend(b.left_limit(tail_len));
        }
        Ok(GridPath::with_left_limits(times, values, left, d, self.mode))
    }

    /// Sup over `[0, T]` of the Euclidean distance `|x(u) − y(u)|`, taken exactly on
    /// the union grid (values and left limits bound every linear segment).
    pub fn sup_distance(&self, other: &GridPath) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut grid: Vec<f64> = self.times.iter().chain(other.times.iter()).copied().collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let norm = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let mut sup = 0.0f64;
        for &u in &grid {
            sup = sup.max(norm(&self.eval(u), &other.eval(u)));
            sup = sup.max(norm(&self.left_limit(u), &other.left_limit(u)));
        }
        Ok(sup)
    }

    /// Overwrites the value at grid index `i` (flows and simulations fill their
    /// extension segment in place).
    pub(crate) fn set_value(&mut self, i: usize, v: &[f64]) {
        let d = self.dim;
        self.values[i * d..(i + 1) * d].copy_from_slice(v);
    }

    /// The same path on a longer horizon, held constant after the old one.
    pub fn extend_to(&self, horizon: f64) -> GridPath {
        if horizon <= self.horizon() {
            return self.clone();
        }
        let last = self.value(self.len() - 1).to_vec();
        let mut times = self.times.clone();
        let mut values = self.values.clone();
        let mut left = self.explicit_left();
        times.push(horizon);
        values.extend_from_slice(&last);
        left.extend_from_slice(&last);
        GridPath::with_left_limits(times, values, left, self.dim, self.mode)
    }

    /// Overwrites value and left limit at `i`, keeping the path continuous there.
    pub(crate) fn set_node(&mut self, i: usize, v: &[f64]) {
        let d = self.dim;
        self.values[i * d..(i + 1) * d].copy_from_slice(v);
        if let LeftLimits::Explicit(l) = &mut self.left {
            l[i * d..(i + 1) * d].copy_from_slice(v);
        }
    }
}

/// The path `x_{∧t}`: equal to `x` before `t`, frozen at `x(t)` afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppedPath {
    path: GridPath,
    stop_time: f64,
}

impl StoppedPath {
    pub fn stop_time(&self) -> f64 {
        self.stop_time
    }

    pub fn path(&self) -> &GridPath {
        &self.path
    }

    pub fn into_path(self) -> GridPath {
        self.path
    }

    /// Stopping again never moves past the original stop time.
    pub fn stop(&self, t: f64) -> Result<StoppedPath> {
        self.path.stop(t.min(self.stop_time))
    }

    /// The vertical perturbation `x^h_{∧t}`: `h` is added to the value at the stop
    /// time and after; everything before the stop time is untouched.
    pub fn bump(&self, h: &[f64]) -> Result<BumpedPath> {
        let p = &self.path;
        if h.len() != p.dim {
            return Err(Error::DimensionMismatch { expected: p.dim, got: h.len() });
        }
        let d = p.dim;
        let first = p.times.partition_point(|&tau| tau < self.stop_time);
        let mut values = p.values.clone();
        let mut left = p.explicit_left();
        for i in first..p.len() {
            for k in 0..d {
                values[i * d + k] += h[k];
                if i > first {
                    left[i * d + k] += h[k];
                }
            }
        }
        if first == 0 {
            // A bump at time 0 moves the initial value itself.
            left[..d].copy_from_slice(&values[..d]);
        }
        let path = GridPath::with_left_limits(p.times.clone(), values, left, d, p.mode);
        Ok(BumpedPath { path, stop_time: self.stop_time, bump: h.to_vec() })
    }
}

impl Deref for StoppedPath {
    type Target = GridPath;

    fn deref(&self) -> &GridPath {
        &self.path
    }
}

impl AsRef<GridPath> for StoppedPath {
    fn as_ref(&self) -> &GridPath {
        &self.path
    }
}

/// A stopped path with a vertical bump `h` applied from its stop time onwards.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpedPath {
    path: GridPath,
    stop_time: f64,
    bump: Vec<f64>,
}

impl BumpedPath {
    pub fn stop_time(&self) -> f64 {
        self.stop_time
    }

    pub fn bump(&self) -> &[f64] {
        &self.bump
    }

    pub fn path(&self) -> &GridPath {
        &self.path
    }

    pub fn into_path(self) -> GridPath {
        self.path
    }
}

impl Deref for BumpedPath {
    type Target = GridPath;

    fn deref(&self) -> &GridPath {
        &self.path
    }
}

impl AsRef<GridPath> for BumpedPath {
    fn as_ref(&self) -> &GridPath {
        &self.path
    }
}

pub fn stop(x: &GridPath, t: f64) -> Result<StoppedPath> {
    x.stop(t)
}

pub fn bump(x: &StoppedPath, h: &[f64]) -> Result<BumpedPath> {
    x.bump(h)
}

pub fn concat(a: &GridPath, s: f64, b: &GridPath) -> Result<GridPath> {
    a.concat(s, b)
}

/// `d_*((t, x), (s, y)) = |t − s| + sup_u |x_{∧t}(u) − y_{∧s}(u)|`, with the uniform
/// metric standing in for `d_D`.
pub fn dist_stopped(x: &GridPath, t: f64, y: &GridPath, s: f64) -> Result<f64> {
    let xs = x.stop(t)?;
    let ys = y.stop(s)?;
    Ok((t - s).abs() + xs.sup_distance(&ys)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> GridPath {
        GridPath::from_fn(uniform_grid(n, 1.0), 1, InterpMode::Linear, |s| vec![s]).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridPath::scalar(vec![0.0], vec![1.0], InterpMode::Linear).is_err());
        assert!(GridPath::scalar(vec![0.1, 1.0], vec![1.0, 1.0], InterpMode::Linear).is_err());
        assert!(GridPath::scalar(vec![0.0, 0.5, 0.5], vec![1.0; 3], InterpMode::Linear).is_err());
        assert!(GridPath::scalar(vec![0.0, 1.0], vec![1.0], InterpMode::Linear).is_err());
        assert!(GridPath::scalar(vec![0.0, 1.0], vec![1.0, f64::NAN], InterpMode::Linear).is_err());
    }

    #[test]
    fn hold_is_right_continuous() {
        let x = GridPath::scalar(vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 3.0], InterpMode::CadlagHold).unwrap();
        assert_eq!(x.eval_comp(0.4999, 0), 1.0);
        assert_eq!(x.eval_comp(0.5, 0), 2.0);
        assert_eq!(x.left_limit_comp(0.5, 0), 1.0);
        assert_eq!(x.eval_comp(1.0, 0), 3.0);
        // left rectangle
        assert_eq!(x.integral_comp(1.0, 0), 1.5);
    }

    #[test]
    fn stop_examples() {
        let x = ramp(8);
        let s = x.stop(0.5).unwrap();
        assert_eq!(s.eval_comp(0.25, 0), 0.25);
        assert_eq!(s.eval_comp(0.75, 0), 0.5);
        assert!(s.grid_index(0.5).is_some());

        let full = x.stop(1.0).unwrap();
        for &t in x.times() {
            assert_eq!(full.eval_comp(t, 0), x.eval_comp(t, 0));
        }

        let zero = x.stop(0.0).unwrap();
        assert_eq!(zero.eval_comp(0.3, 0), 0.0);
        assert_eq!(zero.eval_comp(1.0, 0), 0.0);

        assert!(x.stop(1.5).is_err());
        assert!(x.stop(-0.1).is_err());
    }

    #[test]
    fn stop_off_grid_inserts_time() {
        let x = ramp(4);
        let s = x.stop(0.3).unwrap();
        assert_eq!(s.grid_index(0.3), Some(2));
        assert!((s.eval_comp(0.9, 0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bump_examples() {
        let zero = GridPath::constant(&[0.0], 1.0, InterpMode::Linear).unwrap();
        let b = zero.stop(0.5).unwrap().bump(&[1.0]).unwrap();
        assert_eq!(b.eval_comp(0.25, 0), 0.0);
        assert_eq!(b.eval_comp(0.5, 0), 1.0);
        assert_eq!(b.eval_comp(0.9, 0), 1.0);
        assert_eq!(b.left_limit_comp(0.5, 0), 0.0);

        let x = ramp(8).stop(0.5).unwrap();
        let same = x.bump(&[0.0]).unwrap();
        assert_eq!(same.sup_distance(&x).unwrap(), 0.0);

        let two = GridPath::constant(&[2.0, 2.0], 1.0, InterpMode::CadlagHold).unwrap();
        let b2 = two.stop(0.3).unwrap().bump(&[1.0, -1.0]).unwrap();
        assert_eq!(b2.eval(0.3), vec![3.0, 1.0]);
        assert_eq!(b2.eval(1.0), vec![3.0, 1.0]);
        assert_eq!(b2.eval(0.1), vec![2.0, 2.0]);

        assert!(x.bump(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn bump_leaves_integral_unchanged() {
        let x = ramp(16).stop(0.5).unwrap();
        let b = x.bump(&[3.0]).unwrap();
        assert_eq!(b.integral_comp(0.5, 0), x.integral_comp(0.5, 0));
        assert_eq!(x.integral_comp(0.5, 0), 0.125);
    }

    #[test]
    fn concat_examples() {
        let a = GridPath::constant(&[1.0], 1.0, InterpMode::CadlagHold).unwrap();
        let b = GridPath::constant(&[2.0], 1.0, InterpMode::CadlagHold).unwrap();
        let c = a.concat(0.5, &b).unwrap();
        assert_eq!(c.eval_comp(0.49, 0), 1.0);
        assert_eq!(c.eval_comp(0.5, 0), 2.0);
        assert_eq!(c.left_limit_comp(0.5, 0), 1.0);
        assert_eq!(c.eval_comp(1.0, 0), 2.0);

        // constant continuation at a(s) reproduces stopping
        let x = ramp(8);
        let hold = GridPath::constant(&[0.5], 0.5, InterpMode::Linear).unwrap();
        let joined = x.concat(0.5, &hold).unwrap();
        assert_eq!(joined.sup_distance(&x.stop(0.5).unwrap()).unwrap(), 0.0);

        // s = 0 gives b itself
        let shifted = a.concat(0.0, &b).unwrap();
        assert_eq!(shifted.sup_distance(&b).unwrap(), 0.0);

        assert!(a.concat(1.5, &b).is_err());
    }

    #[test]
    fn dist_examples() {
        let x = ramp(8);
        let zero = GridPath::constant(&[0.0], 1.0, InterpMode::Linear).unwrap();
        let one = GridPath::constant(&[1.0], 1.0, InterpMode::Linear).unwrap();
        assert_eq!(dist_stopped(&x, 0.3, &x, 0.3).unwrap(), 0.0);
        assert_eq!(dist_stopped(&zero, 1.0, &one, 1.0).unwrap(), 1.0);
        assert_eq!(dist_stopped(&x, 1.0, &zero, 1.0).unwrap(), 1.0);
        assert_eq!(dist_stopped(&x, 0.5, &x, 0.25).unwrap(), 0.25 + 0.25);
    }

    #[test]
    fn running_max_sees_jumps() {
        let x = GridPath::scalar(vec![0.0, 0.5, 1.0], vec![0.0, 2.0, 1.0], InterpMode::CadlagHold).unwrap();
        assert_eq!(x.running_max_comp(0.4, 0), 0.0);
        assert_eq!(x.running_max_comp(0.7, 0), 2.0);
        assert_eq!(x.running_max_comp(1.0, 0), 2.0);
    }
}
