//! Randomized necessary-condition probes: non-anticipativity, boundedness
//! preservation and the declared Lipschitz bound of a direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::functional::{DirectionField, Functional};
use crate::path::{GridPath, InterpMode};
use crate::rng::{random_box_path, random_walk_path};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub samples: usize,
    pub failures: usize,
    /// Largest observed discrepancy.
    pub worst: f64,
    /// Evaluation time of the first failing sample.
    pub first_failure: Option<f64>,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn random_mode<R: Rng>(rng: &mut R) -> InterpMode {
    if rng.random_bool(0.5) {
        InterpMode::Linear
    } else {
        InterpMode::CadlagHold
    }
}

/// Compares `F(t, x)` with `F(t, x_{∧t})` and with `F(t, x')` where `x'` agrees
/// with `x` on `[0, t]` and is redrawn on `(t, T]`. Any difference fails.
pub fn probe_non_anticipative(f: &Functional, dim: usize, horizon: f64, samples: usize, seed: u64) -> ProbeReport {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut report = ProbeReport { samples, failures: 0, worst: 0.0, first_failure: None };
    for _ in 0..samples {
        let n = rng.random_range(4..48);
        let mode = random_mode(&mut rng);
        let x = random_walk_path(&mut rng, n, dim, horizon, 0.5, mode);
        let t = if rng.random_bool(0.3) {
            x.times()[rng.random_range(0..x.len() - 1)]
        } else {
            rng.random_range(0.0..horizon)
        };
        let tail_len = horizon - t;
        let tail = if tail_len > 0.0 {
            let cells = rng.random_range(1..16);
            let tail_mode = random_mode(&mut rng);
            let mut b = random_walk_path(&mut rng, cells, dim, tail_len, 2.0, tail_mode);
            let start = x.eval(t);
            b.set_value(0, &start);
            b
        } else {
            GridPath::constant(&x.eval(t), horizon, mode).expect("valid constant")
        };
        let redrawn = x.concat(t, &tail).expect("valid graft");
        let stopped = x.stop(t).expect("t in range");

        let base = f.eval(t, &x);
        let diff = (f.eval(t, &redrawn) - base).abs().max((f.eval(t, &stopped) - base).abs());
        // NaN never compares equal, so it counts as a discrepancy too
        let differs = f.eval(t, &redrawn).to_bits() != base.to_bits() || f.eval(t, &stopped).to_bits() != base.to_bits();
        if differs {
            report.failures += 1;
            report.worst = report.worst.max(if diff.is_nan() { f64::INFINITY } else { diff });
            report.first_failure.get_or_insert(t);
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessReport {
    pub samples: usize,
    pub box_radius: f64,
    /// `max |F(s, x_{∧s})|` over all probed paths and times.
    pub max_abs: f64,
    /// The maximum close to the horizon compared with the maximum away from it.
    pub late_growth: f64,
    /// Non-finite values or blow-up towards the horizon were observed.
    pub flagged: bool,
}

/// Evaluates `|F(s, x_{∧s})|` on random paths confined to `[−r, r]^d`, at grid
/// times and at times accumulating at the horizon. A finite, stable maximum is
/// only a necessary condition for boundedness preservation.
pub fn probe_boundedness_preserving(
    f: &Functional,
    dim: usize,
    horizon: f64,
    box_radius: f64,
    samples: usize,
    seed: u64,
) -> BoundednessReport {
    assert!(box_radius > 0.0, "box radius must be positive");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let early_cut = horizon * (1.0 - 2f64.powi(-10));
    let mut early = 0.0f64;
    let mut late = 0.0f64;
    let mut non_finite = false;
    for _ in 0..samples {
        let n = rng.random_range(4..64);
        let mode = random_mode(&mut rng);
        let x = random_box_path(&mut rng, n, dim, horizon, box_radius, mode);
        let near_horizon = (1..=40).map(|j| horizon * (1.0 - 2f64.powi(-j)));
        for s in x.times().iter().copied().chain(near_horizon) {
            let v = f.eval(s, &x.stop(s).expect("s in range")).abs();
            if !v.is_finite() {
                non_finite = true;
                continue;
            }
            if s <= early_cut {
                early = early.max(v);
            } else {
                late = late.max(v);
            }
        }
    }
    let late_growth = if early > 0.0 { late / early } else if late > 0.0 { f64::INFINITY } else { 1.0 };
    BoundednessReport {
        samples,
        box_radius,
        max_abs: if non_finite { f64::INFINITY } else { early.max(late) },
        late_growth,
        flagged: non_finite || late_growth > 100.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub samples: usize,
    pub declared: f64,
    /// Largest observed `‖γ(t,x) − γ(t,y)‖₂ / ‖x_{∧t} − y_{∧t}‖_∞`.
    pub max_ratio: f64,
}

impl LipschitzReport {
    pub fn passed(&self) -> bool {
        self.max_ratio <= self.declared * (1.0 + 1e-9)
    }
}

/// Samples pairs of paths at a common time and checks the declared bound `K`.
pub fn probe_lipschitz(gamma: &DirectionField, horizon: f64, t_min: f64, samples: usize, seed: u64) -> LipschitzReport {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dim = gamma.dim();
    let mut max_ratio = 0.0f64;
    for _ in 0..samples {
        let n = rng.random_range(4..48);
        let mode = random_mode(&mut rng);
        let x = random_walk_path(&mut rng, n, dim, horizon, 0.5, mode);
        let y = random_walk_path(&mut rng, n, dim, horizon, 0.5, mode);
        let t = rng.random_range(t_min..horizon);
        let xs = x.stop(t).expect("t in range");
        let ys = y.stop(t).expect("t in range");
        let dist = xs.sup_distance(&ys).expect("same dimension");
        if dist == 0.0 {
            continue;
        }
        let gx = gamma.eval(t, &xs);
        let gy = gamma.eval(t, &ys);
        let diff = gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        max_ratio = max_ratio.max(diff / dist);
    }
    LipschitzReport { samples, declared: gamma.lipschitz(), max_ratio }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{builtin, direction, CATALOG};

    #[test]
    fn evaluation_passes_and_terminal_value_fails() {
        let eval = Functional::new("eval", |t, x| x.eval_comp(t, 0));
        assert!(probe_non_anticipative(&eval, 1, 1.0, 200, 1).passed());

        let terminal = Functional::new("terminal", |_, x| x.eval_comp(x.horizon(), 0));
        let r = probe_non_anticipative(&terminal, 1, 1.0, 200, 1);
        assert!(!r.passed());
        assert!(r.first_failure.is_some());

        let integral = builtin("integral").unwrap();
        assert!(probe_non_anticipative(&integral.base, 1, 1.0, 200, 2).passed());
    }

    #[test]
    fn catalog_is_non_anticipative() {
        for (name, dim) in CATALOG {
            let fd = builtin(name).unwrap();
            let r = probe_non_anticipative(&fd.base, *dim, 1.0, 1000, 11);
            assert!(r.passed(), "{name}: {r:?}");
        }
    }

    #[test]
    fn boundedness_examples() {
        let eval = Functional::new("eval", |t, x| x.eval_comp(t, 0));
        let r = probe_boundedness_preserving(&eval, 1, 1.0, 1.0, 100, 3);
        assert!(r.max_abs <= 1.0 && !r.flagged, "{r:?}");

        let blow_up = Functional::new("blow_up", |t, _| 1.0 / (1.0 - t));
        let r = probe_boundedness_preserving(&blow_up, 1, 1.0, 1.0, 10, 3);
        assert!(r.flagged, "{r:?}");
    }

    #[test]
    fn builtin_directions_respect_declared_lipschitz() {
        for name in ["eval", "running_avg", "running_max", "one"] {
            let g = direction(name, 2).unwrap();
            let r = probe_lipschitz(&g, 1.0, 0.0, 300, 5);
            assert!(r.passed(), "{name}: {r:?}");
        }
        for name in ["gamma_star", "constraint"] {
            let g = direction(name, 1).unwrap();
            let r = probe_lipschitz(&g, 1.0, 0.01, 300, 5);
            assert!(r.passed(), "{name}: {r:?}");
        }
    }

    #[test]
    fn overclaimed_lipschitz_is_caught() {
        let g = DirectionField::from_fn("steep", 1, 1.0, |t, x| vec![5.0 * x.eval_comp(t, 0)]).unwrap();
        assert!(!probe_lipschitz(&g, 1.0, 0.0, 200, 9).passed());
    }
}
