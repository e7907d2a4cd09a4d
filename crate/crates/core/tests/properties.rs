use proptest::prelude::*;

use pathcalc::deriv::{d_gamma, LadderConfig};
use pathcalc::flow::{solve_flow, FlowConfig};
use pathcalc::functional::{builtin, DirectionField, VectorFunctional};
use pathcalc::ito::{ito_residual_terms, partition_sums, quadratic_covariation, PartitionSequence};
use pathcalc::path::{dist_stopped, uniform_grid};
use pathcalc::{GridPath, InterpMode};

fn mode() -> impl Strategy<Value = InterpMode> {
    prop_oneof![Just(InterpMode::Linear), Just(InterpMode::CadlagHold)]
}

/// Paths on `[0, 1]` with uniform cells and values in `[-2, 2]`.
fn path(dim: usize) -> impl Strategy<Value = GridPath> {
    (2usize..40, mode()).prop_flat_map(move |(n, m)| {
        prop::collection::vec(-2.0f64..2.0, (n + 1) * dim)
            .prop_map(move |v| GridPath::from_flat(uniform_grid(n, 1.0), v, dim, m).unwrap())
    })
}

fn probes() -> Vec<f64> {
    (0..=64).map(|i| i as f64 / 64.0).collect()
}

/// Off-grid evaluations interpolate across cells that stopping may shorten, so
/// they agree only up to rounding.
fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(u, v)| (u - v).abs() <= 1e-13 * u.abs().max(1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn stopping_twice_stops_at_the_earlier_time(x in path(2), s in 0.0f64..=1.0, t in 0.0f64..=1.0) {
        let once = x.stop(s.min(t)).unwrap();
        let twice = x.stop(t).unwrap().stop(s).unwrap();
        for &u in x.times().iter().filter(|&&u| u <= s.min(t)) {
            prop_assert_eq!(once.eval(u), twice.eval(u));
        }
        for u in probes() {
            prop_assert!(close(&once.eval(u), &twice.eval(u)), "u = {}", u);
        }
    }

    #[test]
    fn stopped_path_is_frozen(x in path(1), t in 0.0f64..=1.0) {
        let xs = x.stop(t).unwrap();
        let v = x.eval_comp(t, 0);
        for u in probes() {
            let expected = if u <= t { x.eval_comp(u, 0) } else { v };
            prop_assert!(close(&[xs.eval_comp(u, 0)], &[expected]), "u = {}", u);
        }
        for &u in x.times().iter().filter(|&&u| u <= t) {
            prop_assert_eq!(xs.eval_comp(u, 0), x.eval_comp(u, 0));
        }
    }

    #[test]
    fn distance_is_a_pseudometric(
        x in path(1), y in path(1), z in path(1),
        t in 0.0f64..=1.0, s in 0.0f64..=1.0, r in 0.0f64..=1.0,
    ) {
        let xy = dist_stopped(&x, t, &y, s).unwrap();
        prop_assert_eq!(xy, dist_stopped(&y, s, &x, t).unwrap());
        prop_assert_eq!(dist_stopped(&x, t, &x, t).unwrap(), 0.0);
        let via = dist_stopped(&x, t, &z, r).unwrap() + dist_stopped(&z, r, &y, s).unwrap();
        prop_assert!(xy <= via * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn bump_shifts_the_present_but_not_the_integral(x in path(1), t in 0.01f64..=1.0, h in -1.0f64..1.0) {
        let xs = x.stop(t).unwrap();
        let b = xs.bump(&[h]).unwrap();
        let bumped = b.path();
        prop_assert!((bumped.eval_comp(t, 0) - (xs.eval_comp(t, 0) + h)).abs() <= 1e-12);
        prop_assert_eq!(bumped.integral_comp(t, 0), xs.integral_comp(t, 0));
        for &u in x.times().iter().filter(|&&u| u < t) {
            prop_assert_eq!(bumped.eval_comp(u, 0), xs.eval_comp(u, 0));
        }
    }

    #[test]
    fn concatenation_keeps_the_past(x in path(1), s in 0.0f64..0.95, c in -1.0f64..1.0) {
        let len = 1.0 - s;
        let tail = GridPath::from_fn(uniform_grid(8, len), 1, InterpMode::Linear, |u| vec![x.eval_comp(s, 0) + c * u]).unwrap();
        let y = x.concat(s, &tail).unwrap();
        for u in probes() {
            if u <= s {
                prop_assert!(close(&[y.eval_comp(u, 0)], &[x.eval_comp(u, 0)]), "u = {}", u);
            } else {
                let expected = x.eval_comp(s, 0) + c * (u - s);
                prop_assert!((y.eval_comp(u, 0) - expected).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_direction_is_the_stop(x in path(2), s in 0.0f64..=1.0) {
        let y = solve_flow(&x, s, &DirectionField::zero(2), 1.0, &FlowConfig::default()).unwrap().path;
        let xs = x.stop(s).unwrap();
        for u in y.times().iter().copied().chain(probes()) {
            prop_assert_eq!(y.eval(u), xs.eval(u));
        }
    }

    #[test]
    fn constant_direction_translates(x in path(1), s in 0.0f64..0.9, c in -3.0f64..3.0) {
        let y = solve_flow(&x, s, &DirectionField::constant(vec![c]), 1.0, &FlowConfig::default()).unwrap().path;
        let xs = x.eval_comp(s, 0);
        for u in probes().into_iter().filter(|&u| u >= s) {
            prop_assert!((y.eval_comp(u, 0) - (xs + c * (u - s))).abs() <= 1e-12);
        }
    }

    #[test]
    fn linear_functional_has_exact_directional_derivative(x in path(1), t in 0.05f64..0.9, c in -2.0f64..2.0) {
        // F(t, x) = t + x(t) so D^γF = 1 + c along a constant direction c
        let f = builtin("t_plus_eval").unwrap();
        let r = d_gamma(&f.base, &DirectionField::constant(vec![c]), t, &x, &LadderConfig::default()).unwrap();
        prop_assert!(r.converged());
        prop_assert!((r.estimate - (1.0 + c)).abs() <= 1e-6, "{} vs {}", r.estimate, 1.0 + c);
    }

    #[test]
    fn quadratic_variation_is_monotone_and_scales(x in path(2), n in 0usize..5, c in -3.0f64..3.0) {
        let pi = PartitionSequence::dyadic(1.0);
        let fine = GridPath::from_fn(uniform_grid(64, 1.0), 2, x.mode(), |s| x.eval(s)).unwrap();
        let qv = quadratic_covariation(&fine, &pi, n).unwrap();
        for i in 1..qv.len() {
            prop_assert!(qv.entry(i, 0, 0) >= qv.entry(i - 1, 0, 0));
            prop_assert!(qv.entry(i, 1, 1) >= qv.entry(i - 1, 1, 1));
            prop_assert_eq!(qv.entry(i, 0, 1), qv.entry(i, 1, 0));
            let off = qv.entry(i, 0, 1).powi(2);
            prop_assert!(off <= qv.entry(i, 0, 0) * qv.entry(i, 1, 1) * (1.0 + 1e-12) + 1e-300);
        }
        let scaled = GridPath::from_fn(uniform_grid(64, 1.0), 2, x.mode(), |s| x.eval(s).iter().map(|v| c * v).collect()).unwrap();
        let q2 = quadratic_covariation(&scaled, &pi, n).unwrap();
        let (a, b) = (q2.terminal()[0], c * c * qv.terminal()[0]);
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn stratonovich_bridges_to_ito(x in path(1), n in 0usize..6) {
        let fine = GridPath::from_fn(uniform_grid(64, 1.0), 1, x.mode(), |s| x.eval(s)).unwrap();
        let g = VectorFunctional::new("sin", 1, |t, x| vec![x.eval_comp(t, 0).sin()]);
        let s = partition_sums(&g, &fine, &PartitionSequence::dyadic(1.0), n).unwrap();
        let scale = s.ito.abs().max(s.stratonovich.abs()).max(s.covariation.abs()).max(1.0);
        prop_assert!((s.stratonovich - s.ito - 0.5 * s.covariation).abs() <= 1e-14 * scale);
    }

    #[test]
    fn quadratic_functionals_telescope(x in path(2), keep in prop::collection::vec(any::<bool>(), 64)) {
        let fine = GridPath::from_fn(uniform_grid(64, 1.0), 2, x.mode(), |s| x.eval(s)).unwrap();
        let mut level = vec![0.0];
        level.extend(fine.times()[1..64].iter().zip(&keep).filter(|(_, k)| **k).map(|(t, _)| *t));
        level.push(1.0);
        let pi = PartitionSequence::custom(vec![level]).unwrap();
        for name in ["product", "norm_squared"] {
            let r = ito_residual_terms(&builtin(name).unwrap(), &fine, &pi, 0).unwrap();
            prop_assert!(r.relative() <= 1e-12, "{}: {:?}", name, r);
        }
    }
}
