use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use pathcalc::deriv::{d_gamma, d_space, relation_residual, DerivativeSource, LadderConfig, SpaceQuotient, Verdict};
use pathcalc::fk::{benchmark, estimate_f};
use pathcalc::functional::{builtin, direction, DirectionField, CATALOG};
use pathcalc::ito::{quadratic_covariation, PartitionSequence};
use pathcalc::path::{dist_stopped, uniform_grid};
use pathcalc::pathology::{counterexample, standard_points, verify_regular_direction};
use pathcalc::rng::{brownian_path, random_walk_path};
use pathcalc::{GridPath, InterpMode};

fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

#[test]
fn stop_never_reads_the_future() {
    let mut r = rng(1);
    for _ in 0..500 {
        let n = r.random_range(2..50);
        let x = random_walk_path(&mut r, n, 2, 1.0, 1.0, InterpMode::Linear);
        let t = x.times()[r.random_range(0..=n)];
        let mut values = x.flat_values().to_vec();
        let keep = x.grid_index(t).unwrap();
        for v in values[(keep + 1) * 2..].iter_mut() {
            *v = r.random_range(-1e6..1e6);
        }
        let y = GridPath::from_flat(x.times().to_vec(), values, 2, InterpMode::Linear).unwrap();
        assert_eq!(x.stop(t).unwrap().path(), y.stop(t).unwrap().path());
        let b = x.stop(t).unwrap().bump(&[0.5, -0.5]).unwrap().into_path();
        let c = y.stop(t).unwrap().bump(&[0.5, -0.5]).unwrap().into_path();
        assert_eq!(b, c);
    }
}

#[test]
fn stopping_at_grid_times_is_exact() {
    let mut r = rng(2);
    for _ in 0..200 {
        let x = random_walk_path(&mut r, 32, 1, 1.0, 1.0, InterpMode::CadlagHold);
        let (t, s) = (x.times()[r.random_range(0..=32)], x.times()[r.random_range(0..=32)]);
        let twice = x.stop(t).unwrap().stop(s).unwrap();
        let once = x.stop(s.min(t)).unwrap();
        for u in (0..=256).map(|i| i as f64 / 256.0) {
            assert_eq!(twice.eval(u), once.eval(u));
        }
    }
}

#[test]
fn distance_on_shared_grids_is_exact() {
    let mut r = rng(3);
    for _ in 0..500 {
        let paths: Vec<GridPath> = (0..3).map(|_| random_walk_path(&mut r, 16, 1, 1.0, 1.0, InterpMode::Linear)).collect();
        let ts: Vec<f64> = (0..3).map(|_| paths[0].times()[r.random_range(0..=16)]).collect();
        let d = |i: usize, j: usize| dist_stopped(&paths[i], ts[i], &paths[j], ts[j]).unwrap();
        assert_eq!(d(0, 1), d(1, 0));
        assert!(d(0, 1) <= d(0, 2) + d(2, 1));
    }
}

#[test]
fn counterexample_is_bounded_by_three_sup() {
    let cx = counterexample();
    let mut r = rng(4);
    for _ in 0..1000 {
        let mode = if r.random_bool(0.5) { InterpMode::Linear } else { InterpMode::CadlagHold };
        let x = random_walk_path(&mut r, 64, 1, 1.0, 0.3, mode);
        let t = r.random_range(1e-3..1.0);
        let xs = x.stop(t).unwrap();
        let sup = (0..=1000).map(|i| xs.eval_comp(t * i as f64 / 1000.0, 0).abs()).fold(0.0, f64::max);
        let sup = x.times().iter().filter(|&&s| s <= t).map(|&s| x.eval_comp(s, 0).abs()).fold(sup, f64::max);
        assert!(cx.eval(t, &xs).abs() <= 3.0 * sup * (1.0 + 1e-12), "t = {t}");
    }
}

#[test]
fn coded_gradients_match_spatial_quotients_and_relation_holds() {
    let cfg = LadderConfig::default();
    let mut r = rng(5);
    for (name, dim) in CATALOG {
        let fd = builtin(name).unwrap();
        if fd.grad.is_none() || fd.partial_t.is_none() {
            continue;
        }
        let fields = ["one", "eval", "running_avg"];
        for _ in 0..100 {
            let x = random_walk_path(&mut r, 128, *dim, 1.0, 0.05, InterpMode::Linear);
            let t = r.random_range(0.05..0.9);
            let xs = x.stop(t).unwrap();
            let coded = fd.grad_at(t, &xs).unwrap();
            for (i, g) in coded.iter().enumerate() {
                let q = d_space(&fd.base, i, t, &x, &cfg, SpaceQuotient::Central).unwrap();
                let h = q.ladder.etas.last().unwrap();
                let scale = g.abs().max(1.0);
                assert!((q.estimate - g).abs() <= 1e-6f64.max(10.0 * h * h * scale), "{name} axis {i}: {} vs {g}", q.estimate);
            }
            let gamma = match r.random_range(0..4) {
                3 => DirectionField::constant((0..*dim).map(|_| r.random_range(-1.0..1.0)).collect()),
                k => direction(fields[k], *dim).unwrap(),
            };
            let res = relation_residual(&fd, DerivativeSource::Coded, &gamma, t, &x, &cfg).unwrap();
            assert!(res.abs() <= 1e-4, "{name} along {}: {res}", gamma.label());
        }
    }
}

fn flipped(a: Verdict, b: Verdict) -> bool {
    matches!((a, b), (Verdict::Converged, Verdict::Oscillating) | (Verdict::Oscillating, Verdict::Converged))
}

#[test]
fn halving_the_ladder_never_flips_verdicts() {
    let cfg = LadderConfig::default();
    let half = cfg.clone().with_eta0(cfg.eta0 / 2.0);
    let cx = counterexample();
    for name in ["zero", "one", "eval", "running_avg", "gamma_star", "constraint"] {
        let g = direction(name, 1).unwrap();
        for (pid, t0, x) in standard_points() {
            let a = d_gamma(&cx, &g, t0, &x, &cfg).unwrap().verdict;
            let b = d_gamma(&cx, &g, t0, &x, &half).unwrap().verdict;
            assert!(!flipped(a, b), "{name} at {pid}: {a} vs {b}");
        }
    }
    let mut r = rng(6);
    for (name, dim) in [("eval", 1), ("square", 1), ("integral", 1), ("product", 2)] {
        let fd = builtin(name).unwrap();
        for _ in 0..10 {
            let x = random_walk_path(&mut r, 128, dim, 1.0, 0.05, InterpMode::Linear);
            let t = r.random_range(0.05..0.9);
            let g = direction("running_avg", dim).unwrap();
            let a = d_gamma(&fd.base, &g, t, &x, &cfg).unwrap().verdict;
            let b = d_gamma(&fd.base, &g, t, &x, &half).unwrap().verdict;
            assert!(!flipped(a, b), "{name}: {a} vs {b}");
        }
    }
}

#[test]
fn regularity_verdicts_are_stable_under_refinement() {
    let cfg = LadderConfig::default();
    let half = cfg.clone().with_eta0(cfg.eta0 / 2.0);
    let pts: Vec<(f64, GridPath)> = standard_points().into_iter().map(|(_, t, x)| (t, x)).collect();
    for name in ["zero", "constraint", "gamma_star", "one"] {
        let g = direction(name, 1).unwrap();
        let a = verify_regular_direction(&g, &pts, &cfg).unwrap();
        let b = verify_regular_direction(&g, &pts, &half).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.report.verdict, q.report.verdict, "{name} at t0 = {}", p.t0);
            assert_eq!(p.consistent, q.consistent);
        }
    }
}

#[test]
fn quadratic_variation_is_additive_over_splits() {
    let x = brownian_path(8, 0, 1024, 1.0, &[0.0, 1.0]);
    let pi = PartitionSequence::dyadic(1.0);
    let qv = quadratic_covariation(&x, &pi, 8).unwrap();
    let total = qv.terminal().to_vec();
    for split in [1, 64, 128, 255] {
        let head = qv.at(split);
        let times = pi.level(8).unwrap();
        let tail_grid: Vec<f64> = times[split..].to_vec();
        let mut tail = [0.0; 4];
        for w in tail_grid.windows(2) {
            let (a, b) = (x.eval(w[0]), x.eval(w[1]));
            let dx = [b[0] - a[0], b[1] - a[1]];
            for i in 0..2 {
                for j in 0..2 {
                    tail[i * 2 + j] += dx[i] * dx[j];
                }
            }
        }
        for k in 0..4 {
            assert!((head[k] + tail[k] - total[k]).abs() <= 1e-12 * total[k].abs().max(1.0), "split {split}");
        }
    }
}

#[test]
fn stderr_halves_when_paths_quadruple() {
    let b = benchmark("gaussian").unwrap();
    let x = GridPath::from_fn(uniform_grid(16, 1.0), 1, InterpMode::Linear, |_| vec![0.5]).unwrap();
    let small = estimate_f(&b.spec, 0.0, &x, 2500, 0.02, 9).unwrap();
    let large = estimate_f(&b.spec, 0.0, &x, 10_000, 0.02, 9).unwrap();
    let ratio = small.stderr / large.stderr;
    assert!((ratio - 2.0).abs() <= 0.4, "ratio {ratio}");
}

#[test]
fn brownian_increment_variance_matches_elapsed_time() {
    let b = benchmark("gaussian").unwrap();
    let x = GridPath::from_fn(uniform_grid(16, 1.0), 1, InterpMode::Linear, |_| vec![0.2]).unwrap();
    let t = 0.25;
    let samples: Vec<f64> = (0..10_000u64)
        .map(|i| {
            let y = pathcalc::fk::simulate_sde(&b.spec, t, &x, 0.05, 3, i).unwrap();
            y.eval_comp(1.0, 0) - x.eval_comp(t, 0)
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
    assert!((var / (1.0 - t) - 1.0).abs() <= 0.05, "variance {var}");
}
