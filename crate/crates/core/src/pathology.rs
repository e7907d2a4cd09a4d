//! The running-average counterexample `F(t, x) = f(x(t) − 2x̂(t))` with
//! `f(y) = y·sin(log|y|)`.
//!
//! `F` vanishes on every linear path, yet on the surface `{Φ = 0}` neither the
//! vertical nor the horizontal derivative exists. A direction `γ` is regular
//! there exactly when `γ(t, x) = 2x̂(t)/t`; [`gamma_star`] satisfies that
//! constraint everywhere, so `D^{γ*}F ≡ 0` while `DF` still oscillates.

use crate::deriv::{d_gamma, d_horizontal, DerivativeReport, LadderConfig, Verdict};
use crate::error::{Error, Result};
use crate::functional::catalog::running_avg_comp;
use crate::functional::{DirectionField, Functional};
use crate::path::{uniform_grid, GridPath, InterpMode};

/// Smallest time at which `γ*` and the constraint direction use the true `1/t`.
pub const T_FLOOR: f64 = 1e-3;
/// `|Φ| ≤ PHI_TOL` counts as on the surface.
pub const PHI_TOL: f64 = 1e-10;
/// `|α| ≤ ALPHA_TOL` counts as satisfying the regularity constraint.
pub const ALPHA_TOL: f64 = 1e-6;
/// Tolerance on converged derivative estimates.
pub const ESTIMATE_TOL: f64 = 1e-3;

/// `f(y) = y·sin(log|y|)`, `f(0) = 0`.
pub fn f(y: f64) -> f64 {
    if y.abs() < 1e-300 {
        0.0
    } else {
        y * y.abs().ln().sin()
    }
}

/// `f'(y) = sin(log|y|) + cos(log|y|)` for `y ≠ 0`.
pub fn f_prime(y: f64) -> f64 {
    let l = y.abs().ln();
    l.sin() + l.cos()
}

pub fn running_average() -> Functional {
    Functional::new("x_hat", |t, x| running_avg_comp(x, t, 0))
}

fn phi_value(t: f64, x: &GridPath) -> f64 {
    x.eval_comp(t, 0) - 2.0 * running_avg_comp(x, t, 0)
}

/// `Φ(t, x) = x(t) − 2x̂(t)`.
pub fn phi() -> Functional {
    Functional::new("phi", phi_value)
}

/// `F = f∘Φ`.
pub fn counterexample() -> Functional {
    Functional::new("counterexample", |t, x| f(phi_value(t, x)))
}

/// `γ*(t, x) = 2(x(t) − x̂(t))/t`, with `t` floored at [`T_FLOOR`].
pub fn gamma_star() -> DirectionField {
    DirectionField::from_fn("gamma_star", 1, 4.0 / T_FLOOR, |t, x| {
        vec![2.0 * (x.eval_comp(t, 0) - running_avg_comp(x, t, 0)) / t.max(T_FLOOR)]
    })
    .expect("positive Lipschitz constant")
}

/// `2x̂(t)/t`, the value a regular direction must take on `{Φ = 0}`.
pub fn constraint_direction() -> DirectionField {
    DirectionField::from_fn("constraint", 1, 2.0 / T_FLOOR, |t, x| vec![2.0 * running_avg_comp(x, t, 0) / t.max(T_FLOOR)])
        .expect("positive Lipschitz constant")
}

/// `α = γ₀ − 2(x(t₀) − x̂(t₀))/t₀`, the first-order rate of `Φ` along the flow.
pub fn predicted_alpha(gamma: &DirectionField, t0: f64, x: &GridPath) -> Result<f64> {
    check_t0(t0, 0.0)?;
    let xs = x.stop(t0)?;
    let g0 = gamma.eval(t0, &xs)[0];
    Ok(g0 - 2.0 * (xs.eval_comp(t0, 0) - running_avg_comp(&xs, t0, 0)) / t0)
}

fn check_t0(t0: f64, floor: f64) -> Result<()> {
    if !(t0 > floor && t0 < 1.0) {
        return Err(Error::domain(format!("test time {t0} must lie in ({floor}, 1)")));
    }
    Ok(())
}

fn check_dim(x: &GridPath) -> Result<()> {
    if x.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: x.dim() });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiExpansionReport {
    pub t0: f64,
    pub alpha_predicted: f64,
    /// `α̂(η) = (Φ(t₀+η, Y) − Φ(t₀, x))/η` on the ladder.
    pub ladder: DerivativeReport,
    /// Extrapolated limit of `α̂`.
    pub alpha_observed: f64,
    /// `max_η |α̂(η) − α|/η`.
    pub remainder_constant: f64,
    /// Least-squares slope of `log|α̂ − α|` against `log η`; absent when the
    /// remainder vanishes identically.
    pub slope: Option<f64>,
}

/// Checks the first-order expansion of `Φ` along the flow of `γ` from `(t₀, x)`.
pub fn phi_expansion_check(
    x: &GridPath,
    t0: f64,
    gamma: &DirectionField,
    cfg: &LadderConfig,
) -> Result<PhiExpansionReport> {
    check_dim(x)?;
    let alpha = predicted_alpha(gamma, t0, x)?;
    let ladder = d_gamma(&phi(), gamma, t0, x, cfg)?;
    let mut remainder_constant = 0.0f64;
    let mut pts = Vec::new();
    for (eta, a) in ladder.ladder.etas.iter().zip(&ladder.ladder.quotients) {
        let r = (a - alpha).abs();
        remainder_constant = remainder_constant.max(r / eta);
        if r > 0.0 {
            pts.push((eta.ln(), r.ln()));
        }
    }
    let slope = (pts.len() >= 3).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let var: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        cov / var
    });
    Ok(PhiExpansionReport { t0, alpha_predicted: alpha, alpha_observed: ladder.estimate, ladder, remainder_constant, slope })
}

/// Outcome of one regularity test point.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityPoint {
    pub t0: f64,
    pub phi: f64,
    pub alpha: f64,
    pub on_surface: bool,
    /// Whether the point imposes no obstruction to `γ ∈ R(F)`.
    pub admissible: bool,
    pub expected_verdict: Verdict,
    /// Predicted `D^γF` when a limit is expected.
    pub expected_estimate: Option<f64>,
    pub report: DerivativeReport,
    pub consistent: bool,
}

/// Runs `D^γF` at each point and compares the verdict with the membership rule
/// for the regular-direction set.
pub fn verify_regular_direction(
    gamma: &DirectionField,
    points: &[(f64, GridPath)],
    cfg: &LadderConfig,
) -> Result<Vec<RegularityPoint>> {
    let cx = counterexample();
    points
        .iter()
        .map(|(t0, x)| {
            check_dim(x)?;
            let t0 = *t0;
            let alpha = predicted_alpha(gamma, t0, x)?;
            let phi0 = phi_value(t0, x.stop(t0)?.path());
            let on_surface = phi0.abs() <= PHI_TOL;
            let admissible = !on_surface || alpha.abs() <= ALPHA_TOL;
            let (expected_verdict, expected_estimate) = if !on_surface {
                (Verdict::Converged, Some(f_prime(phi0) * alpha))
            } else if admissible {
                (Verdict::Converged, Some(0.0))
            } else {
                (Verdict::Oscillating, None)
            };
            let report = d_gamma(&cx, gamma, t0, x, cfg)?;
            let consistent = report.verdict == expected_verdict
                && expected_estimate.is_none_or(|e| (report.estimate - e).abs() <= ESTIMATE_TOL);
            Ok(RegularityPoint {
                t0,
                phi: phi0,
                alpha,
                on_surface,
                admissible,
                expected_verdict,
                expected_estimate,
                report,
                consistent,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaStarPoint {
    pub t0: f64,
    pub on_surface: bool,
    pub gamma_report: DerivativeReport,
    /// `DF` at on-surface points with `x̂(t₀) ≠ 0`.
    pub horizontal: Option<DerivativeReport>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaStarReport {
    pub points: Vec<GammaStarPoint>,
}

impl GammaStarReport {
    pub fn passed(&self) -> bool {
        self.points.iter().all(|p| p.ok)
    }
}

/// `D^{γ*}F` must converge to 0 everywhere while `DF` oscillates on the surface.
pub fn verify_gamma_star(points: &[(f64, GridPath)], cfg: &LadderConfig) -> Result<GammaStarReport> {
    let cx = counterexample();
    let g = gamma_star();
    let mut out = Vec::with_capacity(points.len());
    for (t0, x) in points {
        let t0 = *t0;
        check_dim(x)?;
        check_t0(t0, T_FLOOR)?;
        let xs = x.stop(t0)?;
        let on_surface = phi_value(t0, &xs).abs() <= PHI_TOL;
        let gamma_report = d_gamma(&cx, &g, t0, x, cfg)?;
        let mut ok = gamma_report.converged() && gamma_report.estimate.abs() <= ESTIMATE_TOL;
        let horizontal = if on_surface && running_avg_comp(&xs, t0, 0) != 0.0 {
            let h = d_horizontal(&cx, t0, x, cfg)?;
            ok &= h.verdict == Verdict::Oscillating;
            Some(h)
        } else {
            None
        };
        out.push(GammaStarPoint { t0, on_surface, gamma_report, horizontal, ok });
    }
    Ok(GammaStarReport { points: out })
}

/// `x(s) = a·s` on the dyadic grid with 1024 cells of `[0, 1]`; with this grid
/// `x̂(t) = at/2` holds exactly at grid times, so `Φ = 0` there.
pub fn linear_path(a: f64) -> GridPath {
    GridPath::from_fn(uniform_grid(1024, 1.0), 1, InterpMode::Linear, |s| vec![a * s]).expect("valid grid")
}

pub fn constant_path(c: f64) -> GridPath {
    GridPath::constant(&[c], 1.0, InterpMode::Linear).expect("valid path")
}

/// Named test points: on-surface linear paths and an off-surface constant path.
pub fn standard_points() -> Vec<(&'static str, f64, GridPath)> {
    vec![
        ("ramp", 0.5, linear_path(1.0)),
        ("steep_ramp", 0.25, linear_path(2.0)),
        ("falling_ramp", 0.75, linear_path(-1.0)),
        ("constant", 0.5, constant_path(1.0)),
    ]
}
