//! Built-in functionals with analytically coded derivatives, and built-in directions.

use crate::error::{Error, Result};
use crate::functional::{DirectionField, Functional, FunctionalWithDerivatives, VectorFunctional};
use crate::path::GridPath;
use crate::pathology;

/// Catalog names accepted by [`builtin`], with their path dimension.
pub const CATALOG: &[(&str, usize)] = &[
    ("eval", 1),
    ("square", 1),
    ("exp", 1),
    ("integral", 1),
    ("running_avg", 1),
    ("running_max", 1),
    ("t_times_eval", 1),
    ("t_plus_eval", 1),
    ("t_times_x0", 1),
    ("eval_times_avg", 1),
    ("sin_integral", 1),
    ("square_plus_integral", 1),
    ("product", 2),
    ("norm_squared", 2),
];

/// Direction names accepted by [`direction`]; `const:a,b,...` is accepted too.
pub const DIRECTIONS: &[&str] = &["zero", "one", "eval", "running_avg", "running_max", "gamma_star", "constraint"];

/// `x̂(t) = (1/t)∫_0^t x ds`, with `x̂(0) = x(0)`.
pub fn running_avg_comp(x: &GridPath, t: f64, k: usize) -> f64 {
    if t <= 0.0 {
        x.value_comp(0, k)
    } else {
        x.integral_comp(t, k) / t
    }
}

fn zero(label: &str) -> Functional {
    Functional::constant(label, 0.0)
}

fn f(label: &str, g: impl Fn(f64, &GridPath) -> f64 + Send + Sync + 'static) -> Functional {
    Functional::new(label, g)
}

pub fn builtin(name: &str) -> Result<FunctionalWithDerivatives> {
    let fd = match name {
        "eval" => FunctionalWithDerivatives::new(f("eval", |t, x| x.eval_comp(t, 0)), 1)
            .with_partial_t(zero("d_t eval"))
            .with_grad(vec![Functional::constant("grad eval", 1.0)])
            .with_hess(vec![vec![zero("hess eval")]]),
        "square" => FunctionalWithDerivatives::new(f("square", |t, x| x.eval_comp(t, 0).powi(2)), 1)
            .with_partial_t(zero("d_t square"))
            .with_grad(vec![f("grad square", |t, x| 2.0 * x.eval_comp(t, 0))])
            .with_hess(vec![vec![Functional::constant("hess square", 2.0)]]),
        "exp" => FunctionalWithDerivatives::new(f("exp", |t, x| x.eval_comp(t, 0).exp()), 1)
            .with_partial_t(zero("d_t exp"))
            .with_grad(vec![f("grad exp", |t, x| x.eval_comp(t, 0).exp())])
            .with_hess(vec![vec![f("hess exp", |t, x| x.eval_comp(t, 0).exp())]]),
        "integral" => FunctionalWithDerivatives::new(f("integral", |t, x| x.integral_comp(t, 0)), 1)
            .with_partial_t(f("d_t integral", |t, x| x.eval_comp(t, 0)))
            .with_grad(vec![zero("grad integral")])
            .with_hess(vec![vec![zero("hess integral")]]),
        "running_avg" => FunctionalWithDerivatives::new(f("running_avg", |t, x| running_avg_comp(x, t, 0)), 1)
            .with_partial_t(f("d_t running_avg", |t, x| {
                if t <= 0.0 {
                    0.0
                } else {
                    (x.eval_comp(t, 0) - running_avg_comp(x, t, 0)) / t
                }
            }))
            // a bump at t > 0 does not move the average; at t = 0 the average is x(0)
            .with_grad(vec![f("grad running_avg", |t, _| if t <= 0.0 { 1.0 } else { 0.0 })])
            .with_hess(vec![vec![zero("hess running_avg")]]),
        "running_max" => FunctionalWithDerivatives::new(f("running_max", |t, x| x.running_max_comp(t, 0)), 1)
            .with_partial_t(zero("d_t running_max")),
        "t_times_eval" => FunctionalWithDerivatives::new(f("t_times_eval", |t, x| t * x.eval_comp(t, 0)), 1)
            .with_partial_t(f("d_t t_times_eval", |t, x| x.eval_comp(t, 0)))
            .with_grad(vec![f("grad t_times_eval", |t, _| t)])
            .with_hess(vec![vec![zero("hess t_times_eval")]]),
        "t_plus_eval" => FunctionalWithDerivatives::new(f("t_plus_eval", |t, x| t + x.eval_comp(t, 0)), 1)
            .with_partial_t(Functional::constant("d_t t_plus_eval", 1.0))
            .with_grad(vec![Functional::constant("grad t_plus_eval", 1.0)])
            .with_hess(vec![vec![zero("hess t_plus_eval")]]),
        "t_times_x0" => FunctionalWithDerivatives::new(f("t_times_x0", |t, x| t * x.value_comp(0, 0)), 1)
            .with_partial_t(f("d_t t_times_x0", |_, x| x.value_comp(0, 0)))
            .with_grad(vec![zero("grad t_times_x0")])
            .with_hess(vec![vec![zero("hess t_times_x0")]]),
        "eval_times_avg" => FunctionalWithDerivatives::new(
            f("eval_times_avg", |t, x| x.eval_comp(t, 0) * running_avg_comp(x, t, 0)),
            1,
        )
        .with_partial_t(f("d_t eval_times_avg", |t, x| {
            if t <= 0.0 {
                0.0
            } else {
                let v = x.eval_comp(t, 0);
                v * (v - running_avg_comp(x, t, 0)) / t
            }
        }))
        .with_grad(vec![f("grad eval_times_avg", |t, x| {
            if t <= 0.0 {
                2.0 * x.value_comp(0, 0)
            } else {
                running_avg_comp(x, t, 0)
            }
        })])
        .with_hess(vec![vec![f("hess eval_times_avg", |t, _| if t <= 0.0 { 2.0 } else { 0.0 })]]),
        "sin_integral" => FunctionalWithDerivatives::new(f("sin_integral", |t, x| x.integral_comp(t, 0).sin()), 1)
            .with_partial_t(f("d_t sin_integral", |t, x| x.integral_comp(t, 0).cos() * x.eval_comp(t, 0)))
            .with_grad(vec![zero("grad sin_integral")])
            .with_hess(vec![vec![zero("hess sin_integral")]]),
        "square_plus_integral" => FunctionalWithDerivatives::new(
            f("square_plus_integral", |t, x| x.eval_comp(t, 0).powi(2) + x.integral_comp(t, 0)),
            1,
        )
        .with_partial_t(f("d_t square_plus_integral", |t, x| x.eval_comp(t, 0)))
        .with_grad(vec![f("grad square_plus_integral", |t, x| 2.0 * x.eval_comp(t, 0))])
        .with_hess(vec![vec![Functional::constant("hess square_plus_integral", 2.0)]]),
        "product" => FunctionalWithDerivatives::new(f("product", |t, x| x.eval_comp(t, 0) * x.eval_comp(t, 1)), 2)
            .with_partial_t(zero("d_t product"))
            .with_grad(vec![
                f("grad product[0]", |t, x| x.eval_comp(t, 1)),
                f("grad product[1]", |t, x| x.eval_comp(t, 0)),
            ])
            .with_hess(vec![
                vec![zero("hess product[0][0]"), Functional::constant("hess product[0][1]", 1.0)],
                vec![Functional::constant("hess product[1][0]", 1.0), zero("hess product[1][1]")],
            ]),
        "norm_squared" => FunctionalWithDerivatives::new(
            f("norm_squared", |t, x| x.eval_comp(t, 0).powi(2) + x.eval_comp(t, 1).powi(2)),
            2,
        )
        .with_partial_t(zero("d_t norm_squared"))
        .with_grad(vec![
            f("grad norm_squared[0]", |t, x| 2.0 * x.eval_comp(t, 0)),
            f("grad norm_squared[1]", |t, x| 2.0 * x.eval_comp(t, 1)),
        ])
        .with_hess(vec![
            vec![Functional::constant("hess norm_squared[0][0]", 2.0), zero("hess norm_squared[0][1]")],
            vec![zero("hess norm_squared[1][0]"), Functional::constant("hess norm_squared[1][1]", 2.0)],
        ]),
        other => return Err(Error::UnknownName(other.to_string())),
    };
    Ok(fd)
}

/// Built-in direction of dimension `dim`.
///
/// `eval`, `running_avg` and `running_max` act componentwise; the first two are
/// 1-Lipschitz and the running maximum is `√d`-Lipschitz;
/// `gamma_star` and `constraint` are the one-dimensional directions of the
/// pathological functional in [`crate::pathology`].
pub fn direction(name: &str, dim: usize) -> Result<DirectionField> {
    if let Some(rest) = name.strip_prefix("const:") {
        let c: Vec<f64> = rest
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::config(format!("bad constant direction `{name}`"))))
            .collect::<Result<_>>()?;
        if c.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: c.len() });
        }
        return Ok(DirectionField::constant(c));
    }
    let one_dim = || {
        if dim == 1 {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: 1, got: dim })
        }
    };
    match name {
        "zero" => Ok(DirectionField::zero(dim)),
        "one" => Ok(DirectionField::constant(vec![1.0; dim])),
        "eval" => DirectionField::new(
            VectorFunctional::new("eval", dim, move |t, x| (0..dim).map(|k| x.eval_comp(t, k)).collect()),
            1.0,
        ),
        "running_avg" => DirectionField::new(
            VectorFunctional::new("running_avg", dim, move |t, x| (0..dim).map(|k| running_avg_comp(x, t, k)).collect()),
            1.0,
        ),
        // componentwise maxima are only √d-Lipschitz in the Euclidean norm
        "running_max" => DirectionField::new(
            VectorFunctional::new("running_max", dim, move |t, x| (0..dim).map(|k| x.running_max_comp(t, k)).collect()),
            (dim as f64).sqrt(),
        ),
        "gamma_star" => {
            one_dim()?;
            Ok(pathology::gamma_star())
        }
        "constraint" => {
            one_dim()?;
            Ok(pathology::constraint_direction())
        }
        other => Err(Error::UnknownName(other.to_string())),
    }
}
