//! Non-anticipative functionals `F(t, x)`, vector fields `γ(t, x)` and functionals
//! bundled with their coinvariant derivatives.
//!
//! Functionals receive the full path but must only read it on `[0, t]`; the
//! probes in [`probe`] check that empirically. Evaluating on the unstopped path is
//! what lets flows and partition sums run in linear time.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::path::GridPath;

pub mod catalog;
pub mod probe;

pub use catalog::{builtin, direction, CATALOG, DIRECTIONS};
pub use probe::{
    probe_boundedness_preserving, probe_lipschitz, probe_non_anticipative, BoundednessReport, LipschitzReport,
    ProbeReport,
};

type ScalarFn = dyn Fn(f64, &GridPath) -> f64 + Send + Sync;
type VectorFn = dyn Fn(f64, &GridPath) -> Vec<f64> + Send + Sync;

/// A pure map `(t, x) → ℝ`.
#[derive(Clone)]
pub struct Functional {
    label: Arc<str>,
    f: Arc<ScalarFn>,
}

impl Functional {
    pub fn new(label: impl Into<String>, f: impl Fn(f64, &GridPath) -> f64 + Send + Sync + 'static) -> Self {
        Functional { label: label.into().into(), f: Arc::new(f) }
    }

    pub fn constant(label: impl Into<String>, c: f64) -> Self {
        Functional::new(label, move |_, _| c)
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &GridPath) -> f64 {
        (self.f)(t, x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Functional({})", self.label)
    }
}

/// A pure map `(t, x) → ℝ^m`.
#[derive(Clone)]
pub struct VectorFunctional {
    label: Arc<str>,
    out_dim: usize,
    f: Arc<VectorFn>,
}

impl VectorFunctional {
    pub fn new(
        label: impl Into<String>,
        out_dim: usize,
        f: impl Fn(f64, &GridPath) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        VectorFunctional { label: label.into().into(), out_dim, f: Arc::new(f) }
    }

    /// Stacks scalar functionals into a vector.
    pub fn from_components(label: impl Into<String>, parts: Vec<Functional>) -> Self {
        let n = parts.len();
        VectorFunctional::new(label, n, move |t, x| parts.iter().map(|p| p.eval(t, x)).collect())
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &GridPath) -> Vec<f64> {
        (self.f)(t, x)
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Component `k` as a scalar functional.
    pub fn component(&self, k: usize) -> Functional {
        let f = self.f.clone();
        Functional::new(format!("{}[{k}]", self.label), move |t, x| f(t, x)[k])
    }
}

impl fmt::Debug for VectorFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorFunctional({}, dim {})", self.label, self.out_dim)
    }
}

/// A direction `γ` for path extensions, with the Lipschitz constant `K` it
/// declares with respect to the sup norm of stopped paths.
#[derive(Clone, Debug)]
pub struct DirectionField {
    field: VectorFunctional,
    lipschitz: f64,
}

impl DirectionField {
    pub fn new(field: VectorFunctional, lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::config(format!(
                "direction `{}` needs a positive finite Lipschitz constant, got {lipschitz}",
                field.label()
            )));
        }
        Ok(DirectionField { field, lipschitz })
    }

    pub fn from_fn(
        label: impl Into<String>,
        dim: usize,
        lipschitz: f64,
        f: impl Fn(f64, &GridPath) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        DirectionField::new(VectorFunctional::new(label, dim, f), lipschitz)
    }

    /// `γ ≡ c`.
    pub fn constant(c: Vec<f64>) -> Self {
        let label = format!("const{c:?}");
        let dim = c.len();
        DirectionField { field: VectorFunctional::new(label, dim, move |_, _| c.clone()), lipschitz: 1.0 }
    }

    pub fn zero(dim: usize) -> Self {
        let mut g = DirectionField::constant(vec![0.0; dim]);
        g.field.label = "zero".into();
        g
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &GridPath) -> Vec<f64> {
        self.field.eval(t, x)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn dim(&self) -> usize {
        self.field.out_dim()
    }

    pub fn label(&self) -> &str {
        self.field.label()
    }

    pub fn field(&self) -> &VectorFunctional {
        &self.field
    }
}

/// A functional with (optionally) its coinvariant derivatives `∂F`, `∇̃F`, `∇̃²F`.
#[derive(Clone, Debug)]
pub struct FunctionalWithDerivatives {
    pub base: Functional,
    pub dim: usize,
    pub partial_t: Option<Functional>,
    pub grad: Option<Vec<Functional>>,
    pub hess: Option<Vec<Vec<Functional>>>,
}

impl FunctionalWithDerivatives {
    pub fn new(base: Functional, dim: usize) -> Self {
        FunctionalWithDerivatives { base, dim, partial_t: None, grad: None, hess: None }
    }

    pub fn with_partial_t(mut self, f: Functional) -> Self {
        self.partial_t = Some(f);
        self
    }

    pub fn with_grad(mut self, g: Vec<Functional>) -> Self {
        debug_assert_eq!(g.len(), self.dim);
        self.grad = Some(g);
        self
    }

    pub fn with_hess(mut self, h: Vec<Vec<Functional>>) -> Self {
        debug_assert_eq!(h.len(), self.dim);
        self.hess = Some(h);
        self
    }

    pub fn label(&self) -> &str {
        self.base.label()
    }

    pub fn eval(&self, t: f64, x: &GridPath) -> f64 {
        self.base.eval(t, x)
    }

    pub fn partial_t(&self) -> Result<&Functional> {
        self.partial_t.as_ref().ok_or_else(|| Error::MissingDerivative(format!("∂F of {}", self.label())))
    }

    pub fn grad(&self) -> Result<&[Functional]> {
        self.grad.as_deref().ok_or_else(|| Error::MissingDerivative(format!("∇̃F of {}", self.label())))
    }

    pub fn hess(&self) -> Result<&[Vec<Functional>]> {
        self.hess.as_deref().ok_or_else(|| Error::MissingDerivative(format!("∇̃²F of {}", self.label())))
    }

    /// Gradient as a single vector functional (the integrand of partition integrals).
    pub fn grad_field(&self) -> Result<VectorFunctional> {
        Ok(VectorFunctional::from_components(format!("grad {}", self.label()), self.grad()?.to_vec()))
    }

    pub fn grad_at(&self, t: f64, x: &GridPath) -> Result<Vec<f64>> {
        Ok(self.grad()?.iter().map(|g| g.eval(t, x)).collect())
    }

    /// Largest `|hess[i][j] − hess[j][i]|` over the given sample points.
    pub fn hessian_asymmetry<'a>(&self, points: impl IntoIterator<Item = (f64, &'a GridPath)>) -> Result<f64> {
        let h = self.hess()?;
        let mut worst = 0.0f64;
        for (t, x) in points {
            for i in 0..self.dim {
                for j in 0..i {
                    worst = worst.max((h[i][j].eval(t, x) - h[j][i].eval(t, x)).abs());
                }
            }
        }
        Ok(worst)
    }
}
