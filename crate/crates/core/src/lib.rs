//! Pathwise functional calculus on grid paths.
//!
//! Non-anticipative functionals of càdlàg paths, the path-dependent flows that
//! define directional derivatives along extensions, difference-quotient engines
//! with convergence verdicts, the running-average counterexample, pathwise Itô
//! and Stratonovich sums along partitions, and Feynman–Kac checks for
//! path-dependent SDEs.

pub mod cli;
pub mod deriv;
pub mod error;
pub mod fk;
pub mod flow;
pub mod functional;
pub mod ito;
pub mod path;
pub mod pathology;
pub mod rng;

pub use error::{Error, ErrorCategory, Result};
pub use path::{GridPath, InterpMode, StoppedPath, BumpedPath};
