//! Seeded, counter-based normal streams and random path generators.
//!
//! Every stream is a ChaCha keystream selected by `(master seed, substream index)`,
//! so draws for path `i` never depend on how many other paths were simulated or in
//! which order. Normals come from the inverse normal CDF applied to uniforms.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::path::{uniform_grid, GridPath, InterpMode};

pub struct NormalStream {
    rng: ChaCha12Rng,
    normal: Normal,
}

impl NormalStream {
    pub fn new(seed: u64, substream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(substream);
        NormalStream { rng, normal: Normal::standard() }
    }

    /// Uniform on the open interval (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        let u = self.next_uniform();
        self.normal.inverse_cdf(u)
    }

    pub fn rng(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }
}

/// Standard `d`-dimensional Brownian motion on `[0, T]` sampled on a uniform grid of
/// `n_steps` cells, started at `x0`, linear between samples.
pub fn brownian_path(seed: u64, substream: u64, n_steps: usize, horizon: f64, x0: &[f64]) -> GridPath {
    let d = x0.len();
    let mut stream = NormalStream::new(seed, substream);
    let times = uniform_grid(n_steps, horizon);
    let scale = (horizon / n_steps as f64).sqrt();
    let mut values = Vec::with_capacity((n_steps + 1) * d);
    values.extend_from_slice(x0);
    for i in 0..n_steps {
        for k in 0..d {
            let prev = values[i * d + k];
            values.push(prev + scale * stream.next_normal());
        }
    }
    GridPath::from_flat(times, values, d, InterpMode::Linear).expect("valid brownian grid")
}

/// Random-walk test path on `[0, T]` with `n` uniform cells and per-step scale `sigma`.
pub fn random_walk_path<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    dim: usize,
    horizon: f64,
    sigma: f64,
    mode: InterpMode,
) -> GridPath {
    let times = uniform_grid(n, horizon);
    let mut values = Vec::with_capacity((n + 1) * dim);
    for _ in 0..dim {
        values.push(rng.random_range(-1.0..1.0));
    }
    for i in 0..n {
        for k in 0..dim {
            let prev = values[i * dim + k];
            values.push(prev + sigma * rng.random_range(-1.0..1.0));
        }
    }
    GridPath::from_flat(times, values, dim, mode).expect("valid random walk")
}

/// Random path whose values stay inside the box `[-r, r]^d`.
pub fn random_box_path<R: Rng + ?Sized>(rng: &mut R, n: usize, dim: usize, horizon: f64, r: f64, mode: InterpMode) -> GridPath {
    let times = uniform_grid(n, horizon);
    let values = (0..(n + 1) * dim).map(|_| rng.random_range(-r..=r)).collect();
    GridPath::from_flat(times, values, dim, mode).expect("valid box path")
}
