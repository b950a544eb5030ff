//! Deterministic random sampling helpers shared by solvers, certificates and tests.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::discrete_action::DiscreteLoop;
use crate::flat_geometry::{CotangentPoint, FlatTorus, TorusPoint};

/// Standard normal via Box-Muller; two uniforms per call keeps the stream
/// layout independent of rejection behavior.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// A closed admissible loop: steps are mean-centered so the base path closes
/// exactly, and each step stays below step_frac * eps0 so every chart
/// condition holds with margin.
pub fn random_admissible_loop(
    torus: &FlatTorus,
    r: usize,
    p_scale: f64,
    step_frac: f64,
    rng: &mut ChaCha8Rng,
) -> DiscreteLoop {
    let n = torus.dim();
    let eps0 = torus.eps0();
    let amp = step_frac.min(0.45) * eps0 / (n as f64).sqrt();
    let mut steps: Vec<DVector<f64>> =
        (0..r).map(|_| DVector::from_fn(n, |_, _| (rng.random::<f64>() - 0.5) * 2.0 * amp)).collect();
    let mean = steps.iter().fold(DVector::zeros(n), |acc, s| acc + s) / r as f64;
    for s in steps.iter_mut() {
        *s -= &mean;
    }
    let mut q = DVector::from_fn(n, |i, _| rng.random::<f64>() * torus.lengths()[i]);
    let mut points = Vec::with_capacity(r);
    for step in steps {
        let p = DVector::from_fn(n, |_, _| (rng.random::<f64>() - 0.5) * 2.0 * p_scale);
        points.push(CotangentPoint::new(TorusPoint::new(torus, q.clone()), p));
        q += step;
    }
    DiscreteLoop::uniform(points).expect("centered steps stay admissible")
}

/// Gaussian vector of the given dimension.
pub fn normal_vector(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| normal(rng))
}
