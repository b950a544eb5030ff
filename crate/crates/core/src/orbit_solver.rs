//! Closed-orbit enumeration on flat tori and a damped Newton solver for
//! critical points of the discrete action.
//!
//! Orbit families are exact: a nonzero lattice vector w with h'(x) = ||w||
//! gives an n-torus of 1-periodic orbits of radius x; the zero family is the
//! zero section. The solver cross-checks against this enumeration.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::discrete_action::{self, DiscreteLoop};
use crate::error::{CoreError, Result};
use crate::flat_geometry::{log_map, FlatTorus, TorusPoint};
use crate::hamiltonians::{action_of_orbit, RadialProfile};

/// A connected family of 1-periodic orbits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitFamily {
    /// integer winding per lattice direction
    pub winding: Vec<i64>,
    /// the lattice vector itself
    pub lattice_vector: Vec<f64>,
    pub radius: f64,
    pub action: f64,
    /// dimension of the critical manifold (base translations)
    pub family_dim: usize,
}

impl OrbitFamily {
    pub fn winding_vector(&self, torus: &FlatTorus) -> DVector<f64> {
        let _ = torus;
        DVector::from_row_slice(&self.lattice_vector)
    }
}

/// All orbit families of a radial profile, sorted by action then winding.
///
/// The profile's slope guard runs first: a lattice norm inside the cap ramp
/// makes radii ill-conditioned and is rejected.
pub fn enumerate_orbits(
    torus: &FlatTorus,
    profile: &RadialProfile,
    margin: f64,
) -> Result<Vec<OrbitFamily>> {
    profile.slope_spectrum_guard(torus, margin)?;
    let n = torus.dim();
    let sup_slope = match profile.slope_at_infinity() {
        Some(mu) => mu,
        None => {
            return Err(CoreError::InvalidConfig(
                "orbit enumeration needs a capped profile".into(),
            ))
        }
    };
    let mut families = vec![OrbitFamily {
        winding: vec![0; n],
        lattice_vector: vec![0.0; n],
        radius: 0.0,
        // + 0.0 normalizes a negative zero out of the reports
        action: -profile.h(0.0) + 0.0,
        family_dim: n,
    }];
    for w in torus.lattice_vectors_up_to(sup_slope) {
        let norm = w.norm();
        if norm == 0.0 {
            continue;
        }
        for radius in profile.slope_crossings(norm) {
            let winding: Vec<i64> = (0..n)
                .map(|i| (w[i] / torus.lengths()[i]).round() as i64)
                .collect();
            families.push(OrbitFamily {
                winding,
                lattice_vector: w.iter().cloned().collect(),
                radius,
                action: action_of_orbit(profile, radius),
                family_dim: n,
            });
        }
    }
    families.sort_by(|a, b| {
        a.action
            .partial_cmp(&b.action)
            .unwrap()
            .then_with(|| a.winding.cmp(&b.winding))
    });
    Ok(families)
}

/// The exact r-dissection of a family member through q0.
pub fn dissect_orbit(
    torus: &FlatTorus,
    profile: &RadialProfile,
    family: &OrbitFamily,
    q0: &TorusPoint,
    r: usize,
) -> Result<DiscreteLoop> {
    let w = DVector::from_row_slice(&family.lattice_vector);
    discrete_action::dissect(torus, profile, &w, family.radius, q0, r)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPointReport {
    pub residual: f64,
    pub iterations: usize,
    pub action: f64,
    pub winding: Vec<i64>,
    pub radius_mean: f64,
    /// index into the enumerated family list, when matched
    pub matched_family: Option<usize>,
    /// the solved loop in wire form
    pub solution: crate::discrete_action::LoopWire,
}

/// Winding of the base path: the per-coordinate sum of shortest-representative
/// steps divided by the lattice length, rounded to an integer.
pub fn base_winding(torus: &FlatTorus, lp: &DiscreteLoop) -> Result<Vec<i64>> {
    let n = torus.dim();
    let mut total = DVector::zeros(n);
    for j in 0..lp.r() {
        let next = (j + 1) % lp.r();
        total += log_map(torus, &lp.points()[j].base, &lp.points()[next].base)?;
    }
    Ok((0..n)
        .map(|i| (total[i] / torus.lengths()[i]).round() as i64)
        .collect())
}

/// Damped Newton / Levenberg-Marquardt on the gradient with spectral
/// pseudo-inverse steps (singular values below 1e-8 of the largest are
/// dropped, so critical manifolds do not stall the iteration).
pub fn solve_critical(
    torus: &FlatTorus,
    profile: &RadialProfile,
    seed: &DiscreteLoop,
    tol: f64,
    families: &[OrbitFamily],
) -> Result<CriticalPointReport> {
    let max_iters = 200;
    let durations = seed.durations().to_vec();
    let r = seed.r();
    let mut state = seed.to_vector();
    let mut lp = seed.clone();
    let mut lambda = 1e-3;
    let mut grad = discrete_action::gradient(torus, profile, &lp)?;
    let mut iterations = 0;

    while grad.norm() >= tol {
        if iterations >= max_iters {
            return Err(CoreError::NoConvergence { iterations, residual: grad.norm() });
        }
        iterations += 1;
        let hess = discrete_action::hessian_matrix(torus, profile, &lp)?;
        let eig = nalgebra::SymmetricEigen::new(hess);
        let sigma_max = eig.eigenvalues.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
        let cutoff = 1e-8 * sigma_max;
        // step = - V diag(l_i / (l_i^2 + lambda)) V^T g, dropping tiny l_i
        let vt_g = eig.eigenvectors.transpose() * &grad;
        let mut coeffs = DVector::zeros(vt_g.len());
        for i in 0..vt_g.len() {
            let l = eig.eigenvalues[i];
            if l.abs() > cutoff {
                coeffs[i] = -vt_g[i] * l / (l * l + lambda);
            }
        }
        let step = &eig.eigenvectors * coeffs;

        // backtrack: halve until the residual drops and the chart holds
        let mut scale = 1.0;
        let mut accepted = false;
        while scale >= 2f64.powi(-20) {
            let cand_vec = &state + &step * scale;
            match DiscreteLoop::from_vector(torus, &cand_vec, r, durations.clone())
                .and_then(|cand| discrete_action::gradient(torus, profile, &cand).map(|g| (cand, g)))
            {
                Ok((cand, g_new)) if g_new.norm() < grad.norm() => {
                    state = cand_vec;
                    lp = cand;
                    grad = g_new;
                    lambda = (lambda * 0.33).max(1e-12);
                    accepted = true;
                    break;
                }
                _ => {
                    scale *= 0.5;
                }
            }
        }
        if !accepted {
            lambda *= 5.0;
            if lambda > 1e12 {
                return Err(CoreError::LeftChart { scale: 2f64.powi(-20) });
            }
        }
    }

    let action = discrete_action::action(torus, profile, &lp)?;
    let winding = base_winding(torus, &lp)?;
    let radius_mean =
        lp.points().iter().map(|z| z.fiber.norm()).sum::<f64>() / lp.r() as f64;
    let matched_family = families.iter().position(|f| {
        f.winding == winding && (f.radius - radius_mean).abs() < 1e-6
    });
    Ok(CriticalPointReport {
        residual: grad.norm(),
        iterations,
        action,
        winding,
        radius_mean,
        matched_family,
        solution: crate::discrete_action::LoopWire::from_loop(&lp),
    })
}

/// Deterministic perturbed-dissection seed used by the batch drivers.
pub fn perturbed_seed(
    torus: &FlatTorus,
    profile: &RadialProfile,
    family: &OrbitFamily,
    r: usize,
    noise: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<DiscreteLoop> {
    let n = torus.dim();
    let q0 = TorusPoint::new(torus, crate::sampling::normal_vector(n, rng));
    let base = dissect_orbit(torus, profile, family, &q0, r)?;
    let mut v = base.to_vector();
    for x in v.iter_mut() {
        *x += noise * crate::sampling::normal(rng);
    }
    DiscreteLoop::from_vector(torus, &v, r, base.durations().to_vec())
}

/// Check that translating a critical loop along a lattice direction stays
/// critical; the family is a torus of translates.
pub fn family_direction_residual(
    torus: &FlatTorus,
    profile: &RadialProfile,
    lp: &DiscreteLoop,
    shift: &DVector<f64>,
) -> Result<f64> {
    let n = torus.dim();
    let mut v = lp.to_vector();
    for j in 0..lp.r() {
        for i in 0..n {
            v[2 * n * j + i] += shift[i];
        }
    }
    let shifted = DiscreteLoop::from_vector(torus, &v, lp.r(), lp.durations().to_vec())?;
    Ok(discrete_action::gradient(torus, profile, &shifted)?.norm())
}
