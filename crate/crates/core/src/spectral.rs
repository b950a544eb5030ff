//! Hessians of the discrete action at critical points, inertia bookkeeping,
//! and the index increment when a loop gains an idle node.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::discrete_action::{self, DiscreteLoop};
use crate::error::{CoreError, Result};
use crate::flat_geometry::FlatTorus;
use crate::hamiltonians::RadialProfile;

/// Eigenvalues and signature counts under a relative zero threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InertiaReport {
    pub eigenvalues: Vec<f64>,
    pub n_neg: usize,
    pub n_zero: usize,
    pub n_pos: usize,
    pub zero_threshold: f64,
    /// counts agree at 0.8x and 1.2x the threshold
    pub stable: bool,
    pub alt_counts: ((usize, usize, usize), (usize, usize, usize)),
}

fn counts(eigs: &[f64], thr: f64) -> (usize, usize, usize) {
    let neg = eigs.iter().filter(|&&e| e < -thr).count();
    let pos = eigs.iter().filter(|&&e| e > thr).count();
    (neg, eigs.len() - neg - pos, pos)
}

/// Full symmetric eigendecomposition with deterministic (ascending) ordering.
/// The default zero threshold is 1e-7 times the spectral radius.
pub fn inertia(matrix: &DMatrix<f64>, zero_threshold: Option<f64>) -> InertiaReport {
    let eig = nalgebra::SymmetricEigen::new(matrix.clone());
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let radius = eigenvalues.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
    let thr = zero_threshold.unwrap_or(1e-7 * radius.max(f64::MIN_POSITIVE));
    let (n_neg, n_zero, n_pos) = counts(&eigenvalues, thr);
    let lo = counts(&eigenvalues, 0.8 * thr);
    let hi = counts(&eigenvalues, 1.2 * thr);
    let stable = lo == (n_neg, n_zero, n_pos) && hi == (n_neg, n_zero, n_pos);
    InertiaReport {
        eigenvalues,
        n_neg,
        n_zero,
        n_pos,
        zero_threshold: thr,
        stable,
        alt_counts: (lo, hi),
    }
}

/// Analytic Hessian at a critical point (gradient norm below `tol`).
pub fn hessian(
    torus: &FlatTorus,
    profile: &RadialProfile,
    lp: &DiscreteLoop,
    tol: f64,
) -> Result<DMatrix<f64>> {
    let g = discrete_action::gradient(torus, profile, lp)?;
    if g.norm() >= tol {
        return Err(CoreError::NotCritical { residual: g.norm(), tolerance: tol });
    }
    discrete_action::hessian_matrix(torus, profile, lp)
}

/// Symmetrized central finite differences of the analytic gradient;
/// an independent oracle for the analytic assembly.
pub fn hessian_fd(
    torus: &FlatTorus,
    profile: &RadialProfile,
    lp: &DiscreteLoop,
) -> Result<DMatrix<f64>> {
    let v = lp.to_vector();
    let d = v.len();
    let mut h = DMatrix::zeros(d, d);
    for k in 0..d {
        let step = 1e-4 * (1.0 + v[k].abs());
        let mut vp = v.clone();
        let mut vm = v.clone();
        vp[k] += step;
        vm[k] -= step;
        let gp = discrete_action::gradient(
            torus,
            profile,
            &DiscreteLoop::from_vector(torus, &vp, lp.r(), lp.durations().to_vec())?,
        )?;
        let gm = discrete_action::gradient(
            torus,
            profile,
            &DiscreteLoop::from_vector(torus, &vm, lp.r(), lp.durations().to_vec())?,
        )?;
        let col = (gp - gm) / (2.0 * step);
        for i in 0..d {
            h[(i, k)] = col[i];
        }
    }
    let sym = (&h + h.transpose()) * 0.5;
    Ok(sym)
}

/// Result of comparing the spectrum before and after adding an idle node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuspensionReport {
    pub n: usize,
    pub r: usize,
    pub before: (usize, usize, usize),
    pub after: (usize, usize, usize),
    pub neg_increment: usize,
    pub pos_increment: usize,
    pub zero_unchanged: bool,
    pub new_block_eigenvalues: Vec<f64>,
    pub new_block_signature_ok: bool,
}

impl SuspensionReport {
    pub fn passes(&self) -> bool {
        self.neg_increment == self.n
            && self.pos_increment == self.n
            && self.zero_unchanged
            && self.new_block_signature_ok
    }
}

/// Embed a critical loop with one idle node and compare inertia: the negative
/// and positive counts must each grow by n while the kernel is unchanged, and
/// the new node's own Hessian block must have signature (n, n) with
/// eigenvalues within 20% of +-1.
pub fn suspension_check(
    torus: &FlatTorus,
    profile: &RadialProfile,
    lp: &DiscreteLoop,
) -> Result<SuspensionReport> {
    let n = torus.dim();
    let h_r = hessian(torus, profile, lp, 1e-8)?;
    let before = inertia(&h_r, None);
    let emb = discrete_action::embed_add_node(torus, profile, lp)?;
    let h_r1 = hessian(torus, profile, &emb, 1e-8)?;
    let after = inertia(&h_r1, None);

    let r = lp.r();
    let block = DMatrix::from_fn(2 * n, 2 * n, |i, j| h_r1[(2 * n * r + i, 2 * n * r + j)]);
    let block_rep = inertia(&block, None);
    let sig_ok = block_rep.n_neg == n
        && block_rep.n_pos == n
        && block_rep
            .eigenvalues
            .iter()
            .all(|&e| (e.abs() - 1.0).abs() <= 0.2);

    Ok(SuspensionReport {
        n,
        r,
        before: (before.n_neg, before.n_zero, before.n_pos),
        after: (after.n_neg, after.n_zero, after.n_pos),
        neg_increment: after.n_neg - before.n_neg,
        pos_increment: after.n_pos - before.n_pos,
        zero_unchanged: after.n_zero == before.n_zero,
        new_block_eigenvalues: block_rep.eigenvalues,
        new_block_signature_ok: sig_ok,
    })
}
