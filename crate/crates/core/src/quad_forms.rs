//! Explicit quadratic forms of the flat reductions: the constant-Lagrangian
//! form B_r^L, the standard-form-loop form B_r^gamma, the rotation-stabilized
//! family A^s, their inertia, and the mode-space analysis behind the
//! closed-form spectrum -(r/2) sin(2 pi m / r) ||alpha||^2.
//!
//! All forms are assembled from the same L-curve area primitive as the
//! generalized reduction and symmetrized by polarization, so values are exact
//! up to rounding and the cross-module equality checks are meaningful.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::lagrangian::{lcurve_area, to_real, CVec, LagrangianSubspace, StandardFormLoop};
use crate::spectral::inertia;

/// A real symmetric form on node-major realified coordinates, with metadata.
#[derive(Debug, Clone)]
pub struct QuadForm {
    pub matrix: DMatrix<f64>,
    pub meta: QuadFormMeta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadFormMeta {
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub dims: Option<(usize, usize, usize)>,
    pub s: Option<f64>,
}

impl QuadForm {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn value(&self, z: &DVector<f64>) -> f64 {
        (z.transpose() * &self.matrix * z)[(0, 0)]
    }

    /// Symmetry residual; zero by construction up to rounding.
    pub fn symmetry_residual(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).norm()
    }
}

fn polarize<F: Fn(&DVector<f64>) -> f64>(dim: usize, eval: F) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    let mut diag = vec![0.0; dim];
    for a in 0..dim {
        let mut e = DVector::zeros(dim);
        e[a] = 1.0;
        diag[a] = eval(&e);
        m[(a, a)] = diag[a];
    }
    for a in 0..dim {
        let mut ea = DVector::zeros(dim);
        ea[a] = 1.0;
        for b in (a + 1)..dim {
            let mut eab = ea.clone();
            eab[b] = 1.0;
            let cross = 0.5 * (eval(&eab) - diag[a] - diag[b]);
            m[(a, b)] = cross;
            m[(b, a)] = cross;
        }
    }
    m
}

fn node(z: &DVector<f64>, n: usize, j: usize, r: usize) -> CVec {
    let j = j % r;
    CVec::from_fn(n, |i, _| Complex64::new(z[2 * n * j + i], z[2 * n * j + n + i]))
}

/// Direct evaluation of the H = 0 form with a Lagrangian attached per node:
/// the sum of L-curve areas closing consecutive nodes.
pub fn eval_loop_form(frames: &[LagrangianSubspace], n: usize, z: &DVector<f64>) -> f64 {
    let r = frames.len();
    let mut total = 0.0;
    for (j, frame) in frames.iter().enumerate() {
        let zj = node(z, n, j, r);
        let prev = node(z, n, j + r - 1, r);
        total += lcurve_area(frame, &zj, &prev);
    }
    total
}

/// Constant-Lagrangian form B_r^L on C^{n r}.
pub fn build_br_l(n: usize, r: usize, l: &LagrangianSubspace) -> Result<QuadForm> {
    if r < 3 {
        return Err(CoreError::InvalidConfig("need r >= 3".into()));
    }
    if l.n() != n {
        return Err(CoreError::InvalidConfig("Lagrangian dimension mismatch".into()));
    }
    let frames = vec![l.clone(); r];
    let matrix = polarize(2 * n * r, |z| eval_loop_form(&frames, n, z));
    Ok(QuadForm {
        matrix,
        meta: QuadFormMeta { n1: n, n2: 0, r, dims: None, s: None },
    })
}

/// Block form for a constant factor L0 in C^{n1} plus a standard-form loop
/// factor in C^{n2}: coordinates are node-major with the n1 block first.
pub fn build_br_gamma(
    n1: usize,
    r: usize,
    l0: Option<&LagrangianSubspace>,
    sf: &StandardFormLoop,
) -> Result<QuadForm> {
    if r < 5 || r.is_multiple_of(2) {
        return Err(CoreError::InvalidConfig("need odd r >= 5".into()));
    }
    let n2 = sf.n();
    let n = n1 + n2;
    let frames: Vec<LagrangianSubspace> = (0..r)
        .map(|j| {
            let gamma = sf.frame_at(j as f64 / r as f64);
            match l0 {
                Some(l) => block_frame(l, &gamma),
                None => gamma,
            }
        })
        .collect();
    if n1 > 0 && l0.is_none() {
        return Err(CoreError::InvalidConfig("n1 > 0 needs a constant factor L0".into()));
    }
    let matrix = polarize(2 * n * r, |z| eval_loop_form(&frames, n, z));
    Ok(QuadForm {
        matrix,
        meta: QuadFormMeta {
            n1,
            n2,
            r,
            dims: Some((sf.d_plus(), sf.d_minus(), sf.d_zero())),
            s: None,
        },
    })
}

fn block_frame(a: &LagrangianSubspace, b: &LagrangianSubspace) -> LagrangianSubspace {
    let (na, nb) = (a.n(), b.n());
    let mut f = nalgebra::DMatrix::<Complex64>::zeros(na + nb, na + nb);
    for i in 0..na {
        for j in 0..na {
            f[(i, j)] = a.frame()[(i, j)];
        }
    }
    for i in 0..nb {
        for j in 0..nb {
            f[(na + i, na + j)] = b.frame()[(i, j)];
        }
    }
    LagrangianSubspace::from_frame(f).expect("block of unitary frames is unitary")
}

/// The rotation-stabilized family A^s on C^{k r}: flow segments rotate each
/// coordinate by s/r (Hamiltonian (s/2)||z||^2), L-curves close the gaps.
pub fn eval_as(frames: &[LagrangianSubspace], k: usize, s: f64, z: &DVector<f64>) -> f64 {
    let r = frames.len();
    let alpha = s / r as f64;
    let ph = Complex64::from_polar(1.0, -alpha);
    let mut total = 0.0;
    for (j, frame) in frames.iter().enumerate() {
        let zj = node(z, k, j, r);
        let prev = node(z, k, j + r - 1, r);
        let incoming = CVec::from_fn(k, |i, _| prev[i] * ph);
        for c in 0..k {
            let w = prev[c] * ph;
            total += 0.25 * ((w * w).im - (prev[c] * prev[c]).im);
        }
        total += lcurve_area(frame, &zj, &incoming);
    }
    total
}

/// Section choices for the disc factor.
#[derive(Debug, Clone)]
pub enum DiscSection {
    Constant(LagrangianSubspace),
    StandardForm(StandardFormLoop),
}

impl DiscSection {
    fn frames(&self, r: usize) -> Vec<LagrangianSubspace> {
        match self {
            DiscSection::Constant(l) => vec![l.clone(); r],
            DiscSection::StandardForm(sf) => {
                (0..r).map(|j| sf.frame_at(j as f64 / r as f64)).collect()
            }
        }
    }

    fn k(&self) -> usize {
        match self {
            DiscSection::Constant(l) => l.n(),
            DiscSection::StandardForm(sf) => sf.n(),
        }
    }
}

/// Build A^s for a disc factor of k complex dimensions.
pub fn build_as(r: usize, section: &DiscSection, s: f64) -> Result<QuadForm> {
    if r < 3 {
        return Err(CoreError::InvalidConfig("need r >= 3".into()));
    }
    if !(0.0..2.0 * std::f64::consts::PI).contains(&s) {
        return Err(CoreError::InvalidConfig("s must lie in [0, 2 pi)".into()));
    }
    let k = section.k();
    let frames = section.frames(r);
    let matrix = polarize(2 * k * r, |z| eval_as(&frames, k, s, z));
    Ok(QuadForm {
        matrix,
        meta: QuadFormMeta { n1: 0, n2: k, r, dims: None, s: Some(s) },
    })
}

/// Negative index with an orthonormal negative-eigenvector basis.
/// Errors with `UnstableInertia` if counts shift under a +-20% threshold move.
pub fn negative_index(form: &QuadForm, zero_threshold: Option<f64>) -> Result<(usize, DMatrix<f64>)> {
    let report = inertia(&form.matrix, zero_threshold);
    if !report.stable {
        let (lo, hi) = report.alt_counts;
        let alt = if lo != (report.n_neg, report.n_zero, report.n_pos) { lo } else { hi };
        return Err(CoreError::UnstableInertia {
            neg: report.n_neg,
            zero: report.n_zero,
            pos: report.n_pos,
            neg_alt: alt.0,
            zero_alt: alt.1,
            pos_alt: alt.2,
        });
    }
    let eig = nalgebra::SymmetricEigen::new(form.matrix.clone());
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let neg: Vec<usize> = idx
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] < -report.zero_threshold)
        .collect();
    let basis = DMatrix::from_fn(form.dim(), neg.len(), |i, c| eig.eigenvectors[(i, neg[c])]);
    Ok((report.n_neg, basis))
}

/// The closed-form negative index of B_r^gamma:
/// (n1+n2)(r-2) + n1 + dim V+ + (dim V+ + dim V0).
pub fn expected_negative_index(n1: usize, n2: usize, d_plus: usize, d_zero: usize, r: usize) -> usize {
    (n1 + n2) * (r - 2) + n1 + d_plus + (d_plus + d_zero)
}

/// The real 2n-dimensional mode space E_m = {(b rho^{m j})_j}.
#[derive(Debug, Clone)]
pub struct ModeSpace {
    pub m: usize,
    pub r: usize,
    pub n: usize,
}

impl ModeSpace {
    pub fn new(n: usize, r: usize, m: usize) -> Self {
        Self { m: m % r, r, n }
    }

    /// Realified loop (b rho^{m j})_j for a complex coefficient vector b.
    pub fn vector(&self, b: &CVec) -> DVector<f64> {
        assert_eq!(b.len(), self.n);
        let mut z = DVector::zeros(2 * self.n * self.r);
        for j in 0..self.r {
            let rho = Complex64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * (self.m * j % self.r) as f64 / self.r as f64,
            );
            let val = CVec::from_fn(self.n, |i, _| b[i] * rho);
            let re = to_real(&val);
            for i in 0..2 * self.n {
                z[2 * self.n * j + i] = re[i];
            }
        }
        z
    }

    /// A real basis of the mode space: b = e_c and b = i e_c.
    pub fn basis(&self) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity(2 * self.n);
        for c in 0..self.n {
            let mut b = CVec::zeros(self.n);
            b[c] = Complex64::new(1.0, 0.0);
            out.push(self.vector(&b));
            b[c] = Complex64::new(0.0, 1.0);
            out.push(self.vector(&b));
        }
        out
    }
}

/// Inertia of A^s across an s-grid plus the kernel/jump bookkeeping of the
/// stabilization identity: the s = 0 kernel is the 2k-dimensional constant
/// space, and for small s > 0 it joins the negative eigenspace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilizationReport {
    pub k: usize,
    pub r: usize,
    pub n_neg_at_zero: usize,
    pub kernel_dim_at_zero: usize,
    pub kernel_is_constants: bool,
    pub table: Vec<(f64, usize)>,
    pub jump: Option<usize>,
    pub jump_is_2k: bool,
    pub constant_across_grid: bool,
}

pub fn stabilization_report(
    r: usize,
    section: &DiscSection,
    s_grid: &[f64],
) -> Result<StabilizationReport> {
    let k = section.k();
    let base = build_as(r, section, 0.0)?;
    let rep0 = inertia(&base.matrix, None);
    let kernel_is_constants = kernel_matches_constants(&base, rep0.n_zero)?;
    let mut table = Vec::new();
    for &s in s_grid {
        let form = build_as(r, section, s)?;
        let (nn, _) = negative_index(&form, None)?;
        table.push((s, nn));
    }
    let jump = table.first().map(|&(_, nn)| nn - rep0.n_neg);
    let constant_across_grid = table.windows(2).all(|w| w[0].1 == w[1].1);
    Ok(StabilizationReport {
        k,
        r,
        n_neg_at_zero: rep0.n_neg,
        kernel_dim_at_zero: rep0.n_zero,
        kernel_is_constants,
        table,
        jump,
        jump_is_2k: jump == Some(2 * k),
        constant_across_grid,
    })
}

fn kernel_matches_constants(form: &QuadForm, n_zero: usize) -> Result<bool> {
    let k = form.meta.n2;
    let r = form.meta.r;
    if n_zero != 2 * k {
        return Ok(false);
    }
    // constant loops must be annihilated
    for c in 0..2 * k {
        let mut z = DVector::zeros(form.dim());
        for j in 0..r {
            z[2 * k * j + c] = 1.0;
        }
        let img = &form.matrix * &z;
        if img.norm() > 1e-9 * form.matrix.norm() {
            return Ok(false);
        }
    }
    Ok(true)
}
