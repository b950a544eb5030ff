//! The generalized reduction on a flat ambient C^n region.
//!
//! Segments flow under H(z) = (s/2) ||z||^2, whose time-t flow rotates every
//! complex coordinate by angle -s t, and consecutive segments are closed by
//! L-curves taken against a Lagrangian attached to each node. Every term is
//! quadratic in the node coordinates, so the whole reduction is a quadratic
//! form; gradients are assembled once through polarization and are exact.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::lagrangian::{lcurve_area, to_complex, to_real, CVec, LagrangianSubspace, StandardFormLoop};

/// How Lagrangians are attached to the loop nodes.
#[derive(Debug, Clone)]
pub enum Section {
    /// One fixed Lagrangian at every node.
    Constant(LagrangianSubspace),
    /// An explicit Lagrangian per node.
    PerNode(Vec<LagrangianSubspace>),
    /// gamma(j/r) for a standard-form loop.
    StandardForm(StandardFormLoop),
}

impl Section {
    fn node_frames(&self, r: usize) -> Vec<LagrangianSubspace> {
        match self {
            Section::Constant(l) => vec![l.clone(); r],
            Section::PerNode(ls) => {
                assert_eq!(ls.len(), r);
                ls.clone()
            }
            Section::StandardForm(sf) => {
                (0..r).map(|j| sf.frame_at(j as f64 / r as f64)).collect()
            }
        }
    }
}

/// The reduction on loops of r nodes in C^n.
#[derive(Debug, Clone)]
pub struct GeneralizedModel {
    n: usize,
    r: usize,
    frames: Vec<LagrangianSubspace>,
    /// rotation angle of the time-1 flow; the Hamiltonian is (s/2)||z||^2
    s: f64,
    wedge_threshold: f64,
    matrix: DMatrix<f64>,
}

fn rotate(z: &CVec, angle: f64) -> CVec {
    let ph = Complex64::from_polar(1.0, angle);
    CVec::from_fn(z.len(), |i, _| z[i] * ph)
}

impl GeneralizedModel {
    /// Build from a radial profile; only shapes with linear flat-space flow
    /// are supported (zero, and the scaled quadratic whose flow is a
    /// rotation by s per unit time).
    pub fn from_profile(
        n: usize,
        r: usize,
        section: Section,
        profile: &crate::hamiltonians::RadialProfile,
    ) -> Result<Self> {
        let s = match profile.kind {
            crate::hamiltonians::ProfileKind::Zero => 0.0,
            crate::hamiltonians::ProfileKind::QuadraticScaled { s } => s,
            _ => {
                return Err(CoreError::InvalidConfig(
                    "flat ambient reduction needs a zero or scaled-quadratic profile".into(),
                ))
            }
        };
        Self::new(n, r, section, s)
    }

    pub fn new(n: usize, r: usize, section: Section, s: f64) -> Result<Self> {
        if r < 3 {
            return Err(CoreError::InvalidConfig("need at least 3 nodes".into()));
        }
        let frames = section.node_frames(r);
        if frames.iter().any(|f| f.n() != n) {
            return Err(CoreError::InvalidConfig("section dimension mismatch".into()));
        }
        let mut model = Self {
            n,
            r,
            frames,
            s,
            wedge_threshold: 1e6,
            matrix: DMatrix::zeros(0, 0),
        };
        model.matrix = model.polarize();
        Ok(model)
    }

    pub fn with_wedge_threshold(mut self, threshold: f64) -> Self {
        self.wedge_threshold = threshold;
        self
    }

    pub fn dim(&self) -> usize {
        2 * self.n * self.r
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn node(&self, z: &DVector<f64>, j: usize) -> CVec {
        let n = self.n;
        to_complex(&DVector::from_fn(2 * n, |i, _| z[2 * n * (j % self.r) + i]))
    }

    fn set_node(v: &mut DVector<f64>, n: usize, j: usize, val: &CVec) {
        let re = to_real(val);
        for i in 0..2 * n {
            v[2 * n * j + i] = re[i];
        }
    }

    /// Closed-form value of the flow-segment integral of (lambda_0 - H dt):
    /// (Im(w^2) - Im(z^2)) / 4 summed over coordinates, w the rotated node.
    fn flow_term(&self, z: &CVec) -> f64 {
        let alpha = self.s / self.r as f64;
        let w = rotate(z, -alpha);
        let mut total = 0.0;
        for c in 0..z.len() {
            total += 0.25 * ((w[c] * w[c]).im - (z[c] * z[c]).im);
        }
        total
    }

    /// The incoming point z_j^- = flow over one segment from z_{j-1}.
    pub fn incoming(&self, z: &DVector<f64>, j: usize) -> CVec {
        let prev = (j + self.r - 1) % self.r;
        rotate(&self.node(z, prev), -self.s / self.r as f64)
    }

    /// Action value; errors if a node gap exceeds the wedge threshold.
    pub fn action(&self, z: &DVector<f64>) -> Result<f64> {
        for j in 0..self.r {
            let gap = (self.node(z, j) - self.incoming(z, j)).norm();
            if gap > self.wedge_threshold {
                return Err(CoreError::WedgeNotResolvable {
                    gap,
                    threshold: self.wedge_threshold,
                });
            }
        }
        Ok(self.eval_raw(z))
    }

    fn eval_raw(&self, z: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for j in 0..self.r {
            let zj = self.node(z, j);
            total += self.flow_term(&self.node(z, (j + self.r - 1) % self.r));
            total += lcurve_area(&self.frames[j], &zj, &self.incoming(z, j));
        }
        total
    }

    fn polarize(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        let mut diag = vec![0.0; d];
        for (a, da) in diag.iter_mut().enumerate() {
            let mut e = DVector::zeros(d);
            e[a] = 1.0;
            *da = self.eval_raw(&e);
            m[(a, a)] = *da;
        }
        for a in 0..d {
            let mut ea = DVector::zeros(d);
            ea[a] = 1.0;
            for b in (a + 1)..d {
                let mut eab = ea.clone();
                eab[b] = 1.0;
                let cross = 0.5 * (self.eval_raw(&eab) - diag[a] - diag[b]);
                m[(a, b)] = cross;
                m[(b, a)] = cross;
            }
        }
        m
    }

    /// The quadratic-form matrix M with action(z) = z^T M z.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Exact gradient 2 M z of the action.
    pub fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.matrix * z * 2.0
    }

    /// E = sum_j ||z_j - z_j^-||^2.
    pub fn energy(&self, z: &DVector<f64>) -> f64 {
        (0..self.r)
            .map(|j| (self.node(z, j) - self.incoming(z, j)).norm_squared())
            .sum()
    }

    /// Defect-scale gradient of E (least-squares convention, i.e. half the
    /// raw gradient of the sum of squares): per node eps_j - R^T eps_{j+1}.
    pub fn energy_defect_gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let alpha = self.s / self.r as f64;
        let eps: Vec<CVec> = (0..self.r)
            .map(|j| self.node(z, j) - self.incoming(z, j))
            .collect();
        let mut g = DVector::zeros(self.dim());
        for j in 0..self.r {
            let next = (j + 1) % self.r;
            // d eps_{j+1} / d z_j = -R, so the pullback is -R^T = -rotate(+alpha)
            let val = &eps[j] - rotate(&eps[next], alpha);
            Self::set_node(&mut g, self.n, j, &val);
        }
        g
    }

    /// Leading gradient term per node in the splitting adapted to L = i R^n:
    /// x-slot -Im(eps_j), y-slot +Re(eps_{j+1}).
    pub fn leading_term(&self, z: &DVector<f64>) -> DVector<f64> {
        let eps: Vec<CVec> = (0..self.r)
            .map(|j| self.node(z, j) - self.incoming(z, j))
            .collect();
        let mut g = DVector::zeros(self.dim());
        for j in 0..self.r {
            let next = (j + 1) % self.r;
            for i in 0..self.n {
                g[2 * self.n * j + i] = -eps[j][i].im;
                g[2 * self.n * j + self.n + i] = eps[next][i].re;
            }
        }
        g
    }

    pub fn eps_norms(&self, z: &DVector<f64>) -> Vec<f64> {
        (0..self.r)
            .map(|j| (self.node(z, j) - self.incoming(z, j)).norm())
            .collect()
    }
}

/// Analytic O(n r) gradient of the action for the constant vertical section
/// i R^n; the fast path for large-r sweeps. Cross-checked against the
/// polarized matrix in tests.
pub fn vertical_gradient(n: usize, r: usize, s: f64, z: &DVector<f64>) -> DVector<f64> {
    let alpha = s / r as f64;
    let (sa, ca) = alpha.sin_cos();
    let (s2, c2) = (2.0 * alpha).sin_cos();
    let node = |j: usize, i: usize| (z[2 * n * (j % r) + i], z[2 * n * (j % r) + n + i]);
    let mut g = DVector::zeros(2 * n * r);
    for j in 0..r {
        for i in 0..n {
            let (x, y) = node(j, i);
            let (px, py) = node(j + r - 1, i);
            let (nx, _) = node(j + 1, i);
            // incoming point w = R z_{j-1}
            let wy = -px * sa + py * ca;
            // own rotated image w' = R z_j
            let wpx = x * ca + y * sa;
            let wpy = -x * sa + y * ca;
            // flow term at z_j
            let mut gx = 0.5 * (y * (c2 - 1.0) - x * s2);
            let mut gy = 0.5 * (x * (c2 - 1.0) + y * s2);
            // L-curve of segment j: wy * (x - wx)
            gx += wy;
            // L-curve of segment j+1 through w' = R z_j
            gx += -sa * (nx - wpx) - wpy * ca;
            gy += ca * (nx - wpx) - wpy * sa;
            g[2 * n * j + i] = gx;
            g[2 * n * j + n + i] = gy;
        }
    }
    g
}

/// E = sum ||z_j - R z_{j-1}||^2 without building a model.
pub fn vertical_energy(n: usize, r: usize, s: f64, z: &DVector<f64>) -> f64 {
    let alpha = s / r as f64;
    let (sa, ca) = alpha.sin_cos();
    let node = |j: usize, i: usize| (z[2 * n * (j % r) + i], z[2 * n * (j % r) + n + i]);
    let mut e = 0.0;
    for j in 0..r {
        for i in 0..n {
            let (x, y) = node(j, i);
            let (px, py) = node(j + r - 1, i);
            let (wx, wy) = (px * ca + py * sa, -px * sa + py * ca);
            e += (x - wx) * (x - wx) + (y - wy) * (y - wy);
        }
    }
    e
}

/// Defect-scale (half) gradient of E: per node eps_j - R^T eps_{j+1}.
pub fn vertical_energy_defect_gradient(n: usize, r: usize, s: f64, z: &DVector<f64>) -> DVector<f64> {
    let alpha = s / r as f64;
    let (sa, ca) = alpha.sin_cos();
    let node = |j: usize, i: usize| (z[2 * n * (j % r) + i], z[2 * n * (j % r) + n + i]);
    let mut eps = vec![(0.0, 0.0); r * n];
    for j in 0..r {
        for i in 0..n {
            let (x, y) = node(j, i);
            let (px, py) = node(j + r - 1, i);
            let (wx, wy) = (px * ca + py * sa, -px * sa + py * ca);
            eps[j * n + i] = (x - wx, y - wy);
        }
    }
    let mut g = DVector::zeros(2 * n * r);
    for j in 0..r {
        for i in 0..n {
            let (ex, ey) = eps[j * n + i];
            let (fx, fy) = eps[((j + 1) % r) * n + i];
            // R^T rotates by +alpha
            let (rx, ry) = (fx * ca - fy * sa, fx * sa + fy * ca);
            g[2 * n * j + i] = ex - rx;
            g[2 * n * j + n + i] = ey - ry;
        }
    }
    g
}
