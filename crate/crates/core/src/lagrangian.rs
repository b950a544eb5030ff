//! Lagrangian subspaces of R^{2n} ~ C^n, loops of such subspaces, the
//! Maslov index as the winding number of det^2, and the wedge-map / L-curve
//! geometry used by the generalized reductions.
//!
//! A subspace is stored as a unitary frame U: the subspace is the real span
//! of U's columns. Frames U and U O (O real orthogonal) describe the same
//! subspace, so equality goes through orthogonal projectors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

/// Realify a complex vector as [Re; Im].
pub fn to_real(v: &CVec) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Inverse of `to_real`.
pub fn to_complex(v: &DVector<f64>) -> CVec {
    let n = v.len() / 2;
    CVec::from_fn(n, |i, _| Complex64::new(v[i], v[n + i]))
}

/// A Lagrangian subspace of C^n given by a unitary frame.
#[derive(Debug, Clone)]
pub struct LagrangianSubspace {
    frame: CMat,
}

impl LagrangianSubspace {
    pub fn from_frame(frame: CMat) -> Result<Self> {
        let n = frame.nrows();
        if frame.ncols() != n {
            return Err(CoreError::InvalidConfig("frame must be square".into()));
        }
        let gram = frame.adjoint() * &frame;
        let resid = (&gram - CMat::identity(n, n)).norm();
        if resid > 1e-10 {
            return Err(CoreError::InvalidConfig(format!(
                "frame not unitary: residual {resid}"
            )));
        }
        Ok(Self { frame })
    }

    /// R^n itself.
    pub fn real(n: usize) -> Self {
        Self { frame: CMat::identity(n, n) }
    }

    /// i R^n, the vertical subspace.
    pub fn imaginary(n: usize) -> Self {
        Self {
            frame: CMat::identity(n, n) * Complex64::new(0.0, 1.0),
        }
    }

    pub fn n(&self) -> usize {
        self.frame.nrows()
    }

    pub fn frame(&self) -> &CMat {
        &self.frame
    }

    /// Orthogonal projection onto the subspace: P(v) = U Re(U^* v).
    pub fn project(&self, v: &CVec) -> CVec {
        let coeffs = self.frame.adjoint() * v;
        let real_coeffs = CVec::from_fn(coeffs.len(), |i, _| Complex64::new(coeffs[i].re, 0.0));
        &self.frame * real_coeffs
    }

    /// The projector as a real 2n x 2n matrix; frame-gauge invariant.
    pub fn projector(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let mut e = CVec::zeros(n);
            if j < n {
                e[j] = Complex64::new(1.0, 0.0);
            } else {
                e[j - n] = Complex64::new(0.0, 1.0);
            }
            let pe = self.project(&e);
            if i < n {
                pe[i].re
            } else {
                pe[i - n].im
            }
        })
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.projector() - other.projector()).norm() < tol
    }

    /// Isotropy residual of the frame under the standard symplectic form:
    /// max |Im <U e_i, U e_j>|. Zero (to rounding) for any unitary frame.
    pub fn isotropy_residual(&self) -> f64 {
        let g = self.frame.adjoint() * &self.frame;
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                worst = worst.max(g[(i, j)].im.abs());
            }
        }
        worst
    }

    /// Gauge the frame by a real orthogonal matrix; same subspace.
    pub fn regauge(&self, o: &DMatrix<f64>) -> Self {
        let oc = CMat::from_fn(o.nrows(), o.ncols(), |i, j| Complex64::new(o[(i, j)], 0.0));
        Self { frame: &self.frame * oc }
    }

    /// Direct sum with R^k (standard stabilization).
    pub fn stabilize(&self, k: usize) -> Self {
        let n = self.n();
        let mut f = CMat::identity(n + k, n + k);
        for i in 0..n {
            for j in 0..n {
                f[(i, j)] = self.frame[(i, j)];
            }
        }
        Self { frame: f }
    }
}

/// Wedge decomposition at z: split u into the L part and the JL part,
/// walk the L part first. Flat ambient, so both legs are straight.
pub struct WedgeResult {
    pub midpoint: CVec,
    pub endpoint: CVec,
}

pub fn wedge_map(l: &LagrangianSubspace, z: &CVec, u: &CVec) -> WedgeResult {
    let u_l = l.project(u);
    WedgeResult {
        midpoint: z + &u_l,
        endpoint: z + u,
    }
}

/// Integral of lambda_0 = sum_c y_c dx_c along a straight segment.
fn segment_area(a: &CVec, b: &CVec) -> f64 {
    let mut s = 0.0;
    for c in 0..a.len() {
        s += 0.5 * (a[c].im + b[c].im) * (b[c].re - a[c].re);
    }
    s
}

/// Integral of lambda_0 along the two-leg L-curve from z_target to z.
///
/// The curve runs z_target -> z' -> z where z' = z + proj_L(z_target - z);
/// the first leg is parallel to JL, the second to L.
pub fn lcurve_area(l: &LagrangianSubspace, z: &CVec, z_target: &CVec) -> f64 {
    let u = z_target - z;
    let zp = z + l.project(&u);
    segment_area(z_target, &zp) + segment_area(&zp, z)
}

/// A loop of Lagrangian subspaces.
#[derive(Debug, Clone)]
pub enum LagrangianLoop {
    /// Cyclic list of frames; consecutive subspaces must stay close.
    Sampled(Vec<LagrangianSubspace>),
    /// e^{i pi t} V+ + e^{-i pi t} V- + V0 for orthogonal V+, V-, V0 spanning R^n.
    StandardForm(StandardFormLoop),
}

#[derive(Debug, Clone)]
pub struct StandardFormLoop {
    /// n x d_plus, orthonormal columns
    pub v_plus: DMatrix<f64>,
    pub v_minus: DMatrix<f64>,
    pub v_zero: DMatrix<f64>,
}

impl StandardFormLoop {
    pub fn new(v_plus: DMatrix<f64>, v_minus: DMatrix<f64>, v_zero: DMatrix<f64>) -> Result<Self> {
        let n = v_plus.nrows();
        if v_minus.nrows() != n || v_zero.nrows() != n {
            return Err(CoreError::InvalidConfig("bases must share ambient dim".into()));
        }
        if v_plus.ncols() + v_minus.ncols() + v_zero.ncols() != n {
            return Err(CoreError::InvalidConfig("dims of V+, V-, V0 must sum to n".into()));
        }
        let all = DMatrix::from_fn(n, n, |i, j| {
            if j < v_plus.ncols() {
                v_plus[(i, j)]
            } else if j < v_plus.ncols() + v_minus.ncols() {
                v_minus[(i, j - v_plus.ncols())]
            } else {
                v_zero[(i, j - v_plus.ncols() - v_minus.ncols())]
            }
        });
        let resid = (all.transpose() * &all - DMatrix::identity(n, n)).norm();
        if resid > 1e-10 {
            return Err(CoreError::InvalidConfig(format!(
                "V+, V-, V0 must be jointly orthonormal (residual {resid})"
            )));
        }
        Ok(Self { v_plus, v_minus, v_zero })
    }

    /// Coordinate-aligned triple with the given dimensions.
    pub fn coordinate_split(n: usize, d_plus: usize, d_minus: usize) -> Result<Self> {
        if d_plus + d_minus > n {
            return Err(CoreError::InvalidConfig("dims exceed ambient".into()));
        }
        let id = DMatrix::<f64>::identity(n, n);
        let v_plus = id.columns(0, d_plus).into_owned();
        let v_minus = id.columns(d_plus, d_minus).into_owned();
        let v_zero = id.columns(d_plus + d_minus, n - d_plus - d_minus).into_owned();
        Self::new(v_plus, v_minus, v_zero)
    }

    pub fn n(&self) -> usize {
        self.v_plus.nrows()
    }

    pub fn d_plus(&self) -> usize {
        self.v_plus.ncols()
    }

    pub fn d_minus(&self) -> usize {
        self.v_minus.ncols()
    }

    pub fn d_zero(&self) -> usize {
        self.v_zero.ncols()
    }

    pub fn frame_at(&self, t: f64) -> LagrangianSubspace {
        let n = self.n();
        let phase_p = Complex64::from_polar(1.0, std::f64::consts::PI * t);
        let phase_m = phase_p.conj();
        let mut f = CMat::zeros(n, n);
        let mut col = 0;
        for k in 0..self.v_plus.ncols() {
            for i in 0..n {
                f[(i, col)] = phase_p * self.v_plus[(i, k)];
            }
            col += 1;
        }
        for k in 0..self.v_minus.ncols() {
            for i in 0..n {
                f[(i, col)] = phase_m * self.v_minus[(i, k)];
            }
            col += 1;
        }
        for k in 0..self.v_zero.ncols() {
            for i in 0..n {
                f[(i, col)] = Complex64::new(self.v_zero[(i, k)], 0.0);
            }
            col += 1;
        }
        LagrangianSubspace { frame: f }
    }

    /// The index of the loop read off the dimension data.
    pub fn index(&self) -> i64 {
        self.d_plus() as i64 - self.d_minus() as i64
    }
}

impl LagrangianLoop {
    pub fn frames(&self, samples: usize) -> Vec<LagrangianSubspace> {
        match self {
            LagrangianLoop::Sampled(frames) => frames.clone(),
            LagrangianLoop::StandardForm(sf) => {
                (0..samples).map(|k| sf.frame_at(k as f64 / samples as f64)).collect()
            }
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = a % two_pi;
    if x > std::f64::consts::PI {
        x -= two_pi;
    } else if x <= -std::f64::consts::PI {
        x += two_pi;
    }
    x
}

fn winding_of_frames(frames: &[LagrangianSubspace]) -> Result<i64> {
    let m = frames.len();
    let phases: Vec<f64> = frames
        .iter()
        .map(|f| {
            let d = f.frame.clone().determinant();
            2.0 * d.arg()
        })
        .collect();
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    for k in 0..m {
        let step = wrap_angle(phases[(k + 1) % m] - phases[k]);
        max_step = max_step.max(step.abs());
        total += step;
    }
    if max_step >= std::f64::consts::FRAC_PI_2 {
        return Err(CoreError::SamplingTooCoarse { max_step });
    }
    let w = total / (2.0 * std::f64::consts::PI);
    let rounded = w.round();
    if (w - rounded).abs() > 1e-6 {
        return Err(CoreError::SamplingTooCoarse { max_step });
    }
    Ok(rounded as i64)
}

/// Maslov index: winding number of det(U(t))^2 accumulated by phase
/// unwrapping. Standard-form loops are resampled adaptively (cap 2^16);
/// user-sampled loops error if their steps are too coarse.
pub fn maslov_index(lp: &LagrangianLoop) -> Result<i64> {
    match lp {
        LagrangianLoop::Sampled(frames) => winding_of_frames(frames),
        LagrangianLoop::StandardForm(_) => {
            let mut samples = 256;
            loop {
                match winding_of_frames(&lp.frames(samples)) {
                    Ok(w) => return Ok(w),
                    Err(CoreError::SamplingTooCoarse { .. }) if samples < (1 << 16) => {
                        samples *= 2;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
}

/// Concatenate two loops sharing a base subspace.
pub fn concat(a: &LagrangianLoop, b: &LagrangianLoop, samples: usize) -> Result<LagrangianLoop> {
    let fa = a.frames(samples);
    let fb = b.frames(samples);
    if !fa[0].approx_eq(&fb[0], 1e-6) {
        return Err(CoreError::InvalidConfig(
            "loops must share their base subspace for concatenation".into(),
        ));
    }
    let mut frames = fa;
    frames.extend(fb);
    Ok(LagrangianLoop::Sampled(frames))
}

/// Stabilize every frame by a trivial R factor.
pub fn stabilize_loop(lp: &LagrangianLoop, samples: usize, k: usize) -> LagrangianLoop {
    LagrangianLoop::Sampled(lp.frames(samples).iter().map(|f| f.stabilize(k)).collect())
}

#[derive(Debug, Clone)]
pub struct StandardFormCertificate {
    pub sampled_index: i64,
    pub claimed_index: i64,
}

/// Verifier for a claimed standard form: the sampled winding must equal
/// dim V+ - dim V-. This is a checker, not a homotopy construction.
pub fn verify_standard_form(
    sampled: &LagrangianLoop,
    claimed: &StandardFormLoop,
) -> Result<StandardFormCertificate> {
    let sampled_index = maslov_index(sampled)?;
    let claimed_index = claimed.index();
    if sampled_index != claimed_index {
        return Err(CoreError::MismatchedMaslov {
            sampled: sampled_index,
            claimed: claimed_index,
        });
    }
    Ok(StandardFormCertificate { sampled_index, claimed_index })
}

/// Haar-ish random unitary via QR of a complex Gaussian matrix.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| {
        Complex64::new(
            crate::sampling::normal(rng),
            crate::sampling::normal(rng),
        )
    });
    let qr = g.qr();
    qr.q()
}

/// Random real orthogonal matrix via QR of a real Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| crate::sampling::normal(rng));
    g.qr().q()
}

/// A random smooth closed loop through R^n: product of coordinate rotations
/// e^{i pi k_c t} conjugated by a fixed orthogonal matrix. Its index is sum k_c.
pub fn random_integer_loop(n: usize, samples: usize, rng: &mut ChaCha8Rng) -> (LagrangianLoop, i64) {
    let ks: Vec<i64> = (0..n).map(|_| (rng.random::<u32>() % 7) as i64 - 3).collect();
    let v = random_orthogonal(n, rng);
    let vc = CMat::from_fn(n, n, |i, j| Complex64::new(v[(i, j)], 0.0));
    let frames = (0..samples)
        .map(|s| {
            let t = s as f64 / samples as f64;
            let mut d = CMat::zeros(n, n);
            for (c, &k) in ks.iter().enumerate() {
                d[(c, c)] = Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 * t);
            }
            let frame = &vc * d * vc.adjoint();
            LagrangianSubspace::from_frame(frame).expect("unitary by construction")
        })
        .collect();
    (LagrangianLoop::Sampled(frames), ks.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn frames_describe_lagrangians() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=4 {
            let u = random_unitary(n, &mut rng);
            let l = LagrangianSubspace::from_frame(u).unwrap();
            assert!(l.isotropy_residual() < 1e-10);
            // gauge invariance of the projector
            let o = random_orthogonal(n, &mut rng);
            let l2 = l.regauge(&o);
            assert!(l.approx_eq(&l2, 1e-9));
        }
    }

    #[test]
    fn projector_identities() {
        let l = LagrangianSubspace::imaginary(2);
        let v = CVec::from_fn(2, |i, _| Complex64::new(1.0 + i as f64, -2.0));
        let pv = l.project(&v);
        // projection onto iR^2 keeps the imaginary part
        assert_relative_eq!(pv[0].re, 0.0, epsilon = 1e-14);
        assert_relative_eq!(pv[0].im, -2.0, epsilon = 1e-14);
        let p = l.projector();
        assert!((p.clone() * &p - p).norm() < 1e-12);
    }

    #[test]
    fn maslov_constant_loop_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_unitary(3, &mut rng);
        let l = LagrangianSubspace::from_frame(u).unwrap();
        let lp = LagrangianLoop::Sampled(vec![l; 64]);
        assert_eq!(maslov_index(&lp).unwrap(), 0);
    }

    #[test]
    fn maslov_full_rotation_in_c1() {
        // gamma(t) = e^{i pi t} R: det^2 makes one full turn
        let frames: Vec<_> = (0..128)
            .map(|k| {
                let t = k as f64 / 128.0;
                let f = CMat::from_fn(1, 1, |_, _| {
                    Complex64::from_polar(1.0, std::f64::consts::PI * t)
                });
                LagrangianSubspace::from_frame(f).unwrap()
            })
            .collect();
        assert_eq!(maslov_index(&LagrangianLoop::Sampled(frames)).unwrap(), 1);
    }

    #[test]
    fn maslov_standard_form_examples() {
        let sf = StandardFormLoop::coordinate_split(4, 2, 1).unwrap();
        let lp = LagrangianLoop::StandardForm(sf);
        assert_eq!(maslov_index(&lp).unwrap(), 1);
    }

    #[test]
    fn maslov_exhaustive_small_dims() {
        for n in 1..=4usize {
            for d_plus in 0..=n {
                for d_minus in 0..=(n - d_plus) {
                    let sf = StandardFormLoop::coordinate_split(n, d_plus, d_minus).unwrap();
                    let got = maslov_index(&LagrangianLoop::StandardForm(sf)).unwrap();
                    assert_eq!(got, d_plus as i64 - d_minus as i64, "n={n} ({d_plus},{d_minus})");
                }
            }
        }
    }

    #[test]
    fn maslov_additive_and_stabilization_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..25 {
            let n = 2 + (rng.random::<u32>() % 2) as usize;
            let (a, ka) = random_integer_loop(n, 128, &mut rng);
            let (b, kb) = random_integer_loop(n, 128, &mut rng);
            assert_eq!(maslov_index(&a).unwrap(), ka);
            let cat = concat(&a, &b, 128).unwrap();
            assert_eq!(maslov_index(&cat).unwrap(), ka + kb);
            let st = stabilize_loop(&a, 128, 2);
            assert_eq!(maslov_index(&st).unwrap(), ka);
        }
    }

    #[test]
    fn maslov_gauge_invariance_per_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (lp, k) = random_integer_loop(3, 128, &mut rng);
        let frames = lp.frames(128);
        let regauged: Vec<_> = frames
            .iter()
            .map(|f| f.regauge(&random_orthogonal(3, &mut rng)))
            .collect();
        assert_eq!(maslov_index(&LagrangianLoop::Sampled(regauged)).unwrap(), k);
    }

    #[test]
    fn coarse_sampling_errors() {
        let sf = StandardFormLoop::coordinate_split(1, 1, 0).unwrap();
        let frames = LagrangianLoop::StandardForm(sf).frames(3);
        assert!(matches!(
            winding_of_frames(&frames),
            Err(CoreError::SamplingTooCoarse { .. })
        ));
    }

    #[test]
    fn wedge_examples() {
        let l = LagrangianSubspace::imaginary(2);
        let z = CVec::from_fn(2, |i, _| Complex64::new(i as f64, 0.0));
        // u in L: midpoint = endpoint = z + u
        let u = CVec::from_fn(2, |_, _| Complex64::new(0.0, 0.7));
        let w = wedge_map(&l, &z, &u);
        assert!((w.midpoint.clone() - (&z + &u)).norm() < 1e-14);
        assert!((w.endpoint.clone() - (&z + &u)).norm() < 1e-14);
        // u = 0
        let w0 = wedge_map(&l, &z, &CVec::zeros(2));
        assert!((w0.endpoint - &z).norm() < 1e-15);
        // generic u: midpoint keeps the real part of z
        let u = CVec::from_fn(2, |i, _| Complex64::new(0.3 + i as f64 * 0.1, -0.2));
        let w = wedge_map(&l, &z, &u);
        for c in 0..2 {
            assert_relative_eq!(w.midpoint[c].re, z[c].re, epsilon = 1e-14);
            assert_relative_eq!(w.midpoint[c].im, z[c].im + u[c].im, epsilon = 1e-14);
        }
    }

    #[test]
    fn lcurve_examples() {
        let l = LagrangianSubspace::imaginary(1);
        let z = CVec::from_fn(1, |_, _| Complex64::new(1.0, 0.0));
        // z_target = z
        assert_eq!(lcurve_area(&l, &z, &z), 0.0);
        // z_target = 0: first leg along x at height 0, second leg x-constant
        let zero = CVec::zeros(1);
        assert_eq!(lcurve_area(&l, &z, &zero), 0.0);
    }

    #[test]
    fn lcurve_loop_sum_matches_shoelace() {
        // sum of L-curve areas around a closed polygon equals the signed
        // lambda_0 integral, i.e. minus the shoelace area, plus vanishing
        // triangle corrections on pure modes; the pentagon is mode m=1.
        let l = LagrangianSubspace::imaginary(1);
        let r = 5;
        let pts: Vec<CVec> = (0..r)
            .map(|j| {
                CVec::from_fn(1, |_, _| {
                    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / r as f64)
                })
            })
            .collect();
        let mut total = 0.0;
        for j in 0..r {
            let prev = (j + r - 1) % r;
            total += lcurve_area(&l, &pts[j], &pts[prev]);
        }
        let shoelace: f64 = (0..r)
            .map(|j| {
                let k = (j + 1) % r;
                0.5 * (pts[j][0].re * pts[k][0].im - pts[k][0].re * pts[j][0].im)
            })
            .sum();
        assert_relative_eq!(total, -shoelace, epsilon = 1e-12);
        assert_relative_eq!(
            total,
            -2.5 * (2.0 * std::f64::consts::PI / 5.0).sin(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn lcurve_loop_sum_matches_staircase_shoelace_for_random_l() {
        // the closed concatenation of L-curves is a piecewise-linear curve
        // through the nodes and the wedge midpoints; its lambda_0 integral
        // equals minus the shoelace area of that path, for any Lagrangian
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let u = random_unitary(1, &mut rng);
            let l = LagrangianSubspace::from_frame(u).unwrap();
            let r = 6;
            let pts: Vec<CVec> = (0..r)
                .map(|_| {
                    CVec::from_fn(1, |_, _| {
                        Complex64::new(
                            crate::sampling::normal(&mut rng),
                            crate::sampling::normal(&mut rng),
                        )
                    })
                })
                .collect();
            let mut total = 0.0;
            let mut path: Vec<Complex64> = Vec::new();
            for j in 0..r {
                let prev = (j + r - 1) % r;
                total += lcurve_area(&l, &pts[j], &pts[prev]);
                let w = wedge_map(&l, &pts[j], &(&pts[prev] - &pts[j]));
                path.push(pts[prev][0]);
                path.push(w.midpoint[0]);
            }
            let m = path.len();
            let shoelace: f64 = (0..m)
                .map(|i| {
                    let k = (i + 1) % m;
                    0.5 * (path[i].re * path[k].im - path[k].re * path[i].im)
                })
                .sum();
            assert_relative_eq!(total, -shoelace, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn standard_form_verifier() {
        let sf = StandardFormLoop::coordinate_split(3, 2, 1).unwrap();
        let sampled = LagrangianLoop::Sampled(LagrangianLoop::StandardForm(sf.clone()).frames(256));
        let cert = verify_standard_form(&sampled, &sf).unwrap();
        assert_eq!(cert.sampled_index, 1);

        // perturbed frames, re-unitarized: winding is stable
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noisy: Vec<_> = sampled
            .frames(256)
            .iter()
            .map(|f| {
                let noise = CMat::from_fn(3, 3, |_, _| {
                    Complex64::new(
                        1e-3 * crate::sampling::normal(&mut rng),
                        1e-3 * crate::sampling::normal(&mut rng),
                    )
                });
                let m = f.frame() + noise;
                LagrangianSubspace::from_frame(m.qr().q()).unwrap()
            })
            .collect();
        let cert = verify_standard_form(&LagrangianLoop::Sampled(noisy), &sf).unwrap();
        assert_eq!(cert.sampled_index, 1);

        // swapping V+ and V- flips the claimed index
        let swapped = StandardFormLoop::new(
            sf.v_minus.clone(),
            sf.v_plus.clone(),
            sf.v_zero.clone(),
        )
        .unwrap();
        match verify_standard_form(&sampled, &swapped) {
            Err(CoreError::MismatchedMaslov { sampled: s, claimed: c }) => {
                assert_eq!(s - c, 2 * (sf.d_plus() as i64 - sf.d_minus() as i64));
            }
            other => panic!("expected mismatch, got {other:?}"),
        }
    }
}
