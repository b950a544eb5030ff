//! Radial Hamiltonian profiles H(q,p) = h(||p||) and their exact flows.
//!
//! Profiles are piecewise polynomials with stored coefficients, so h, h' and
//! h'' are all closed-form and C^2 across breakpoints. The flow of a radial
//! Hamiltonian on a flat torus moves the base point along the geodesic in the
//! fiber direction at speed h'(||p||) and leaves the fiber fixed; no
//! integrator is involved anywhere.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::flat_geometry::{CotangentPoint, FlatTorus, TorusPoint};

/// One polynomial piece, expanded around `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: f64,
    /// coeffs[k] multiplies (t - start)^k
    pub coeffs: Vec<f64>,
}

impl Piece {
    fn eval(&self, t: f64) -> f64 {
        let u = t - self.start;
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    fn d1(&self, t: f64) -> f64 {
        let u = t - self.start;
        let mut acc = 0.0;
        for k in (1..self.coeffs.len()).rev() {
            acc = acc * u + self.coeffs[k] * k as f64;
        }
        acc
    }

    fn d2(&self, t: f64) -> f64 {
        let u = t - self.start;
        let mut acc = 0.0;
        for k in (2..self.coeffs.len()).rev() {
            acc = acc * u + self.coeffs[k] * (k * (k - 1)) as f64;
        }
        acc
    }

    /// Re-expand the same polynomial around a new start point.
    fn rebase(&self, new_start: f64) -> Piece {
        let shift = new_start - self.start;
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for (k, o) in out.iter_mut().enumerate() {
            // binomial expansion of sum_j c_j (u + shift)^j
            let mut c = 0.0;
            for j in k..n {
                c += self.coeffs[j] * binom(j, k) * shift.powi((j - k) as i32);
            }
            *o = c;
        }
        Piece { start: new_start, coeffs: out }
    }

    fn scaled(&self, f: f64) -> Piece {
        Piece {
            start: self.start,
            coeffs: self.coeffs.iter().map(|c| c * f).collect(),
        }
    }
}

fn binom(n: usize, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

/// Piecewise polynomial on [0, inf); the last piece extends to infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    pieces: Vec<Piece>,
}

impl PiecewisePoly {
    pub fn new(pieces: Vec<Piece>) -> Self {
        assert!(!pieces.is_empty());
        Self { pieces }
    }

    fn piece_at(&self, t: f64) -> &Piece {
        let mut i = 0;
        while i + 1 < self.pieces.len() && t >= self.pieces[i + 1].start {
            i += 1;
        }
        &self.pieces[i]
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.piece_at(t).eval(t)
    }

    pub fn d1(&self, t: f64) -> f64 {
        self.piece_at(t).d1(t)
    }

    pub fn d2(&self, t: f64) -> f64 {
        self.piece_at(t).d2(t)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.start).collect()
    }

    /// Worst mismatch of value/first/second derivative across interior breakpoints.
    pub fn c2_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.pieces.len() {
            let b = self.pieces[i].start;
            let left = &self.pieces[i - 1];
            let right = &self.pieces[i];
            worst = worst
                .max((left.eval(b) - right.eval(b)).abs())
                .max((left.d1(b) - right.d1(b)).abs())
                .max((left.d2(b) - right.d2(b)).abs());
        }
        worst
    }
}

/// Shape metadata for a radial profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProfileKind {
    /// Quadratic mu/2 t^2 below (mu-eps)/mu, linear with slope mu above (mu+eps)/mu.
    QuadraticCapped { mu: f64, eps: f64 },
    /// h = 0.
    Zero,
    /// h = s/2 t^2; on flat C^n the induced flow rotates each complex
    /// coordinate by angle s per unit time.
    QuadraticScaled { s: f64 },
    /// Inner piece of a near-zero-section profile: convex bump to slope
    /// mu_l within delta, linear to eps1, concave level-off over `width`.
    NearLagrangianInner { mu_l: f64, delta: f64, eps1: f64, width: f64 },
    /// Outer piece: constant c out to big_r, convex ramp of `width` to slope mu_n.
    NearLagrangianOuter { mu_n: f64, c: f64, big_r: f64, width: f64 },
    /// Convex combination (1-t) p0 + t p1 of two capped profiles.
    Blend { t: f64, mu: f64, eps: f64 },
}

/// A C^2 radial profile with closed-form derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub kind: ProfileKind,
    h: PiecewisePoly,
    /// sup h' where finite (None for the uncapped quadratic).
    slope_at_infinity: Option<f64>,
    /// h'(t) is constant at the asymptotic slope for t >= cap_radius.
    cap_radius: Option<f64>,
}

impl RadialProfile {
    pub fn h(&self, t: f64) -> f64 {
        self.h.eval(t)
    }

    pub fn h1(&self, t: f64) -> f64 {
        self.h.d1(t)
    }

    pub fn h2(&self, t: f64) -> f64 {
        self.h.d2(t)
    }

    pub fn poly(&self) -> &PiecewisePoly {
        &self.h
    }

    pub fn slope_at_infinity(&self) -> Option<f64> {
        self.slope_at_infinity
    }

    pub fn cap_radius(&self) -> Option<f64> {
        self.cap_radius
    }

    /// h(t) = mu/2 t^2 on [0, (mu-eps)/mu], C^2 ramp, then slope mu.
    pub fn quadratic_capped(mu: f64, eps: f64) -> Result<Self> {
        if mu <= 0.0 || eps <= 0.0 || eps >= mu || !mu.is_finite() {
            return Err(CoreError::InvalidConfig(
                "quadratic_capped needs 0 < eps < mu".into(),
            ));
        }
        let t0 = (mu - eps) / mu;
        let w = 2.0 * eps / mu;
        let t1 = t0 + w;
        // ramp piece: h'' falls linearly from mu to 0 over [t0, t1]
        let h_t0 = 0.5 * mu * t0 * t0;
        let ramp = Piece {
            start: t0,
            coeffs: vec![h_t0, mu * t0, 0.5 * mu, -mu / (6.0 * w)],
        };
        let h_t1 = ramp.eval(t1);
        let pieces = vec![
            Piece { start: 0.0, coeffs: vec![0.0, 0.0, 0.5 * mu] },
            ramp,
            Piece { start: t1, coeffs: vec![h_t1, mu] },
        ];
        let profile = Self {
            kind: ProfileKind::QuadraticCapped { mu, eps },
            h: PiecewisePoly::new(pieces),
            slope_at_infinity: Some(mu),
            cap_radius: Some(t1),
        };
        debug_assert!(profile.h.c2_residual() < 1e-9);
        Ok(profile)
    }

    pub fn zero() -> Self {
        Self {
            kind: ProfileKind::Zero,
            h: PiecewisePoly::new(vec![Piece { start: 0.0, coeffs: vec![0.0] }]),
            slope_at_infinity: Some(0.0),
            cap_radius: Some(0.0),
        }
    }

    pub fn quadratic_scaled(s: f64) -> Self {
        Self {
            kind: ProfileKind::QuadraticScaled { s },
            h: PiecewisePoly::new(vec![Piece { start: 0.0, coeffs: vec![0.0, 0.0, 0.5 * s] }]),
            slope_at_infinity: None,
            cap_radius: None,
        }
    }

    /// Pointwise convex combination (1-t) a + t b of two capped profiles.
    pub fn blend(a: &RadialProfile, b: &RadialProfile, t: f64) -> Result<Self> {
        let (mu_a, eps_a) = match a.kind {
            ProfileKind::QuadraticCapped { mu, eps } => (mu, eps),
            _ => return Err(CoreError::InvalidConfig("blend expects capped profiles".into())),
        };
        let (mu_b, eps_b) = match b.kind {
            ProfileKind::QuadraticCapped { mu, eps } => (mu, eps),
            _ => return Err(CoreError::InvalidConfig("blend expects capped profiles".into())),
        };
        let mut starts: Vec<f64> = a
            .h
            .breakpoints()
            .into_iter()
            .chain(b.h.breakpoints())
            .collect();
        starts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        starts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
        let mut pieces = Vec::new();
        for s in starts {
            let pa = a.h.piece_at(s + 1e-15).rebase(s).scaled(1.0 - t);
            let pb = b.h.piece_at(s + 1e-15).rebase(s).scaled(t);
            let n = pa.coeffs.len().max(pb.coeffs.len());
            let mut coeffs = vec![0.0; n];
            for (k, c) in coeffs.iter_mut().enumerate() {
                *c = pa.coeffs.get(k).copied().unwrap_or(0.0)
                    + pb.coeffs.get(k).copied().unwrap_or(0.0);
            }
            pieces.push(Piece { start: s, coeffs });
        }
        let mu = (1.0 - t) * mu_a + t * mu_b;
        let eps = (1.0 - t) * eps_a + t * eps_b;
        let cap = a.cap_radius.unwrap_or(0.0).max(b.cap_radius.unwrap_or(0.0));
        Ok(Self {
            kind: ProfileKind::Blend { t, mu, eps },
            h: PiecewisePoly::new(pieces),
            slope_at_infinity: Some(mu),
            cap_radius: Some(cap),
        })
    }

    /// Upper bounds (C1, C2) for ||grad H|| and the fiber Hessian norm of H
    /// over the cap region. C1 is exact where the shape pins it; C2 comes
    /// from a dense grid with a 1.05 safety factor.
    pub fn grad_bounds(&self) -> (f64, f64) {
        // sup h' is the asymptotic slope for monotone shapes but the interior
        // peak for the level-off profiles
        let c1 = match self.kind {
            ProfileKind::NearLagrangianInner { mu_l, .. } => mu_l,
            ProfileKind::NearLagrangianOuter { mu_n, .. } => mu_n,
            _ => self.slope_at_infinity.unwrap_or(f64::INFINITY),
        };
        let r = match self.cap_radius {
            Some(r) if r > 0.0 => r,
            Some(_) => return (c1, 0.0),
            None => return (c1, f64::INFINITY),
        };
        let grid = 2048;
        let mut c2: f64 = 0.0;
        for i in 1..=grid {
            let t = r * i as f64 / grid as f64;
            c2 = c2.max(self.h2(t).abs()).max((self.h1(t) / t).abs());
        }
        (c1, 1.05 * c2)
    }

    /// Radii x with h'(x) = target, one per monotone piece that crosses it.
    /// Pieces where h' is constant are skipped (no transversal crossing).
    pub fn slope_crossings(&self, target: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let n = self.h.pieces.len();
        for i in 0..n {
            let lo = self.h.pieces[i].start;
            let hi = if i + 1 < n {
                self.h.pieces[i + 1].start
            } else {
                // last piece: h' constant for capped shapes; probe a finite span otherwise
                if self.slope_at_infinity.is_some() {
                    continue;
                }
                lo + 1e6
            };
            let (a, b) = (self.h1(lo), self.h1(hi));
            if (a - b).abs() < 1e-14 {
                continue;
            }
            let (lo_v, hi_v) = if a < b { (a, b) } else { (b, a) };
            if target < lo_v - 1e-14 || target > hi_v + 1e-14 {
                continue;
            }
            // bisection; h' is monotone inside each piece by construction
            let (mut x0, mut x1) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (x0 + x1);
                let v = self.h1(mid);
                let asc = b > a;
                if (v < target) == asc {
                    x0 = mid;
                } else {
                    x1 = mid;
                }
            }
            let x = 0.5 * (x0 + x1);
            // require transversality: a crossing pinned where h'' degenerates
            // (the flattening end of a cap ramp) is not an isolated family
            let curv_scale = self.h2(lo).abs().max(self.h2(hi).abs()).max(1e-30);
            if self.h2(x).abs() < 1e-6 * curv_scale {
                continue;
            }
            if out.iter().all(|&y: &f64| (y - x).abs() > 1e-10) {
                out.push(x);
            }
        }
        out
    }

    /// Slope values attained on pieces where h' is constant (the cap slope,
    /// plateaus, interior linear stretches).
    pub fn flat_slope_levels(&self) -> Vec<f64> {
        let mut levels = Vec::new();
        for p in &self.h.pieces {
            if p.coeffs.len() <= 2 || p.coeffs.iter().skip(2).all(|&c| c == 0.0) {
                let v = p.coeffs.get(1).copied().unwrap_or(0.0);
                if levels.iter().all(|&w: &f64| (w - v).abs() > 1e-12) {
                    levels.push(v);
                }
            }
        }
        levels
    }

    /// Guard against slopes pinned to the lattice length spectrum.
    ///
    /// A lattice norm strictly within `margin` of a flat slope level puts an
    /// orbit radius where h'' degenerates, making the family ill-conditioned;
    /// that is flagged. A norm exactly equal to a flat level marks a
    /// non-isolated level set and is excluded from enumeration by convention
    /// rather than flagged (the cap-level curves belong to the linear end).
    pub fn slope_spectrum_guard(&self, torus: &FlatTorus, margin: f64) -> Result<()> {
        let levels = self.flat_slope_levels();
        if levels.is_empty() {
            return Ok(());
        }
        let max_probe = levels.iter().fold(0.0f64, |m, &v| m.max(v)) + margin + 1.0;
        for length in torus.lattice_norms_up_to(max_probe) {
            for &v in &levels {
                let gap = (length - v).abs();
                if gap > 1e-12 * (1.0 + v.abs()) && gap < margin {
                    let mu = self.slope_at_infinity.unwrap_or(f64::NAN);
                    return Err(CoreError::SlopeHitsLengthSpectrum {
                        mu,
                        length,
                        lo: v - margin,
                        hi: v + margin,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Exact time-t Hamiltonian flow of H(q,p) = h(||p||) on a flat torus.
pub fn flow(
    torus: &FlatTorus,
    profile: &RadialProfile,
    z: &CotangentPoint,
    t: f64,
) -> CotangentPoint {
    let p = &z.fiber;
    let norm = p.norm();
    if norm == 0.0 {
        return z.clone();
    }
    let speed = profile.h1(norm);
    let disp = p * (t * speed / norm);
    CotangentPoint::new(
        TorusPoint::new(torus, z.base.coords() + disp),
        p.clone(),
    )
}

/// The radial shear block M(p): the fiber derivative of the flow direction.
/// M = h''(x) phat phat^T + (h'(x)/x)(I - phat phat^T); at p = 0 it is h''(0) I.
pub fn shear_block(profile: &RadialProfile, p: &DVector<f64>) -> DMatrix<f64> {
    let n = p.len();
    let x = p.norm();
    if x == 0.0 {
        return DMatrix::identity(n, n) * profile.h2(0.0);
    }
    let phat = p / x;
    let proj = &phat * phat.transpose();
    let tangential = DMatrix::identity(n, n) - &proj;
    proj * profile.h2(x) + tangential * (profile.h1(x) / x)
}

/// Exact Jacobian of `flow` in the (dq, dp) splitting: [[I, t M], [0, I]].
pub fn flow_differential(
    _torus: &FlatTorus,
    profile: &RadialProfile,
    z: &CotangentPoint,
    t: f64,
) -> DMatrix<f64> {
    let n = z.fiber.len();
    let m = shear_block(profile, &z.fiber);
    let mut d = DMatrix::identity(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            d[(i, n + j)] = t * m[(i, j)];
        }
    }
    d
}

/// Action of the orbit circle at radius x: x h'(x) - h(x), i.e. minus the
/// y-intercept of the tangent line to h at x.
pub fn action_of_orbit(profile: &RadialProfile, x: f64) -> f64 {
    x * profile.h1(x) - profile.h(x)
}

/// The two gradient/Hessian bounds used by chart preconditions.
pub fn grad_bounds(profile: &RadialProfile) -> (f64, f64) {
    profile.grad_bounds()
}

/// Parameters for the near-zero-section profile pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NearLagrangianParams {
    pub mu_l: f64,
    pub delta: f64,
    pub eps1: f64,
    /// width of the concave level-off; kept configurable
    pub level_width: f64,
    pub mu_n: f64,
    pub big_r: f64,
    pub ramp_width: f64,
}

/// The near-zero-section Hamiltonian shape: an inner radial profile (convex
/// to slope mu_l, then concave level-off to a constant plateau c) and an
/// outer radial profile (constant c, then convex ramp to slope mu_n).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NearLagrangianProfile {
    pub params: NearLagrangianParams,
    pub inner: RadialProfile,
    pub outer: RadialProfile,
    /// plateau constant
    pub c: f64,
}

/// Append two cubic pieces over [start, start+width] realizing a triangular
/// h'' with integral `gain` (so h' changes by `gain`, peak |h''| = 2|gain|/width).
fn push_triangle_ramp(pieces: &mut Vec<Piece>, start: f64, width: f64, gain: f64, h0: f64, h1_0: f64) -> (f64, f64) {
    let a = 4.0 * gain / (width * width);
    // first half: h'' = a u
    let p1 = Piece {
        start,
        coeffs: vec![h0, h1_0, 0.0, a / 6.0],
    };
    let mid = start + 0.5 * width;
    let h_mid = p1.eval(mid);
    let h1_mid = p1.d1(mid);
    // second half: h'' = a(width - u_total) = a*width/2 - a*u_local
    let p2 = Piece {
        start: mid,
        coeffs: vec![h_mid, h1_mid, 0.25 * a * width, -a / 6.0],
    };
    let end = start + width;
    let h_end = p2.eval(end);
    let h1_end = p2.d1(end);
    pieces.push(p1);
    pieces.push(p2);
    (h_end, h1_end)
}

impl NearLagrangianProfile {
    pub fn new(params: NearLagrangianParams) -> Result<Self> {
        let p = &params;
        if p.mu_l <= 0.0 || p.delta <= 0.0 || p.eps1 <= p.delta || p.level_width <= 0.0 {
            return Err(CoreError::InvalidConfig("need 0 < delta < eps1 and positive widths".into()));
        }
        if p.eps1 + p.level_width >= 2.0 * p.eps1 {
            return Err(CoreError::InvalidConfig("level_width must fit below 2*eps1".into()));
        }
        // inner: bump up to slope mu_l over [0, delta]
        let mut pieces = Vec::new();
        let (h_d, h1_d) = push_triangle_ramp(&mut pieces, 0.0, p.delta, p.mu_l, 0.0, 0.0);
        debug_assert!((h1_d - p.mu_l).abs() < 1e-12);
        // linear to eps1
        pieces.push(Piece { start: p.delta, coeffs: vec![h_d, p.mu_l] });
        let h_e1 = h_d + p.mu_l * (p.eps1 - p.delta);
        // concave level-off over [eps1, eps1+width]
        let (c, h1_end) = push_triangle_ramp(&mut pieces, p.eps1, p.level_width, -p.mu_l, h_e1, p.mu_l);
        debug_assert!(h1_end.abs() < 1e-12);
        // plateau
        pieces.push(Piece { start: p.eps1 + p.level_width, coeffs: vec![c] });
        let inner = RadialProfile {
            kind: ProfileKind::NearLagrangianInner {
                mu_l: p.mu_l,
                delta: p.delta,
                eps1: p.eps1,
                width: p.level_width,
            },
            h: PiecewisePoly::new(pieces),
            slope_at_infinity: Some(0.0),
            cap_radius: Some(p.eps1 + p.level_width),
        };

        // outer: constant c out to big_r, then ramp to slope mu_n
        let mut pieces = vec![Piece { start: 0.0, coeffs: vec![c] }];
        let (_h_end, h1_end) = push_triangle_ramp(&mut pieces, p.big_r, p.ramp_width, p.mu_n, c, 0.0);
        debug_assert!((h1_end - p.mu_n).abs() < 1e-12);
        let end = p.big_r + p.ramp_width;
        let h_end = pieces.last().unwrap().eval(end);
        pieces.push(Piece { start: end, coeffs: vec![h_end, p.mu_n] });
        let outer = RadialProfile {
            kind: ProfileKind::NearLagrangianOuter {
                mu_n: p.mu_n,
                c,
                big_r: p.big_r,
                width: p.ramp_width,
            },
            h: PiecewisePoly::new(pieces),
            slope_at_infinity: Some(p.mu_n),
            cap_radius: Some(end),
        };

        let out = Self { params, inner, outer, c };
        if out.inner.h.c2_residual() > 1e-9 || out.outer.h.c2_residual() > 1e-9 {
            return Err(CoreError::InvalidConfig("profile not C^2".into()));
        }
        Ok(out)
    }

    /// Enumerate orbit radii on both sides and classify their action values.
    ///
    /// Inner convex crossings must land in [0, delta*mu_l); inner concave and
    /// all outer crossings must land strictly below -delta*mu_l.
    pub fn critical_window_report(
        &self,
        torus_l: &FlatTorus,
        torus_n: &FlatTorus,
    ) -> WindowCheck {
        let p = &self.params;
        let window = p.delta * p.mu_l;
        let mut entries = Vec::new();
        for length in torus_l.lattice_norms_up_to(p.mu_l * 1.0001) {
            for x in self.inner.slope_crossings(length) {
                let action = action_of_orbit(&self.inner, x);
                let region = if x <= p.delta { Region::InnerConvex } else { Region::Concave };
                let ok = match region {
                    Region::InnerConvex => (0.0..window).contains(&action),
                    _ => action < -window,
                };
                entries.push(WindowEntry { length, radius: x, action, region, ok });
            }
        }
        for length in torus_n.lattice_norms_up_to(p.mu_n * 1.0001) {
            for x in self.outer.slope_crossings(length) {
                let action = action_of_orbit(&self.outer, x);
                let ok = action < -window;
                entries.push(WindowEntry { length, radius: x, action, region: Region::Outer, ok });
            }
        }
        let pass = entries.iter().all(|e| e.ok);
        WindowCheck { window, entries, pass }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    InnerConvex,
    Concave,
    Outer,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowEntry {
    pub length: f64,
    pub radius: f64,
    pub action: f64,
    pub region: Region,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowCheck {
    pub window: f64,
    pub entries: Vec<WindowEntry>,
    pub pass: bool,
}
