//! The finite reduction of the action functional on broken flow loops.
//!
//! A `DiscreteLoop` holds r cotangent nodes z_j = (q_j, p_j) and segment
//! durations t_j summing to 1. Flowing z_{j-1} for time t_{j-1} gives the
//! incoming point z_j^-; the defects eps_q_j = log(q_j^-, q_j) and
//! eps_p_j = p_j - p_j^- vanish exactly on dissections of 1-periodic orbits.
//!
//! On a flat torus the radial flow keeps fibers constant, so the segment
//! integral of (lambda - H dt) is the closed-form tangent-intercept value per
//! node and the gradient of the reduction is exact:
//!
//!   grad_q_j A = -eps_p_j,     grad_p_j A = eps_q_{j+1}.
//!
//! No curvature correction terms appear; every test against finite
//! differences below checks the assembly, not an approximation.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::flat_geometry::{dist, exp_map, log_map, CotangentPoint, FlatTorus, TorusPoint};
use crate::hamiltonians::{action_of_orbit, flow, grad_bounds, shear_block, RadialProfile};

pub mod generalized;

/// A closed broken loop of r cotangent nodes with segment durations.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLoop {
    points: Vec<CotangentPoint>,
    durations: Vec<f64>,
}

impl DiscreteLoop {
    /// Uniform durations 1/r.
    pub fn uniform(points: Vec<CotangentPoint>) -> Result<Self> {
        let r = points.len();
        Self::with_durations(points, vec![1.0 / r as f64; r])
    }

    pub fn with_durations(points: Vec<CotangentPoint>, durations: Vec<f64>) -> Result<Self> {
        let r = points.len();
        if r < 3 {
            return Err(CoreError::InvalidConfig("need at least 3 nodes".into()));
        }
        if durations.len() != r {
            return Err(CoreError::InvalidConfig("durations/points length mismatch".into()));
        }
        let total: f64 = durations.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(CoreError::InvalidConfig(format!(
                "durations sum to {total}, expected 1"
            )));
        }
        if durations.iter().any(|&t| t < 0.0 || t >= 2.0 / r as f64) {
            return Err(CoreError::InvalidConfig(
                "each duration must lie in [0, 2/r)".into(),
            ));
        }
        Ok(Self { points, durations })
    }

    pub fn r(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].fiber.len()
    }

    pub fn points(&self) -> &[CotangentPoint] {
        &self.points
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    /// Flatten to node-major coordinates [q_0, p_0, q_1, p_1, ...].
    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.dim();
        let mut v = DVector::zeros(2 * n * self.r());
        for (j, z) in self.points.iter().enumerate() {
            for i in 0..n {
                v[2 * n * j + i] = z.base.coords()[i];
                v[2 * n * j + n + i] = z.fiber[i];
            }
        }
        v
    }

    /// Rebuild from node-major coordinates; q entries are reduced mod the lattice.
    pub fn from_vector(torus: &FlatTorus, v: &DVector<f64>, r: usize, durations: Vec<f64>) -> Result<Self> {
        let n = torus.dim();
        assert_eq!(v.len(), 2 * n * r);
        let mut points = Vec::with_capacity(r);
        for j in 0..r {
            let q = DVector::from_fn(n, |i, _| v[2 * n * j + i]);
            let p = DVector::from_fn(n, |i, _| v[2 * n * j + n + i]);
            points.push(CotangentPoint::new(TorusPoint::new(torus, q), p));
        }
        Self::with_durations(points, durations)
    }
}

/// Per-node derived data: incoming points and defects.
#[derive(Debug, Clone)]
pub struct BrokenGeodesicData {
    /// z_j^- = flow(z_{j-1}, t_{j-1})
    pub minus: Vec<CotangentPoint>,
    /// eps_q_j = log(q_j^-, q_j)
    pub eps_q: Vec<DVector<f64>>,
    /// eps_p_j = p_j - p_j^-
    pub eps_p: Vec<DVector<f64>>,
    /// max_j ||p_j||
    pub p_max: f64,
}

impl BrokenGeodesicData {
    pub fn compute(
        torus: &FlatTorus,
        profile: &RadialProfile,
        lp: &DiscreteLoop,
    ) -> Result<Self> {
        let r = lp.r();
        let eps0 = torus.eps0();
        let mut minus = Vec::with_capacity(r);
        let mut eps_q = Vec::with_capacity(r);
        let mut eps_p = Vec::with_capacity(r);
        let mut p_max: f64 = 0.0;
        for j in 0..r {
            let prev = (j + r - 1) % r;
            let zm = flow(torus, profile, &lp.points()[prev], lp.durations()[prev]);
            let gap = dist(torus, &zm.base, &lp.points()[j].base);
            if gap >= 2.0 * eps0 {
                return Err(CoreError::LoopOutOfChart { node: j, dist: gap, bound: 2.0 * eps0 });
            }
            let eq = log_map(torus, &zm.base, &lp.points()[j].base)?;
            // the fiber defect compares the node fiber against the transported
            // incoming fiber; transport is the identity on a flat torus
            let incoming = crate::flat_geometry::parallel_transport(
                torus,
                &zm.base,
                &lp.points()[j].base,
                &zm.fiber,
            );
            let ep = &lp.points()[j].fiber - incoming;
            p_max = p_max.max(lp.points()[j].fiber.norm());
            minus.push(zm);
            eps_q.push(eq);
            eps_p.push(ep);
        }
        Ok(Self { minus, eps_q, eps_p, p_max })
    }

    /// Zero exactly on r-dissections of 1-periodic orbits.
    pub fn is_orbit_dissection(&self, tol: f64) -> bool {
        self.eps_q.iter().all(|v| v.norm() <= tol) && self.eps_p.iter().all(|v| v.norm() <= tol)
    }
}

fn check_preconditions(torus: &FlatTorus, profile: &RadialProfile, lp: &DiscreteLoop) -> Result<()> {
    let (c1, _) = grad_bounds(profile);
    let r = lp.r() as f64;
    let bound = torus.eps0() / 3.0;
    if c1 / r >= bound || !(c1 / r).is_finite() {
        return Err(CoreError::PreconditionViolated { ratio: c1 / r, bound });
    }
    for j in 0..lp.r() {
        let next = (j + 1) % lp.r();
        let d = dist(torus, &lp.points()[j].base, &lp.points()[next].base);
        if d >= torus.eps0() {
            return Err(CoreError::LoopOutOfChart { node: j, dist: d, bound: torus.eps0() });
        }
    }
    Ok(())
}

/// The discrete action: per-segment tangent-intercept terms plus the
/// defect pairing sum_j p_j^- . eps_q_j.
pub fn action(torus: &FlatTorus, profile: &RadialProfile, lp: &DiscreteLoop) -> Result<f64> {
    check_preconditions(torus, profile, lp)?;
    let data = BrokenGeodesicData::compute(torus, profile, lp)?;
    Ok(action_with_data(profile, lp, &data))
}

pub(crate) fn action_with_data(profile: &RadialProfile, lp: &DiscreteLoop, data: &BrokenGeodesicData) -> f64 {
    let mut total = 0.0;
    for j in 0..lp.r() {
        let x = lp.points()[j].fiber.norm();
        total += action_of_orbit(profile, x) * lp.durations()[j];
        total += data.minus[j].fiber.dot(&data.eps_q[j]);
    }
    total
}

/// Exact analytic gradient, node-major [dq_0, dp_0, ...].
pub fn gradient(torus: &FlatTorus, profile: &RadialProfile, lp: &DiscreteLoop) -> Result<DVector<f64>> {
    check_preconditions(torus, profile, lp)?;
    let data = BrokenGeodesicData::compute(torus, profile, lp)?;
    Ok(gradient_with_data(lp, &data))
}

pub(crate) fn gradient_with_data(lp: &DiscreteLoop, data: &BrokenGeodesicData) -> DVector<f64> {
    let (r, n) = (lp.r(), lp.dim());
    let mut g = DVector::zeros(2 * n * r);
    for j in 0..r {
        let next = (j + 1) % r;
        for i in 0..n {
            g[2 * n * j + i] = -data.eps_p[j][i];
            g[2 * n * j + n + i] = data.eps_q[next][i];
        }
    }
    g
}

/// The pseudo-gradient X: equals the gradient where all eps_q are small,
/// drops the q-component where some eps_q is large, with a C^1 smoothstep
/// ramp on max_j ||eps_q_j|| over [eps0/4, eps0/3] in between.
/// Satisfies X . grad A >= ||X||^2 >= sum_j ||grad_p_j A||^2 by construction.
pub fn pseudo_gradient(torus: &FlatTorus, profile: &RadialProfile, lp: &DiscreteLoop) -> Result<DVector<f64>> {
    check_preconditions(torus, profile, lp)?;
    let data = BrokenGeodesicData::compute(torus, profile, lp)?;
    Ok(pseudo_gradient_with_data(torus, lp, &data))
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

pub(crate) fn pseudo_gradient_with_data(torus: &FlatTorus, lp: &DiscreteLoop, data: &BrokenGeodesicData) -> DVector<f64> {
    let (r, n) = (lp.r(), lp.dim());
    let eps0 = torus.eps0();
    let m = data.eps_q.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let s = smoothstep((m - eps0 / 4.0) / (eps0 / 3.0 - eps0 / 4.0));
    let mut x = gradient_with_data(lp, data);
    for j in 0..r {
        for i in 0..n {
            x[2 * n * j + i] *= 1.0 - s;
        }
    }
    x
}

/// E = sum_j ||z_j - z_j^-||^2 in the product flat metric.
pub fn energy(torus: &FlatTorus, profile: &RadialProfile, lp: &DiscreteLoop) -> Result<f64> {
    check_preconditions(torus, profile, lp)?;
    let data = BrokenGeodesicData::compute(torus, profile, lp)?;
    let mut e = 0.0;
    for j in 0..lp.r() {
        e += data.eps_q[j].norm_squared() + data.eps_p[j].norm_squared();
    }
    Ok(e)
}

/// The cut-off function values used to build index pairs:
/// (||p_1||..||p_r||, f_1..f_r, E) with f_j = dist(q_j, q_{j+1}).
pub fn cutoff_values(torus: &FlatTorus, profile: &RadialProfile, lp: &DiscreteLoop) -> Result<Vec<f64>> {
    let r = lp.r();
    let mut out = Vec::with_capacity(2 * r + 1);
    for j in 0..r {
        out.push(lp.points()[j].fiber.norm());
    }
    for j in 0..r {
        let next = (j + 1) % r;
        out.push(dist(torus, &lp.points()[j].base, &lp.points()[next].base));
    }
    out.push(energy(torus, profile, lp)?);
    Ok(out)
}

/// Embed an r-loop into an (r+1)-loop with an idle last segment: the new
/// node sits at q_new = q_0 with p_new the unique fiber point killing
/// grad_{q_new}, and the action value is preserved exactly.
pub fn embed_add_node(
    torus: &FlatTorus,
    profile: &RadialProfile,
    lp: &DiscreteLoop,
) -> Result<DiscreteLoop> {
    check_preconditions(torus, profile, lp)?;
    let data = BrokenGeodesicData::compute(torus, profile, lp)?;
    // With the idle segment, grad_{q_new} A = p_new^- - p_new where
    // p_new^- is the fiber flowed in from node r-1; the affine system in
    // p_new is -I, always regular on a flat torus.
    let p_new = data.minus[0].fiber.clone();
    let q_new = lp.points()[0].base.clone();
    let mut points = lp.points().to_vec();
    points.push(CotangentPoint::new(q_new, p_new));
    let mut durations = lp.durations().to_vec();
    durations.push(0.0);
    DiscreteLoop::with_durations(points, durations)
}

/// Dissect a closed orbit: q_j = q0 + (j/r) h'(x) w_hat, p_j = x w_hat.
pub fn dissect(
    torus: &FlatTorus,
    profile: &RadialProfile,
    winding: &DVector<f64>,
    radius: f64,
    q0: &TorusPoint,
    r: usize,
) -> Result<DiscreteLoop> {
    let n = torus.dim();
    let w_norm = winding.norm();
    let w_hat = if w_norm > 0.0 {
        winding / w_norm
    } else {
        DVector::zeros(n)
    };
    let speed = profile.h1(radius);
    let mut points = Vec::with_capacity(r);
    for j in 0..r {
        let q = exp_map(torus, q0, &(&w_hat * (speed * j as f64 / r as f64)));
        points.push(CotangentPoint::new(q, &w_hat * radius));
    }
    DiscreteLoop::uniform(points)
}

/// Per-node diagnostics row for reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeDiagnostics {
    pub node: usize,
    pub eps_q_norm: f64,
    pub eps_p_norm: f64,
    pub segment_action: f64,
    pub pairing: f64,
}

pub fn node_diagnostics(
    torus: &FlatTorus,
    profile: &RadialProfile,
    lp: &DiscreteLoop,
) -> Result<Vec<NodeDiagnostics>> {
    let data = BrokenGeodesicData::compute(torus, profile, lp)?;
    Ok((0..lp.r())
        .map(|j| NodeDiagnostics {
            node: j,
            eps_q_norm: data.eps_q[j].norm(),
            eps_p_norm: data.eps_p[j].norm(),
            segment_action: action_of_orbit(profile, lp.points()[j].fiber.norm())
                * lp.durations()[j],
            pairing: data.minus[j].fiber.dot(&data.eps_q[j]),
        })
        .collect())
}

/// CSV export of the per-node diagnostics.
pub fn diagnostics_csv(
    torus: &FlatTorus,
    profile: &RadialProfile,
    lp: &DiscreteLoop,
) -> Result<String> {
    let mut out = String::from("node,eps_q_norm,eps_p_norm,segment_action,pairing\n");
    for d in node_diagnostics(torus, profile, lp)? {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            d.node, d.eps_q_norm, d.eps_p_norm, d.segment_action, d.pairing
        ));
    }
    Ok(out)
}

/// JSON wire form: {"q": [[..]..], "p": [[..]..], "durations": [..]}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopWire {
    pub q: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub durations: Vec<f64>,
}

impl LoopWire {
    pub fn from_loop(lp: &DiscreteLoop) -> Self {
        Self {
            q: lp.points().iter().map(|z| z.base.coords().iter().cloned().collect()).collect(),
            p: lp.points().iter().map(|z| z.fiber.iter().cloned().collect()).collect(),
            durations: lp.durations().to_vec(),
        }
    }

    pub fn to_loop(&self, torus: &FlatTorus) -> Result<DiscreteLoop> {
        if self.q.len() != self.p.len() || self.q.len() != self.durations.len() {
            return Err(CoreError::InvalidConfig("loop arrays must share length".into()));
        }
        let points = self
            .q
            .iter()
            .zip(&self.p)
            .map(|(q, p)| {
                CotangentPoint::new(
                    TorusPoint::new(torus, DVector::from_row_slice(q)),
                    DVector::from_row_slice(p),
                )
            })
            .collect();
        DiscreteLoop::with_durations(points, self.durations.clone())
    }
}

/// The analytic Hessian of the reduction, node-major, assembled from the
/// exact gradient formulas. Blocks per node j (M_j the radial shear at p_j):
/// d(grad_q_j)/dp_j = -I, d(grad_q_{j+1})/dp_j = +I, d(grad_p_j)/dp_j = -t_j M_j.
pub fn hessian_matrix(
    torus: &FlatTorus,
    profile: &RadialProfile,
    lp: &DiscreteLoop,
) -> Result<nalgebra::DMatrix<f64>> {
    check_preconditions(torus, profile, lp)?;
    let (r, n) = (lp.r(), lp.dim());
    let d = 2 * n * r;
    let mut h = nalgebra::DMatrix::zeros(d, d);
    let q_idx = |j: usize, i: usize| 2 * n * (j % r) + i;
    let p_idx = |j: usize, i: usize| 2 * n * (j % r) + n + i;
    for j in 0..r {
        let m = shear_block(profile, &lp.points()[j].fiber);
        let t = lp.durations()[j];
        for a in 0..n {
            // grad_q_j depends on p_j (-I) and p_{j-1} (+I)
            h[(q_idx(j, a), p_idx(j, a))] += -1.0;
            h[(p_idx(j, a), q_idx(j, a))] += -1.0;
            h[(q_idx(j + 1, a), p_idx(j, a))] += 1.0;
            h[(p_idx(j, a), q_idx(j + 1, a))] += 1.0;
            for b in 0..n {
                h[(p_idx(j, a), p_idx(j, b))] += -t * m[(a, b)];
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn circle() -> FlatTorus {
        FlatTorus::circle(1.0).unwrap()
    }

    fn capped3() -> RadialProfile {
        RadialProfile::quadratic_capped(3.0, 0.25).unwrap()
    }

    fn random_admissible_loop(
        torus: &FlatTorus,
        r: usize,
        p_scale: f64,
        rng: &mut ChaCha8Rng,
    ) -> DiscreteLoop {
        crate::sampling::random_admissible_loop(torus, r, p_scale, 0.4, rng)
    }

    #[test]
    fn action_on_dissection_matches_orbit_action() {
        let t = circle();
        let pr = capped3();
        let w = DVector::from_row_slice(&[1.0]);
        let q0 = TorusPoint::new(&t, DVector::zeros(1));
        let lp = dissect(&t, &pr, &w, 1.0 / 3.0, &q0, 48).unwrap();
        let a = action(&t, &pr, &lp).unwrap();
        assert_relative_eq!(a, 1.0 / 6.0, epsilon = 1e-12);
        assert_relative_eq!(a, action_of_orbit(&pr, 1.0 / 3.0), epsilon = 1e-12);
    }

    #[test]
    fn action_trivial_cases() {
        let t = FlatTorus::new(vec![1.0, 1.0]).unwrap();
        let zp = RadialProfile::zero();
        let q0 = TorusPoint::new(&t, DVector::zeros(2));
        // constant loop with p = 0
        let pts = vec![CotangentPoint::new(q0.clone(), DVector::zeros(2)); 8];
        let lp = DiscreteLoop::uniform(pts).unwrap();
        assert_eq!(action(&t, &zp, &lp).unwrap(), 0.0);
        // wandering q with p = 0 still pairs against zero covectors
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pts = Vec::new();
        let mut q = DVector::zeros(2);
        for _ in 0..8 {
            pts.push(CotangentPoint::new(TorusPoint::new(&t, q.clone()), DVector::zeros(2)));
            q += DVector::from_fn(2, |_, _| (rng.random::<f64>() - 0.5) * 0.1);
        }
        let lp = DiscreteLoop::uniform(pts).unwrap();
        assert_eq!(action(&t, &zp, &lp).unwrap(), 0.0);
    }

    #[test]
    fn precondition_rejects_small_r() {
        let t = circle();
        let pr = capped3();
        let q0 = TorusPoint::new(&t, DVector::zeros(1));
        let lp = dissect(&t, &pr, &DVector::zeros(1), 0.0, &q0, 9).unwrap();
        assert!(matches!(
            action(&t, &pr, &lp),
            Err(CoreError::PreconditionViolated { .. })
        ));
    }

    #[test]
    fn gradient_vanishes_on_dissections() {
        let t = circle();
        let pr = capped3();
        let q0 = TorusPoint::new(&t, DVector::from_row_slice(&[0.37]));
        for (w, x) in [(0.0, 0.0), (1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0)] {
            let lp = dissect(&t, &pr, &DVector::from_row_slice(&[w]), x, &q0, 48).unwrap();
            let g = gradient(&t, &pr, &lp).unwrap();
            assert!(g.norm() < 1e-9, "w={w}: |g|={}", g.norm());
            assert_relative_eq!(energy(&t, &pr, &lp).unwrap(), 0.0, epsilon = 1e-20);
        }
    }

    fn fd_gradient(t: &FlatTorus, pr: &RadialProfile, lp: &DiscreteLoop) -> DVector<f64> {
        let v = lp.to_vector();
        let d = v.len();
        let mut g = DVector::zeros(d);
        for k in 0..d {
            let step = 1e-5 * (1.0 + v[k].abs());
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[k] += step;
            vm[k] -= step;
            let ap = action(t, pr, &DiscreteLoop::from_vector(t, &vp, lp.r(), lp.durations().to_vec()).unwrap()).unwrap();
            let am = action(t, pr, &DiscreteLoop::from_vector(t, &vm, lp.r(), lp.durations().to_vec()).unwrap()).unwrap();
            g[k] = (ap - am) / (2.0 * step);
        }
        g
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = FlatTorus::new(vec![3.0, 2.2]).unwrap();
        let pr = RadialProfile::quadratic_capped(1.8, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let lp = random_admissible_loop(&t, 16, 0.8, &mut rng);
            let g = gradient(&t, &pr, &lp).unwrap();
            let fd = fd_gradient(&t, &pr, &lp);
            let denom = g.norm().max(1e-9 / 1e-6);
            assert!((g - fd).norm() / denom < 1e-6);
        }
    }

    #[test]
    fn p_component_bound_is_tight_on_flat_torus() {
        // The flat-torus gradient identity grad_p_j A = eps_q_{j+1} is exact,
        // so the fitted constant in the K/r bound sits at rounding scale.
        let t = circle();
        let pr = RadialProfile::quadratic_capped(0.7, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for &r in &[16usize, 32, 64] {
            let mut k_fit: f64 = 0.0;
            for _ in 0..20 {
                let lp = random_admissible_loop(&t, r, 0.5, &mut rng);
                let data = BrokenGeodesicData::compute(&t, &pr, &lp).unwrap();
                let g = gradient(&t, &pr, &lp).unwrap();
                for j in 0..r {
                    let next = (j + 1) % r;
                    let gp = DVector::from_fn(1, |i, _| g[2 * j + 1 + i]);
                    let diff = (gp - &data.eps_q[next]).norm();
                    if data.eps_q[next].norm() > 1e-12 {
                        k_fit = k_fit.max(diff * r as f64 / data.eps_q[next].norm());
                    }
                }
            }
            assert!(k_fit < 1e-9, "K_fit={k_fit} at r={r}");
        }
    }

    #[test]
    fn pseudo_gradient_regimes_and_inequality() {
        let t = circle();
        let pr = RadialProfile::quadratic_capped(0.7, 0.1).unwrap();
        let q0 = TorusPoint::new(&t, DVector::zeros(1));
        // all eps_q = 0: X equals the gradient
        let lp = dissect(&t, &pr, &DVector::zeros(1), 0.0, &q0, 12).unwrap();
        let x = pseudo_gradient(&t, &pr, &lp).unwrap();
        let g = gradient(&t, &pr, &lp).unwrap();
        assert_eq!(x, g);

        // a winding loop with wide base steps: every eps_q is ~0.18 > eps0/3
        let pts: Vec<CotangentPoint> = (0..12)
            .map(|j| {
                CotangentPoint::new(
                    TorusPoint::new(&t, DVector::from_row_slice(&[j as f64 * 0.2])),
                    DVector::from_row_slice(&[0.3]),
                )
            })
            .collect();
        let lp = DiscreteLoop::uniform(pts).unwrap();
        let data = BrokenGeodesicData::compute(&t, &pr, &lp).unwrap();
        assert!(data.eps_q.iter().map(|v| v.norm()).fold(0.0f64, f64::max) > t.eps0() / 3.0);
        let x = pseudo_gradient(&t, &pr, &lp).unwrap();
        for j in 0..12 {
            assert_eq!(x[2 * j], 0.0, "q-component not dropped at node {j}");
        }

        // X . grad A >= ||X||^2 >= sum ||grad_p||^2 on random loops
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let lp = random_admissible_loop(&t, 12, 0.5, &mut rng);
            let g = gradient(&t, &pr, &lp).unwrap();
            let x = pseudo_gradient(&t, &pr, &lp).unwrap();
            let gp_sq: f64 = (0..12).map(|j| g[2 * j + 1] * g[2 * j + 1]).sum();
            assert!(x.dot(&g) >= x.norm_squared() - 1e-12);
            assert!(x.norm_squared() >= gp_sq - 1e-12);
        }
    }

    #[test]
    fn energy_zero_iff_dissection_and_sampled_bound() {
        let t = circle();
        let pr = RadialProfile::quadratic_capped(0.7, 0.1).unwrap();
        let q0 = TorusPoint::new(&t, DVector::zeros(1));
        let lp = dissect(&t, &pr, &DVector::from_row_slice(&[0.0]), 0.0, &q0, 12).unwrap();
        assert_eq!(energy(&t, &pr, &lp).unwrap(), 0.0);

        let (c1, _) = grad_bounds(&pr);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let r = 12usize;
            let lp = random_admissible_loop(&t, r, 0.4, &mut rng);
            let e = energy(&t, &pr, &lp).unwrap();
            assert!(e >= 0.0);
            // piecewise phase-space energy beta = r * sum dist(z_j, z_{j+1})^2
            let beta: f64 = (0..r)
                .map(|j| {
                    let next = (j + 1) % r;
                    let dq = dist(&t, &lp.points()[j].base, &lp.points()[next].base);
                    let dp = (&lp.points()[j].fiber - &lp.points()[next].fiber).norm();
                    r as f64 * (dq * dq + dp * dp)
                })
                .sum();
            assert!(
                e <= (2.0 * c1 * c1 + 2.0 * beta) / r as f64 + 1e-12,
                "E={e} bound={}",
                (2.0 * c1 * c1 + 2.0 * beta) / r as f64
            );
        }
    }

    #[test]
    fn cutoff_values_on_dissection() {
        let t = circle();
        let pr = capped3();
        let q0 = TorusPoint::new(&t, DVector::zeros(1));
        let r = 48;
        let lp = dissect(&t, &pr, &DVector::from_row_slice(&[1.0]), 1.0 / 3.0, &q0, r).unwrap();
        let cv = cutoff_values(&t, &pr, &lp).unwrap();
        for j in 0..r {
            assert_relative_eq!(cv[j], 1.0 / 3.0, epsilon = 1e-12);
            assert_relative_eq!(cv[r + j], 1.0 / r as f64, epsilon = 1e-12);
        }
        assert_relative_eq!(cv[2 * r], 0.0, epsilon = 1e-18);

        // monotone under fiber scaling
        let scaled: Vec<CotangentPoint> = lp
            .points()
            .iter()
            .map(|z| CotangentPoint::new(z.base.clone(), &z.fiber * 1.7))
            .collect();
        let lp2 = DiscreteLoop::uniform(scaled).unwrap();
        let cv2 = cutoff_values(&t, &pr, &lp2).unwrap();
        for j in 0..r {
            assert!(cv2[j] > cv[j]);
        }
    }

    #[test]
    fn embed_preserves_action_and_gradients() {
        let t = circle();
        let pr = RadialProfile::quadratic_capped(0.7, 0.1).unwrap();
        let q0 = TorusPoint::new(&t, DVector::from_row_slice(&[0.2]));
        // a critical dissection maps to a critical dissection
        let lp = dissect(&t, &pr, &DVector::zeros(1), 0.0, &q0, 12).unwrap();
        let emb = embed_add_node(&t, &pr, &lp).unwrap();
        assert_eq!(emb.r(), 13);
        assert!(gradient(&t, &pr, &emb).unwrap().norm() < 1e-12);
        assert_relative_eq!(
            action(&t, &pr, &emb).unwrap(),
            action(&t, &pr, &lp).unwrap(),
            epsilon = 1e-10
        );

        // random loops: action preserved, old-coordinate gradient unchanged
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let lp = random_admissible_loop(&t, 12, 0.4, &mut rng);
            let emb = embed_add_node(&t, &pr, &lp).unwrap();
            assert_relative_eq!(
                action(&t, &pr, &emb).unwrap(),
                action(&t, &pr, &lp).unwrap(),
                epsilon = 1e-10
            );
            let g_old = gradient(&t, &pr, &lp).unwrap();
            let g_new = gradient(&t, &pr, &emb).unwrap();
            for k in 0..g_old.len() {
                assert_relative_eq!(g_new[k], g_old[k], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn variable_durations_behave_like_uniform() {
        let t = circle();
        let pr = RadialProfile::quadratic_capped(0.7, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let r = 12;
        // random durations in (0.7, 1.3)/r, normalized; each stays below 2/r
        let raw: Vec<f64> = (0..r).map(|_| 0.7 + 0.6 * rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let mut durations: Vec<f64> = raw.iter().map(|u| u / total).collect();
        let drift: f64 = 1.0 - durations.iter().sum::<f64>();
        durations[0] += drift;

        // gradient still matches finite differences with non-uniform durations
        for _ in 0..10 {
            let base = random_admissible_loop(&t, r, 0.4, &mut rng);
            let lp =
                DiscreteLoop::with_durations(base.points().to_vec(), durations.clone()).unwrap();
            let g = gradient(&t, &pr, &lp).unwrap();
            let fd = fd_gradient(&t, &pr, &lp);
            assert!((g.clone() - fd).norm() / g.norm().max(1e-3) < 1e-6);
        }

        // a duration at or above 2/r is rejected
        let mut bad = vec![1.0 / r as f64; r];
        bad[0] = 2.0 / r as f64;
        bad[1] = 0.0;
        let base = random_admissible_loop(&t, r, 0.4, &mut rng);
        assert!(DiscreteLoop::with_durations(base.points().to_vec(), bad).is_err());
    }

    #[test]
    fn nonuniform_dissection_is_critical() {
        let t = circle();
        let pr = RadialProfile::quadratic_capped(1.05, 0.03).unwrap();
        let r = 14;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let raw: Vec<f64> = (0..r).map(|_| 0.7 + 0.6 * rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let mut durations: Vec<f64> = raw.iter().map(|u| u / total).collect();
        let drift: f64 = 1.0 - durations.iter().sum::<f64>();
        durations[0] += drift;
        let x = 1.0 / 1.05;
        let speed = pr.h1(x);
        let mut q = 0.2;
        let mut pts = Vec::with_capacity(r);
        for &tj in &durations {
            pts.push(CotangentPoint::new(
                TorusPoint::new(&t, DVector::from_row_slice(&[q])),
                DVector::from_row_slice(&[x]),
            ));
            q += speed * tj;
        }
        let lp = DiscreteLoop::with_durations(pts, durations).unwrap();
        assert!(gradient(&t, &pr, &lp).unwrap().norm() < 1e-12);
        assert_relative_eq!(
            action(&t, &pr, &lp).unwrap(),
            crate::hamiltonians::action_of_orbit(&pr, x),
            epsilon = 1e-12
        );
    }

    #[test]
    fn loop_wire_roundtrip() {
        let t = circle();
        let pr = capped3();
        let q0 = TorusPoint::new(&t, DVector::zeros(1));
        let lp = dissect(&t, &pr, &DVector::from_row_slice(&[1.0]), 1.0 / 3.0, &q0, 9).unwrap();
        let wire = LoopWire::from_loop(&lp);
        let s = serde_json::to_string(&wire).unwrap();
        let back: LoopWire = serde_json::from_str(&s).unwrap();
        assert_eq!(back.to_loop(&t).unwrap(), lp);
    }
}
