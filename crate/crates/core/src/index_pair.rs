//! Candidate index pairs from cut-off functions, and Monte-Carlo exit
//! certification: integrate the negative pseudo-gradient from stratified
//! boundary samples and record through which face each trajectory leaves.
//!
//! The membership region is
//!   A = { a <= A_r <= b }  intersect  { g_i <= s_i + (t_i - s_i)(b - A_r)/(b - a) }
//! with exit set B = A intersect { A_r = a }. Certification is empirical and
//! reproducible: the certificate embeds its seed and sample counts.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discrete_action::{self, BrokenGeodesicData, DiscreteLoop};
use crate::error::{CoreError, Result};
use crate::flat_geometry::{CotangentPoint, FlatTorus, TorusPoint};
use crate::hamiltonians::RadialProfile;
use crate::orbit_solver::{dissect_orbit, enumerate_orbits, OrbitFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutoffKind {
    /// ||p_j||
    FiberNorm(usize),
    /// dist(q_j, q_{j+1})
    BaseGap(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cutoff {
    pub kind: CutoffKind,
    pub s: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexPairSpec {
    pub a: f64,
    pub b: f64,
    pub band: f64,
    pub cutoffs: Vec<Cutoff>,
    pub r: usize,
    /// margin kept between window edges and critical values
    pub margin: f64,
    /// empirical lower bound for ||X|| on the far fiber region
    pub x_lower_bound: f64,
}

/// Face identifiers in certificates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Face {
    Top,
    Bottom,
    Cutoff(usize),
}

/// Build the cut-off spec for a window around the enumerated critical values:
/// fiber-norm cutoffs start above twice the cap radius with slope room
/// (t - s) sized from the empirical lower bound of ||X|| out there, and
/// base-gap cutoffs live in (2 eps0/3, eps0).
pub fn build_pair(
    torus: &FlatTorus,
    profile: &RadialProfile,
    r: usize,
    window: (f64, f64),
    margin: f64,
    seed: u64,
) -> Result<IndexPairSpec> {
    let (a, b) = window;
    if a >= b || !a.is_finite() || !b.is_finite() {
        return Err(CoreError::InvalidConfig("window must have a < b".into()));
    }
    let families = enumerate_orbits(torus, profile, margin)?;
    for f in &families {
        for edge in [a, b] {
            if (f.action - edge).abs() < margin {
                return Err(CoreError::WindowHitsCriticalValue {
                    edge,
                    value: f.action,
                    margin,
                });
            }
        }
    }
    let cap = profile
        .cap_radius()
        .ok_or_else(|| CoreError::InvalidConfig("index pairs need a capped profile".into()))?;
    let s_p = 2.0 * cap * 1.05;
    let eps0 = torus.eps0();

    // empirical lower bound of ||X|| where some fiber norm exceeds 2 cap
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut c_emp = f64::INFINITY;
    let mut found = 0;
    while found < 200 {
        let p_scale = 2.0 * cap * (1.01 + 0.5 * rng.random::<f64>());
        let lp = crate::sampling::random_admissible_loop(torus, r, p_scale, 0.4, &mut rng);
        let p_max = lp.points().iter().map(|z| z.fiber.norm()).fold(0.0f64, f64::max);
        if p_max <= 2.0 * cap {
            continue;
        }
        found += 1;
        let x = discrete_action::pseudo_gradient(torus, profile, &lp)?;
        c_emp = c_emp.min(x.norm());
    }
    let t_p = s_p + 1.5 * (b - a) / c_emp;

    let s_f = (2.0 / 3.0 + 0.05) * eps0;
    let t_f = 0.95 * eps0;
    let mut cutoffs = Vec::new();
    for j in 0..r {
        cutoffs.push(Cutoff { kind: CutoffKind::FiberNorm(j), s: s_p, t: t_p });
    }
    for j in 0..r {
        cutoffs.push(Cutoff { kind: CutoffKind::BaseGap(j), s: s_f, t: t_f });
    }
    Ok(IndexPairSpec {
        a,
        b,
        band: 1e-6 * (b - a),
        cutoffs,
        r,
        margin,
        x_lower_bound: c_emp,
    })
}

/// Shrink the fiber-norm slope room to almost nothing; a negative control
/// that must produce exit violations.
pub fn sabotage_slopes(spec: &IndexPairSpec) -> IndexPairSpec {
    let mut out = spec.clone();
    for c in out.cutoffs.iter_mut() {
        if matches!(c.kind, CutoffKind::FiberNorm(_)) {
            c.t = c.s + 1e-4;
        }
    }
    out
}

/// Fused evaluation point: the loop, defect data, action, faces, and field.
struct EvalPoint {
    lp: DiscreteLoop,
    data: BrokenGeodesicData,
    action: f64,
    faces: Vec<f64>,
}

struct Evaluator<'a> {
    torus: &'a FlatTorus,
    profile: &'a RadialProfile,
    spec: &'a IndexPairSpec,
    durations: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(torus: &'a FlatTorus, profile: &'a RadialProfile, spec: &'a IndexPairSpec) -> Self {
        Self {
            torus,
            profile,
            spec,
            durations: vec![1.0 / spec.r as f64; spec.r],
        }
    }

    fn cutoff_value(&self, lp: &DiscreteLoop, kind: CutoffKind) -> f64 {
        match kind {
            CutoffKind::FiberNorm(j) => lp.points()[j].fiber.norm(),
            CutoffKind::BaseGap(j) => {
                let next = (j + 1) % lp.r();
                crate::flat_geometry::dist(self.torus, &lp.points()[j].base, &lp.points()[next].base)
            }
        }
    }

    fn eval(&self, state: &DVector<f64>) -> Result<EvalPoint> {
        let lp = DiscreteLoop::from_vector(self.torus, state, self.spec.r, self.durations.clone())?;
        let data = BrokenGeodesicData::compute(self.torus, self.profile, &lp)?;
        let action = discrete_action::action_with_data(self.profile, &lp, &data);
        let (a, b) = (self.spec.a, self.spec.b);
        let mut faces = Vec::with_capacity(2 + self.spec.cutoffs.len());
        faces.push(action - b); // Top
        faces.push(a - action); // Bottom
        for c in &self.spec.cutoffs {
            let allowance = c.s + (c.t - c.s) * (b - action) / (b - a);
            faces.push(self.cutoff_value(&lp, c.kind) - allowance);
        }
        Ok(EvalPoint { lp, data, action, faces })
    }

    fn x_field(&self, ep: &EvalPoint) -> DVector<f64> {
        discrete_action::pseudo_gradient_with_data(self.torus, &ep.lp, &ep.data)
    }

    fn face_name(&self, idx: usize) -> Face {
        match idx {
            0 => Face::Top,
            1 => Face::Bottom,
            i => Face::Cutoff(i - 2),
        }
    }
}

fn max_face(faces: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &c) in faces.iter().enumerate() {
        if c > best.1 {
            best = (i, c);
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub sample: usize,
    pub face: Face,
    pub time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExitCertificate {
    pub seed: u64,
    pub samples: usize,
    pub exits_through_b: usize,
    pub captured: usize,
    pub horizon_hits: usize,
    pub violations: Vec<ViolationRecord>,
    pub returns: usize,
    /// largest tested perturbation radius with zero violations, if probed
    pub perturbation_passed: Option<f64>,
}

impl ExitCertificate {
    pub fn passes(&self) -> bool {
        self.violations.is_empty() && self.returns == 0
    }
}

enum Outcome {
    ExitB { time: f64, state: DVector<f64> },
    Captured,
    Horizon,
    Violation { face: usize, time: f64 },
}

/// Integrate -X (RK4, dt = min(1e-3, 0.1/||X||), event bisection on the face
/// functions) until the trajectory leaves A or is captured near a critical set.
fn flow_until_exit(
    ev: &Evaluator,
    start: &DVector<f64>,
    perturb: Option<(&PerturbField, f64)>,
) -> Result<Outcome> {
    let capture_tol = 1e-7;
    // perturbed fields never vanish, so they get a short horizon instead
    let t_max = if perturb.is_some() { 5.0 } else { 40.0 };
    let max_steps = 80_000;
    let mut state = start.clone();
    let mut ep = ev.eval(&state)?;
    // a sample already in the exit band leaves immediately
    if (ep.action - ev.spec.a).abs() < ev.spec.band {
        return Ok(Outcome::ExitB { time: 0.0, state });
    }
    let field = |ev: &Evaluator, ep: &EvalPoint, state: &DVector<f64>| -> DVector<f64> {
        let mut x = ev.x_field(ep);
        if let Some((w, epsilon)) = perturb {
            x += w.eval(state) * epsilon;
        }
        x
    };
    let mut t = 0.0;
    for _ in 0..max_steps {
        let x1 = field(ev, &ep, &state);
        let xn = x1.norm();
        if perturb.is_none() && xn < capture_tol {
            return Ok(Outcome::Captured);
        }
        if t > t_max {
            return Ok(Outcome::Horizon);
        }
        if !xn.is_finite() || xn > 1e8 {
            return Err(CoreError::IntegrationBlowUp { norm: xn, time: t });
        }
        let dt = (1e-3_f64).min(0.1 / xn);
        let k1 = -x1;
        let s2 = &state + &k1 * (dt / 2.0);
        let k2 = -field(ev, &ev.eval(&s2)?, &s2);
        let s3 = &state + &k2 * (dt / 2.0);
        let k3 = -field(ev, &ev.eval(&s3)?, &s3);
        let s4 = &state + &k3 * dt;
        let k4 = -field(ev, &ev.eval(&s4)?, &s4);
        let new_state = &state + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let new_ep = ev.eval(&new_state)?;
        let (_, worst) = max_face(&new_ep.faces);
        if worst > 1e-9 {
            // bisect the step segment for the first crossing
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let sm = &state * (1.0 - mid) + &new_state * mid;
                let em = ev.eval(&sm)?;
                if max_face(&em.faces).1 > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let s_cross = &state * (1.0 - hi) + &new_state * hi;
            let e_cross = ev.eval(&s_cross)?;
            let (face, _) = max_face(&e_cross.faces);
            let time = t + hi * dt;
            if ev.face_name(face) == Face::Bottom {
                return Ok(Outcome::ExitB { time, state: s_cross });
            }
            return Ok(Outcome::Violation { face, time });
        }
        state = new_state;
        ep = new_ep;
        t += dt;
    }
    Ok(Outcome::Horizon)
}

/// After a B-exit, keep flowing for five exit times and watch for re-entry.
/// Descent is monotone for a pseudo-gradient, so once the action has sunk
/// three window-widths below `a` with every step decreasing we stop early;
/// any non-monotone step disables the shortcut.
fn returns_after_exit(
    ev: &Evaluator,
    exit_state: &DVector<f64>,
    exit_time: f64,
) -> Result<usize> {
    let horizon = 5.0 * exit_time.max(1e-3);
    let depth_out = ev.spec.a - 3.0 * (ev.spec.b - ev.spec.a);
    let mut state = exit_state.clone();
    let mut t = 0.0;
    let mut last_action = f64::INFINITY;
    let mut monotone = true;
    let mut returns = 0;
    while t < horizon {
        let ep = ev.eval(&state)?;
        if ep.faces.iter().all(|&c| c <= 0.0) && (ep.action - ev.spec.a).abs() > ev.spec.band {
            returns += 1;
            break;
        }
        if ep.action >= last_action + 1e-14 {
            monotone = false;
        }
        if monotone && ep.action < depth_out {
            break;
        }
        last_action = ep.action;
        let x = ev.x_field(&ep);
        let xn = x.norm();
        if xn < 1e-9 {
            break;
        }
        let dt = (1e-3_f64).min(0.1 / xn);
        // plain Euler is enough for the watchdog leg
        state -= x * dt;
        t += dt;
    }
    Ok(returns)
}

/// Smooth deterministic C^1 perturbation field with sup norm <= 1.
struct PerturbField {
    matrix: nalgebra::DMatrix<f64>,
    phases: DVector<f64>,
}

impl PerturbField {
    fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x517cc1b727220a95);
        let matrix = nalgebra::DMatrix::from_fn(dim, dim, |_, _| {
            crate::sampling::normal(&mut rng) / dim as f64
        });
        let phases = DVector::from_fn(dim, |_, _| rng.random::<f64>() * std::f64::consts::TAU);
        Self { matrix, phases }
    }

    fn eval(&self, state: &DVector<f64>) -> DVector<f64> {
        let arg = &self.matrix * state + &self.phases;
        DVector::from_fn(state.len(), |i, _| arg[i].sin() / (state.len() as f64).sqrt())
    }
}

fn interior_center(
    torus: &FlatTorus,
    profile: &RadialProfile,
    spec: &IndexPairSpec,
    families: &[OrbitFamily],
) -> Result<DVector<f64>> {
    // prefer a family dissection with action inside the window
    for f in families {
        if f.action > spec.a + spec.margin && f.action < spec.b - spec.margin {
            let q0 = TorusPoint::new(torus, DVector::from_fn(torus.dim(), |i, _| 0.31 * torus.lengths()[i]));
            let lp = dissect_orbit(torus, profile, f, &q0, spec.r)?;
            return Ok(lp.to_vector());
        }
    }
    Err(CoreError::InvalidConfig(
        "window contains no critical value to anchor the region".into(),
    ))
}

/// Draw a boundary point by walking from an interior anchor toward a
/// face-targeted random loop and bisecting the first face crossing.
fn sample_boundary(
    ev: &Evaluator,
    center: &DVector<f64>,
    target: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(usize, DVector<f64>)>> {
    let torus = ev.torus;
    let spec = ev.spec;
    let n = torus.dim();
    let r = spec.r;
    let cap_scale = spec.cutoffs.iter().find_map(|c| {
        matches!(c.kind, CutoffKind::FiberNorm(_)).then_some(c.t)
    });
    for _attempt in 0..24 {
        // targeted draw
        let face = ev.face_name(target);
        let mut lp = crate::sampling::random_admissible_loop(torus, r, 0.4, 0.35, rng);
        match face {
            Face::Top | Face::Bottom => {
                let scale = 0.3 + rng.random::<f64>() * 1.2;
                let pts: Vec<CotangentPoint> = lp
                    .points()
                    .iter()
                    .map(|z| CotangentPoint::new(z.base.clone(), &z.fiber * scale))
                    .collect();
                lp = DiscreteLoop::uniform(pts).unwrap();
            }
            Face::Cutoff(i) => match spec.cutoffs[i].kind {
                CutoffKind::FiberNorm(j) => {
                    let mut pts = lp.points().to_vec();
                    let t_p = cap_scale.unwrap_or(2.0);
                    let dir = crate::sampling::normal_vector(n, rng).normalize();
                    pts[j] = CotangentPoint::new(pts[j].base.clone(), dir * t_p * (1.05 + 0.3 * rng.random::<f64>()));
                    lp = DiscreteLoop::uniform(pts).unwrap();
                }
                CutoffKind::BaseGap(j) => {
                    // stretch the step after node j close to the chart bound
                    let mut pts = lp.points().to_vec();
                    let dir = crate::sampling::normal_vector(n, rng).normalize();
                    let stretch = torus.eps0() * (0.97 + 0.02 * rng.random::<f64>());
                    let next = (j + 1) % r;
                    let q_new = crate::flat_geometry::exp_map(torus, &pts[j].base, &(dir * stretch));
                    pts[next] = CotangentPoint::new(q_new, pts[next].fiber.clone());
                    lp = DiscreteLoop::uniform(pts).unwrap();
                }
            },
        }
        let z1 = lp.to_vector();
        // does the segment from the center leave A?
        let e1 = match ev.eval(&z1) {
            Ok(e) => e,
            Err(_) => continue,
        };
        if max_face(&e1.faces).1 <= 0.0 {
            continue; // interior draw, retry
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let sm = center * (1.0 - mid) + &z1 * mid;
            match ev.eval(&sm) {
                Ok(em) => {
                    if max_face(&em.faces).1 > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Err(_) => {
                    hi = mid;
                }
            }
        }
        let boundary = center * (1.0 - lo) + &z1 * lo;
        let eb = ev.eval(&boundary)?;
        let (face_hit, worst) = max_face(&eb.faces);
        if worst > 0.0 {
            continue; // numerical overshoot, retry
        }
        return Ok(Some((face_hit, boundary)));
    }
    Ok(None)
}

/// Monte-Carlo exit certification from stratified boundary samples.
pub fn certify_exit(
    torus: &FlatTorus,
    profile: &RadialProfile,
    spec: &IndexPairSpec,
    n_samples: usize,
    seed: u64,
    probe_perturbations: bool,
) -> Result<ExitCertificate> {
    let families = enumerate_orbits(torus, profile, spec.margin)?;
    let ev = Evaluator::new(torus, profile, spec);
    let center = interior_center(torus, profile, spec, &families)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_faces = 2 + spec.cutoffs.len();

    let mut cert = ExitCertificate {
        seed,
        samples: 0,
        exits_through_b: 0,
        captured: 0,
        horizon_hits: 0,
        violations: Vec::new(),
        returns: 0,
        perturbation_passed: None,
    };

    let mut boundary_points = Vec::with_capacity(n_samples);
    let mut k = 0;
    while boundary_points.len() < n_samples && k < 8 * n_samples {
        let target = k % n_faces;
        k += 1;
        if let Some((_face, point)) = sample_boundary(&ev, &center, target, &mut rng)? {
            boundary_points.push(point);
        }
    }

    for (i, start) in boundary_points.iter().enumerate() {
        cert.samples += 1;
        match flow_until_exit(&ev, start, None)? {
            Outcome::ExitB { time, state } => {
                cert.exits_through_b += 1;
                cert.returns += returns_after_exit(&ev, &state, time)?;
            }
            Outcome::Captured => cert.captured += 1,
            Outcome::Horizon => cert.horizon_hits += 1,
            Outcome::Violation { face, time } => cert.violations.push(ViolationRecord {
                sample: i,
                face: ev.face_name(face),
                time,
            }),
        }
    }

    if probe_perturbations && cert.violations.is_empty() {
        let dim = center.len();
        let w = PerturbField::new(dim, seed);
        let mut passed = None;
        'eps: for &epsilon in &[1e-4, 1e-3, 1e-2] {
            for start in boundary_points.iter().take(30) {
                if let Outcome::Violation { .. } = flow_until_exit(&ev, start, Some((&w, epsilon)))? {
                    break 'eps;
                }
            }
            passed = Some(epsilon);
        }
        cert.perturbation_passed = passed;
    }

    Ok(cert)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuationStep {
    pub t: f64,
    /// winding labels of the families with action inside the window
    pub families: Vec<Vec<i64>>,
    /// no critical value (of any family) sits within margin of a window edge
    pub values_isolated: bool,
    pub enumeration_failed: bool,
    pub certified: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub steps: Vec<ContinuationStep>,
    pub family_set_constant: bool,
    pub pass: bool,
    pub flagged_steps: Vec<usize>,
}

/// Walk the convex homotopy between two profiles, re-enumerating families
/// and re-certifying the pair at each step. The tracked set is the families
/// with critical value inside the window; a step is flagged when the
/// enumeration guard fires, that set changes, a critical value comes within
/// margin of a window edge, or certification fails. Crossings show up as
/// flags, not panics.
#[allow(clippy::too_many_arguments)]
pub fn continuation_check(
    torus: &FlatTorus,
    profile_0: &RadialProfile,
    profile_1: &RadialProfile,
    r: usize,
    window: (f64, f64),
    steps: usize,
    samples_per_step: usize,
    seed: u64,
) -> Result<ContinuationReport> {
    if steps < 2 {
        return Err(CoreError::InvalidConfig("need at least 2 steps".into()));
    }
    let margin = 1e-3;
    let (a, b) = window;
    // a homotopy whose starting point already fails isolation is a setup
    // error, not a flagged crossing
    for f in enumerate_orbits(torus, profile_0, margin)? {
        if (f.action - a).abs() <= margin || (f.action - b).abs() <= margin {
            return Err(CoreError::CriticalValueEscapesWindow {
                value: f.action,
                a,
                b,
                step: 0,
            });
        }
    }
    let mut report = ContinuationReport {
        steps: Vec::new(),
        family_set_constant: true,
        pass: true,
        flagged_steps: Vec::new(),
    };
    let mut base_set: Option<Vec<Vec<i64>>> = None;
    for k in 0..steps {
        let t = k as f64 / (steps - 1) as f64;
        let profile = RadialProfile::blend(profile_0, profile_1, t)?;
        let mut step = ContinuationStep {
            t,
            families: Vec::new(),
            values_isolated: true,
            enumeration_failed: false,
            certified: false,
        };
        match enumerate_orbits(torus, &profile, margin) {
            Ok(fams) => {
                step.families = fams
                    .iter()
                    .filter(|f| f.action > a && f.action < b)
                    .map(|f| f.winding.clone())
                    .collect();
                step.values_isolated = fams
                    .iter()
                    .all(|f| (f.action - a).abs() > margin && (f.action - b).abs() > margin);
                if step.values_isolated {
                    let spec = build_pair(torus, &profile, r, window, margin, seed ^ k as u64)?;
                    let cert =
                        certify_exit(torus, &profile, &spec, samples_per_step, seed ^ k as u64, false)?;
                    step.certified = cert.passes();
                }
            }
            Err(CoreError::SlopeHitsLengthSpectrum { .. }) => {
                step.enumeration_failed = true;
            }
            Err(e) => return Err(e),
        }
        let flagged = step.enumeration_failed
            || !step.values_isolated
            || !step.certified
            || base_set.as_ref().is_some_and(|s| *s != step.families);
        if let Some(sref) = &base_set {
            if *sref != step.families {
                report.family_set_constant = false;
            }
        } else if !step.enumeration_failed {
            base_set = Some(step.families.clone());
        }
        if flagged {
            report.flagged_steps.push(k);
            report.pass = false;
        }
        report.steps.push(step);
    }
    Ok(report)
}

/// Membership test for a single loop, used to place family dissections
/// inside or outside a spec.
pub fn contains_loop(
    torus: &FlatTorus,
    profile: &RadialProfile,
    spec: &IndexPairSpec,
    lp: &DiscreteLoop,
) -> Result<bool> {
    let ev = Evaluator::new(torus, profile, spec);
    let ep = ev.eval(&lp.to_vector())?;
    Ok(ep.faces.iter().all(|&c| c <= 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle() -> FlatTorus {
        FlatTorus::circle(1.0).unwrap()
    }

    fn small_profile() -> RadialProfile {
        RadialProfile::quadratic_capped(0.7, 0.1).unwrap()
    }

    #[test]
    fn build_pair_rich_window_contains_families() {
        let t = circle();
        let pr = RadialProfile::quadratic_capped(3.0, 0.25).unwrap();
        let spec = build_pair(&t, &pr, 40, (-0.05, 0.8), 1e-3, 0).unwrap();
        let fams = enumerate_orbits(&t, &pr, 1e-3).unwrap();
        assert_eq!(fams.len(), 5);
        let q0 = TorusPoint::new(&t, DVector::from_row_slice(&[0.12]));
        for f in &fams {
            let lp = dissect_orbit(&t, &pr, f, &q0, 40).unwrap();
            assert!(contains_loop(&t, &pr, &spec, &lp).unwrap(), "family {:?}", f.winding);
        }

        // a window excluding the zero family
        let spec2 = build_pair(&t, &pr, 40, (0.05, 0.8), 1e-3, 0).unwrap();
        let zero = &fams.iter().find(|f| f.winding == vec![0]).unwrap();
        let lp0 = dissect_orbit(&t, &pr, zero, &q0, 40).unwrap();
        assert!(!contains_loop(&t, &pr, &spec2, &lp0).unwrap());

        // degenerate window errors
        assert!(build_pair(&t, &pr, 40, (0.3, 0.3), 1e-3, 0).is_err());
        // window edge on a critical value errors
        assert!(matches!(
            build_pair(&t, &pr, 40, (0.0, 0.8), 1e-3, 0),
            Err(CoreError::WindowHitsCriticalValue { .. })
        ));
    }

    #[test]
    fn certify_small_run_no_violations() {
        let t = circle();
        let pr = small_profile();
        let spec = build_pair(&t, &pr, 9, (-0.05, 0.05), 1e-3, 7).unwrap();
        let cert = certify_exit(&t, &pr, &spec, 60, 7, false).unwrap();
        assert_eq!(cert.samples, 60);
        assert!(cert.passes(), "{cert:?}");
        assert!(cert.exits_through_b + cert.captured + cert.horizon_hits == 60);
    }

    #[test]
    fn sample_in_exit_band_leaves_at_time_zero() {
        let t = circle();
        let pr = small_profile();
        let spec = build_pair(&t, &pr, 9, (-0.05, 0.05), 1e-3, 3).unwrap();
        let ev = Evaluator::new(&t, &pr, &spec);
        let fams = enumerate_orbits(&t, &pr, 1e-3).unwrap();
        let center = interior_center(&t, &pr, &spec, &fams).unwrap();
        // walk down the bottom face direction: find a state with A_r = a
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut hit = None;
        for target in 0..40 {
            if let Some((face, point)) = sample_boundary(&ev, &center, target % 20, &mut rng).unwrap() {
                if ev.face_name(face) == Face::Bottom {
                    hit = Some(point);
                    break;
                }
            }
        }
        let start = hit.expect("no bottom-face sample found");
        match flow_until_exit(&ev, &start, None).unwrap() {
            Outcome::ExitB { time, .. } => assert!(time < 1e-6),
            other => panic!("expected immediate exit, got {:?}", match other {
                Outcome::Captured => "captured",
                Outcome::Horizon => "horizon",
                Outcome::Violation { .. } => "violation",
                Outcome::ExitB { .. } => unreachable!(),
            }),
        }
    }

    #[test]
    fn sabotaged_slopes_produce_violations() {
        let t = circle();
        let pr = small_profile();
        let spec = build_pair(&t, &pr, 9, (-0.05, 0.05), 1e-3, 11).unwrap();
        let bad = sabotage_slopes(&spec);
        let cert = certify_exit(&t, &pr, &bad, 120, 11, false).unwrap();
        assert!(!cert.violations.is_empty(), "negative control failed: {cert:?}");
    }

    #[test]
    fn cutoff_compatibility_on_far_fiber_region() {
        // |X . grad ||p_j||| <= ||X|| <= C^-1 X . grad A on the region where
        // some fiber norm exceeds twice the cap radius, with C the empirical
        // lower bound stored in the IndexPairSpec
        use rand::Rng;
        let t = circle();
        let pr = small_profile();
        let spec = build_pair(&t, &pr, 9, (-0.05, 0.05), 1e-3, 23).unwrap();
        let c = spec.x_lower_bound;
        assert!(c > 0.0);
        let cap = pr.cap_radius().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut tested = 0;
        while tested < 200 {
            let p_scale = 2.0 * cap * (1.01 + 0.5 * rng.random::<f64>());
            let lp = crate::sampling::random_admissible_loop(&t, 9, p_scale, 0.4, &mut rng);
            let p_max = lp.points().iter().map(|z| z.fiber.norm()).fold(0.0f64, f64::max);
            if p_max <= 2.0 * cap {
                continue;
            }
            tested += 1;
            let x = crate::discrete_action::pseudo_gradient(&t, &pr, &lp).unwrap();
            let g = crate::discrete_action::gradient(&t, &pr, &lp).unwrap();
            // grad ||p_j|| has unit norm, so the first inequality is Cauchy-Schwarz;
            // check the nontrivial chain ||X|| <= C^-1 X . grad A with slack for
            // samples the seeded estimate did not cover
            for j in 0..9 {
                let dnorm = x[2 * j + 1] * lp.points()[j].fiber[0].signum();
                assert!(dnorm.abs() <= x.norm() + 1e-12);
            }
            assert!(x.norm() <= (1.0 / (0.5 * c)) * x.dot(&g) + 1e-9);
        }
    }

    #[test]
    fn action_decreases_along_flow() {
        let t = circle();
        let pr = small_profile();
        let spec = build_pair(&t, &pr, 9, (-0.05, 0.05), 1e-3, 13).unwrap();
        let ev = Evaluator::new(&t, &pr, &spec);
        let fams = enumerate_orbits(&t, &pr, 1e-3).unwrap();
        let center = interior_center(&t, &pr, &spec, &fams).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        let mut target = 0;
        while checked < 5 {
            target += 1;
            let Some((_, point)) = sample_boundary(&ev, &center, target % 20, &mut rng).unwrap() else {
                continue;
            };
            checked += 1;
            // take explicit RK4 steps and watch the action
            let mut state = point;
            let mut last = ev.eval(&state).unwrap().action;
            for _ in 0..200 {
                let ep = ev.eval(&state).unwrap();
                let x = ev.x_field(&ep);
                if x.norm() < 1e-9 {
                    break;
                }
                let dt = (1e-3_f64).min(0.1 / x.norm());
                state -= x * dt;
                let a = ev.eval(&state).unwrap().action;
                assert!(a < last + 1e-12, "action rose along -X");
                last = a;
            }
        }
    }

    #[test]
    fn continuation_positive_and_negative() {
        let t = circle();
        let p0 = RadialProfile::quadratic_capped(3.0, 0.25).unwrap();
        let p1 = RadialProfile::quadratic_capped(3.2, 0.25).unwrap();
        let rep = continuation_check(&t, &p0, &p1, 40, (-0.05, 0.8), 3, 24, 19).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.family_set_constant);

        // raising mu toward 4.5 pulls the length-3 families (and later the
        // length-4 ones) into a window reaching up to 2: flagged
        let p2 = RadialProfile::quadratic_capped(4.5, 0.25).unwrap();
        let rep = continuation_check(&t, &p0, &p2, 56, (-0.05, 2.0), 4, 8, 19).unwrap();
        assert!(!rep.pass);
        assert!(!rep.flagged_steps.is_empty());
        assert!(!rep.family_set_constant);

        // a window edge sitting on a critical value of the start profile
        // is a setup error
        assert!(matches!(
            continuation_check(&t, &p0, &p1, 40, (0.0, 0.8), 3, 8, 19),
            Err(CoreError::CriticalValueEscapesWindow { .. })
        ));
    }
}
