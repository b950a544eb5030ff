//! The acceptance suite: one entry per verified claim, runnable from the CLI
//! (`finred verify`) and from the `acceptance` integration test. Every
//! tolerance is pinned here, and the whole run is deterministic for a fixed
//! seed; the final criterion re-runs the suite and compares the serialized
//! reports byte for byte.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::discrete_action::{self, generalized, DiscreteLoop};
use crate::flat_geometry::{FlatTorus, TorusPoint};
use crate::hamiltonians::RadialProfile;
use crate::index_pair;
use crate::lagrangian::{self, LagrangianLoop, LagrangianSubspace, StandardFormLoop};
use crate::orbit_solver::{self, enumerate_orbits};
use crate::quad_forms::{self, DiscSection, ModeSpace};
use crate::spectral;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub details: serde_json::Value,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "C{:02} {} {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name
        )
    }
}

fn sub_seed(seed: u64, id: u32) -> u64 {
    seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(id as u64)
}

/// Run the full suite (criteria 1-10 plus the determinism re-run).
pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    let ids: Vec<u32> = (1..=11).collect();
    run_selected(seed, &ids)
}

pub fn run_selected(seed: u64, ids: &[u32]) -> Vec<CriterionResult> {
    let mut out = Vec::new();
    let base: Vec<u32> = ids.iter().cloned().filter(|&i| i != 11).collect();
    for &id in &base {
        out.push(run_criterion(id, seed));
    }
    if ids.contains(&11) {
        let subset = if base.is_empty() { vec![1, 3, 4] } else { base.clone() };
        let first: Vec<CriterionResult> = if base.is_empty() {
            subset.iter().map(|&i| run_criterion(i, seed)).collect()
        } else {
            out.clone()
        };
        let second: Vec<CriterionResult> =
            subset.iter().map(|&i| run_criterion(i, seed)).collect();
        let bytes_a = serde_json::to_string(&first).expect("serializable");
        let bytes_b = serde_json::to_string(&second).expect("serializable");
        let identical = bytes_a == bytes_b;
        out.push(CriterionResult {
            id: 11,
            name: "determinism: identical seed gives byte-identical reports".into(),
            passed: identical,
            details: json!({
                "criteria_compared": subset,
                "bytes": bytes_a.len(),
                "identical": identical,
            }),
        });
    }
    out
}

pub fn run_criterion(id: u32, seed: u64) -> CriterionResult {
    let s = sub_seed(seed, id);
    match id {
        1 => c01_mode_spectrum(s),
        2 => c02_negative_index(s),
        3 => c03_stabilization(s),
        4 => c04_maslov(s),
        5 => c05_orbit_recovery(s),
        6 => c06_gradient_fd(s),
        7 => c07_suspension(s),
        8 => c08_energy_chain(s),
        9 => c09_exit_certification(s),
        10 => c10_continuation(s),
        other => CriterionResult {
            id: other,
            name: "unknown criterion".into(),
            passed: false,
            details: json!({"error": "no such criterion"}),
        },
    }
}

fn c01_mode_spectrum(seed: u64) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_formula_err: f64 = 0.0;
    let mut max_oracle_err: f64 = 0.0;
    let mut cases = 0;
    let l = LagrangianSubspace::imaginary(1);
    for &r in &[5usize, 7, 9, 11, 13] {
        let form = quad_forms::build_br_l(1, r, &l).expect("build");
        for m in 1..r {
            let alpha = num_complex::Complex64::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            );
            let b = lagrangian::CVec::from_fn(1, |_, _| alpha);
            let z = ModeSpace::new(1, r, m).vector(&b);
            let value = form.value(&z);
            let expect = -(r as f64 / 2.0)
                * (2.0 * std::f64::consts::PI * m as f64 / r as f64).sin()
                * alpha.norm_sqr();
            max_formula_err = max_formula_err.max((value - expect).abs());
            // shoelace oracle on the polygon (z_j)
            let shoelace: f64 = (0..r)
                .map(|j| {
                    let k = (j + 1) % r;
                    0.5 * (z[2 * j] * z[2 * k + 1] - z[2 * k] * z[2 * j + 1])
                })
                .sum();
            max_oracle_err = max_oracle_err.max((value + shoelace).abs());
            cases += 1;
        }
    }
    let passed = max_formula_err < 1e-10 && max_oracle_err < 1e-10;
    CriterionResult {
        id: 1,
        name: "mode spectrum of the constant-Lagrangian form".into(),
        passed,
        details: json!({
            "cases": cases,
            "max_formula_error": max_formula_err,
            "max_shoelace_error": max_oracle_err,
            "tolerance": 1e-10,
        }),
    }
}

fn c02_negative_index(_seed: u64) -> CriterionResult {
    let mut cases = 0;
    let mut failures: Vec<String> = Vec::new();
    for n1 in 0..=2usize {
        for n2 in 1..=3usize {
            for d_plus in 0..=n2 {
                for d_minus in 0..=(n2 - d_plus) {
                    let d_zero = n2 - d_plus - d_minus;
                    for &r in &[5usize, 7, 9, 11, 13] {
                        cases += 1;
                        let sf = match StandardFormLoop::coordinate_split(n2, d_plus, d_minus) {
                            Ok(sf) => sf,
                            Err(e) => {
                                failures.push(format!("split {n2} {d_plus} {d_minus}: {e}"));
                                continue;
                            }
                        };
                        let l0 = (n1 > 0).then(|| LagrangianSubspace::imaginary(n1));
                        let got = quad_forms::build_br_gamma(n1, r, l0.as_ref(), &sf)
                            .and_then(|form| quad_forms::negative_index(&form, None));
                        let expect =
                            quad_forms::expected_negative_index(n1, n2, d_plus, d_zero, r);
                        match got {
                            Ok((nn, _)) if nn == expect => {}
                            Ok((nn, _)) => failures.push(format!(
                                "n1={n1} n2={n2} (+{d_plus},-{d_minus},0:{d_zero}) r={r}: got {nn}, expected {expect}"
                            )),
                            Err(e) => failures.push(format!(
                                "n1={n1} n2={n2} (+{d_plus},-{d_minus},0:{d_zero}) r={r}: {e}"
                            )),
                        }
                    }
                }
            }
        }
    }
    CriterionResult {
        id: 2,
        name: "negative-index count for standard-form loop forms".into(),
        passed: failures.is_empty(),
        details: json!({ "cases": cases, "failures": failures }),
    }
}

fn c03_stabilization(_seed: u64) -> CriterionResult {
    let grid = [0.05, 0.5, 1.5, 3.0, 6.0];
    let mut reports = Vec::new();
    let mut passed = true;
    for k in 1..=3usize {
        let section = DiscSection::Constant(LagrangianSubspace::imaginary(k));
        match quad_forms::stabilization_report(7, &section, &grid) {
            Ok(rep) => {
                passed &= rep.jump_is_2k && rep.constant_across_grid && rep.kernel_is_constants
                    && rep.kernel_dim_at_zero == 2 * k;
                reports.push(json!({
                    "k": k,
                    "jump": rep.jump,
                    "kernel_dim_at_zero": rep.kernel_dim_at_zero,
                    "kernel_is_constants": rep.kernel_is_constants,
                    "constant_across_grid": rep.constant_across_grid,
                    "table": rep.table,
                }));
            }
            Err(e) => {
                passed = false;
                reports.push(json!({"k": k, "error": e.to_string()}));
            }
        }
    }
    CriterionResult {
        id: 3,
        name: "stabilization jump 2k and constant inertia in s".into(),
        passed,
        details: json!({ "s_grid": grid, "reports": reports }),
    }
}

fn c04_maslov(seed: u64) -> CriterionResult {
    let mut failures: Vec<String> = Vec::new();
    let mut cases = 0;
    for n in 1..=4usize {
        for d_plus in 0..=n {
            for d_minus in 0..=(n - d_plus) {
                cases += 1;
                let sf = StandardFormLoop::coordinate_split(n, d_plus, d_minus).expect("split");
                match lagrangian::maslov_index(&LagrangianLoop::StandardForm(sf)) {
                    Ok(w) if w == d_plus as i64 - d_minus as i64 => {}
                    Ok(w) => failures.push(format!(
                        "n={n} ({d_plus},{d_minus}): winding {w} != {}",
                        d_plus as i64 - d_minus as i64
                    )),
                    Err(e) => failures.push(format!("n={n} ({d_plus},{d_minus}): {e}")),
                }
            }
        }
    }
    // 100 random loops: concatenation additivity and stabilization invariance
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loops: Vec<(LagrangianLoop, i64)> = (0..100)
        .map(|_| lagrangian::random_integer_loop(2 + (rng.random::<u32>() % 2) as usize, 128, &mut rng))
        .collect();
    for pair in loops.chunks(2) {
        if pair.len() < 2 || pair[0].0.frames(1)[0].n() != pair[1].0.frames(1)[0].n() {
            continue;
        }
        cases += 1;
        let (a, ka) = &pair[0];
        let (b, kb) = &pair[1];
        match lagrangian::concat(a, b, 128).and_then(|c| lagrangian::maslov_index(&c)) {
            Ok(w) if w == ka + kb => {}
            other => failures.push(format!("concat: {other:?} != {}", ka + kb)),
        }
    }
    for (lp, k) in &loops {
        cases += 1;
        match lagrangian::maslov_index(&lagrangian::stabilize_loop(lp, 128, 1)) {
            Ok(w) if w == *k => {}
            other => failures.push(format!("stabilize: {other:?} != {k}")),
        }
    }
    CriterionResult {
        id: 4,
        name: "winding index of standard-form loops, additivity, stabilization".into(),
        passed: failures.is_empty(),
        details: json!({ "cases": cases, "failures": failures }),
    }
}

fn c05_orbit_recovery(seed: u64) -> CriterionResult {
    let torus = FlatTorus::circle(1.0).expect("circle");
    let profile = RadialProfile::quadratic_capped(3.0, 0.25).expect("profile");
    let r = 48;
    let mut failures: Vec<String> = Vec::new();

    let families = match enumerate_orbits(&torus, &profile, 1e-3) {
        Ok(f) => f,
        Err(e) => {
            return CriterionResult {
                id: 5,
                name: "orbit recovery: enumeration and solver agree".into(),
                passed: false,
                details: json!({"error": e.to_string()}),
            }
        }
    };
    let mut expected: Vec<(i64, f64, f64)> =
        vec![(0, 0.0, 0.0), (1, 1.0 / 3.0, 1.0 / 6.0), (-1, 1.0 / 3.0, 1.0 / 6.0),
             (2, 2.0 / 3.0, 2.0 / 3.0), (-2, 2.0 / 3.0, 2.0 / 3.0)];
    expected.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(a.0.cmp(&b.0)));
    if families.len() != expected.len() {
        failures.push(format!("family count {} != {}", families.len(), expected.len()));
    } else {
        for (f, (w, radius, action)) in families.iter().zip(&expected) {
            if f.winding[0] != *w
                || (f.radius - radius).abs() > 1e-8
                || (f.action - action).abs() > 1e-8
            {
                failures.push(format!(
                    "family {:?}: radius {} action {}",
                    f.winding, f.radius, f.action
                ));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matched = 0;
    for i in 0..50 {
        let target = (rng.random::<u32>() as usize) % families.len();
        match orbit_solver::perturbed_seed(&torus, &profile, &families[target], r, 1e-2, &mut rng)
            .and_then(|s| orbit_solver::solve_critical(&torus, &profile, &s, 1e-9, &families))
        {
            Ok(rep) => match rep.matched_family {
                Some(fi) => {
                    matched += 1;
                    if (rep.action - families[fi].action).abs() > 1e-8 {
                        failures.push(format!("seed {i}: action off by {}", (rep.action - families[fi].action).abs()));
                    }
                }
                None => failures.push(format!(
                    "seed {i}: unmatched critical point, winding {:?} radius {}",
                    rep.winding, rep.radius_mean
                )),
            },
            Err(e) => failures.push(format!("seed {i}: {e}")),
        }
    }
    CriterionResult {
        id: 5,
        name: "orbit recovery: enumeration and solver agree".into(),
        passed: failures.is_empty(),
        details: json!({
            "families": families.iter().map(|f| json!({
                "winding": f.winding, "radius": f.radius, "action": f.action,
            })).collect::<Vec<_>>(),
            "solver_seeds": 50,
            "matched": matched,
            "failures": failures,
        }),
    }
}

fn c06_gradient_fd(seed: u64) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut failures = 0;
    for lengths in [vec![3.0], vec![3.0, 2.8]] {
        let torus = FlatTorus::new(lengths).expect("torus");
        let profile = RadialProfile::quadratic_capped(1.8, 0.2).expect("profile");
        for &r in &[8usize, 16, 32] {
            for _ in 0..200 {
                cases += 1;
                let lp = crate::sampling::random_admissible_loop(&torus, r, 0.8, 0.4, &mut rng);
                let g = discrete_action::gradient(&torus, &profile, &lp).expect("gradient");
                let v = lp.to_vector();
                let mut fd = DVector::zeros(v.len());
                for k in 0..v.len() {
                    let step = 1e-5 * (1.0 + v[k].abs());
                    let mut vp = v.clone();
                    let mut vm = v.clone();
                    vp[k] += step;
                    vm[k] -= step;
                    let ap = discrete_action::action(
                        &torus,
                        &profile,
                        &DiscreteLoop::from_vector(&torus, &vp, r, lp.durations().to_vec()).unwrap(),
                    )
                    .unwrap();
                    let am = discrete_action::action(
                        &torus,
                        &profile,
                        &DiscreteLoop::from_vector(&torus, &vm, r, lp.durations().to_vec()).unwrap(),
                    )
                    .unwrap();
                    fd[k] = (ap - am) / (2.0 * step);
                }
                let rel = (g.clone() - fd).norm() / (g.norm() + 1e-9 / 1e-6);
                worst = worst.max(rel);
                if rel >= 1e-6 {
                    failures += 1;
                }
            }
        }
    }
    CriterionResult {
        id: 6,
        name: "analytic gradient vs central finite differences".into(),
        passed: failures == 0,
        details: json!({
            "cases": cases,
            "worst_relative_error": worst,
            "tolerance": 1e-6,
            "failures": failures,
        }),
    }
}

fn c07_suspension(_seed: u64) -> CriterionResult {
    let mut failures: Vec<String> = Vec::new();
    let mut cases = 0;
    for lengths in [vec![1.0], vec![1.0, 1.0]] {
        let torus = FlatTorus::new(lengths.clone()).expect("torus");
        for r in 9..=15usize {
            // nonzero windings need mu above the shortest length, which the
            // chart condition C1/r < eps0/3 only allows from r = 13 up
            let profile = if r >= 13 {
                RadialProfile::quadratic_capped(1.05, 0.03).expect("profile")
            } else {
                RadialProfile::quadratic_capped(0.7, 0.1).expect("profile")
            };
            let families = match enumerate_orbits(&torus, &profile, 1e-3) {
                Ok(f) => f,
                Err(e) => {
                    failures.push(format!("dim {} r={r}: {e}", lengths.len()));
                    continue;
                }
            };
            for f in &families {
                cases += 1;
                let q0 = TorusPoint::new(&torus, DVector::from_fn(torus.dim(), |i, _| 0.17 * (i + 1) as f64));
                let rep = orbit_solver::dissect_orbit(&torus, &profile, f, &q0, r)
                    .and_then(|lp| spectral::suspension_check(&torus, &profile, &lp));
                match rep {
                    Ok(rep) if rep.passes() => {}
                    Ok(rep) => failures.push(format!(
                        "dim {} r={r} family {:?}: increments ({},{}), zero_unchanged={}, block_ok={}",
                        lengths.len(), f.winding, rep.neg_increment, rep.pos_increment,
                        rep.zero_unchanged, rep.new_block_signature_ok
                    )),
                    Err(e) => failures.push(format!("dim {} r={r} family {:?}: {e}", lengths.len(), f.winding)),
                }
            }
        }
    }
    CriterionResult {
        id: 7,
        name: "index increment n per added node, new block signature (n,n)".into(),
        passed: failures.is_empty(),
        details: json!({ "cases": cases, "failures": failures }),
    }
}

fn c08_energy_chain(seed: u64) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 2.0;
    let samples = 500;
    let mut per_r_ok: Vec<(usize, bool)> = Vec::new();
    for r in 3..=64usize {
        let mut ok = true;
        for n in 1..=2usize {
            for _ in 0..(samples / 2) {
                let z = crate::sampling::normal_vector(2 * n * r, &mut rng);
                let e = generalized::vertical_energy(n, r, s, &z);
                let ga = generalized::vertical_gradient(n, r, s, &z).norm_squared();
                let ge = generalized::vertical_energy_defect_gradient(n, r, s, &z).norm_squared();
                let tol = 1e-12 * (1.0 + e);
                if !(ge <= 5.0 * e + tol
                    && 5.0 * e <= 10.0 * ga + tol
                    && 10.0 * ga <= 20.0 * e + tol)
                {
                    ok = false;
                }
            }
        }
        per_r_ok.push((r, ok));
    }
    // r*: smallest r such that the chain holds for every tested r' >= r
    let mut r_star = None;
    for i in 0..per_r_ok.len() {
        if per_r_ok[i..].iter().all(|&(_, ok)| ok) {
            r_star = Some(per_r_ok[i].0);
            break;
        }
    }
    let passed = r_star.is_some_and(|r| r <= 64);
    CriterionResult {
        id: 8,
        name: "energy inequality chain on the flat generalized model".into(),
        passed,
        details: json!({
            "rotation": s,
            "samples_per_r": samples,
            "r_star": r_star,
            "failing_r": per_r_ok.iter().filter(|&&(_, ok)| !ok).map(|&(r, _)| r).collect::<Vec<_>>(),
        }),
    }
}

fn c09_exit_certification(seed: u64) -> CriterionResult {
    let torus = FlatTorus::circle(1.0).expect("circle");
    let profile = RadialProfile::quadratic_capped(0.7, 0.1).expect("profile");
    let window = (-0.05, 0.05);
    let mut failures: Vec<String> = Vec::new();
    let mut summaries = Vec::new();
    for (i, s) in [seed, seed ^ 1, seed ^ 2].iter().enumerate() {
        match index_pair::build_pair(&torus, &profile, 9, window, 1e-3, *s)
            .and_then(|spec| index_pair::certify_exit(&torus, &profile, &spec, 500, *s, i == 0))
        {
            Ok(cert) => {
                if !cert.passes() || cert.samples < 500 {
                    failures.push(format!(
                        "seed {i}: {} violations, {} returns, {} samples",
                        cert.violations.len(),
                        cert.returns,
                        cert.samples
                    ));
                }
                summaries.push(json!({
                    "seed_index": i,
                    "samples": cert.samples,
                    "exits_through_b": cert.exits_through_b,
                    "captured": cert.captured,
                    "horizon_hits": cert.horizon_hits,
                    "violations": cert.violations.len(),
                    "returns": cert.returns,
                    "perturbation_passed": cert.perturbation_passed,
                }));
            }
            Err(e) => failures.push(format!("seed {i}: {e}")),
        }
    }
    // negative control: undersized slope room must violate
    let negative = index_pair::build_pair(&torus, &profile, 9, window, 1e-3, seed)
        .map(|spec| index_pair::sabotage_slopes(&spec))
        .and_then(|bad| index_pair::certify_exit(&torus, &profile, &bad, 200, seed ^ 3, false));
    let negative_ok = match &negative {
        Ok(cert) => !cert.violations.is_empty(),
        Err(_) => false,
    };
    if !negative_ok {
        failures.push("negative control produced no violations".into());
    }
    CriterionResult {
        id: 9,
        name: "exit-only-through-B certification with negative control".into(),
        passed: failures.is_empty(),
        details: json!({
            "window": window,
            "runs": summaries,
            "negative_control_violations": negative.map(|c| c.violations.len()).unwrap_or(0),
            "failures": failures,
        }),
    }
}

fn c10_continuation(seed: u64) -> CriterionResult {
    let torus = FlatTorus::circle(1.0).expect("circle");
    let p0 = RadialProfile::quadratic_capped(3.0, 0.25).expect("p0");
    let p1 = RadialProfile::quadratic_capped(3.2, 0.25).expect("p1");
    let mut failures: Vec<String> = Vec::new();
    let positive =
        index_pair::continuation_check(&torus, &p0, &p1, 40, (-0.05, 0.8), 10, 40, seed);
    let positive_summary = match &positive {
        Ok(rep) => {
            if !rep.pass || !rep.family_set_constant {
                failures.push(format!(
                    "positive control failed: flagged {:?}",
                    rep.flagged_steps
                ));
            }
            json!({
                "steps": rep.steps.len(),
                "family_set_constant": rep.family_set_constant,
                "flagged": rep.flagged_steps,
            })
        }
        Err(e) => {
            failures.push(format!("positive control: {e}"));
            json!({"error": e.to_string()})
        }
    };
    let p2 = RadialProfile::quadratic_capped(4.5, 0.25).expect("p2");
    let negative =
        index_pair::continuation_check(&torus, &p0, &p2, 56, (-0.05, 2.0), 4, 8, seed ^ 5);
    let negative_summary = match &negative {
        Ok(rep) => {
            if rep.pass || rep.family_set_constant {
                failures.push("negative control not flagged".into());
            }
            json!({"flagged": rep.flagged_steps, "family_set_constant": rep.family_set_constant})
        }
        Err(e) => {
            failures.push(format!("negative control: {e}"));
            json!({"error": e.to_string()})
        }
    };
    CriterionResult {
        id: 10,
        name: "continuation keeps the certified family set constant".into(),
        passed: failures.is_empty(),
        details: json!({
            "positive": positive_summary,
            "negative": negative_summary,
            "failures": failures,
        }),
    }
}
