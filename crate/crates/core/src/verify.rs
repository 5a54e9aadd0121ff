//! Built-in reference checks run by `hypereq --cmd verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

use crate::equilibria::{analyze_all, find_equilibria, shooting_miss, EquilibriumRecord};
use crate::exceptional::{classify_exceptional, intzero_integral, intzero_scale, same_value_pairs, ExceptionalClass};
use crate::integrate::{integrate_variational, Profile};
use crate::levelsets::{critical_sum, orthogonality_residuals, regular_sum, AnalyticCurve, Curve};
use crate::perturb::{bifurcation_sweep, perturbation_scan, ParameterFamily, ParameterKind};
use crate::poly::Poly;
use crate::problem::{ProblemSpec, ToleranceSet};
use crate::spectrum::{eigenvalues_sl, prufer_eigenvalues, wronskian_constancy, Base};

const SEED: u64 = 0x5eed_2024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Observed error (or count mismatch) of the check.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }
}

fn check(name: &str, value: f64, tolerance: f64, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: value <= tolerance,
        value,
        tolerance,
        detail,
    }
}

fn failed(name: &str, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: false,
        value: f64::INFINITY,
        tolerance: 0.0,
        detail,
    }
}

fn spec(a: &[f64], f: &[f64], scan_bound: f64) -> ProblemSpec {
    ProblemSpec::new(a.to_vec(), f.to_vec())
        .and_then(|s| s.with_scan_bound(scan_bound))
        .expect("reference specs are valid")
}

fn chafee(lambda: f64) -> ProblemSpec {
    spec(&[1.0], &[0.0, lambda, 0.0, -lambda], 2.0)
}

/// Specs the suite is built on, in a fixed order; their hash tags the report.
pub fn reference_specs() -> Vec<ProblemSpec> {
    vec![
        spec(&[1.0], &[0.0], 2.0),
        chafee(1.0),
        chafee(15.0),
        spec(&[1.0], &[0.0, PI * PI], 2.0),
        spec(&[1.25, -1.0, 1.0], &[0.0, 80.0, 0.0, -80.0], 2.0),
    ]
}

pub fn reference_hash() -> String {
    let mut h = Sha256::new();
    for s in reference_specs() {
        h.update(s.to_spec_text().as_bytes());
    }
    hex::encode(h.finalize())
}

fn neumann_spectrum() -> CheckResult {
    let name = "neumann_spectrum";
    let s = spec(&[1.0], &[0.0], 2.0);
    let (fd, pr) = match (
        eigenvalues_sl(&s, Base::Constant(0.0), 5),
        prufer_eigenvalues(&s, Base::Constant(0.0), 5),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) => return failed(name, e.to_string()),
        (_, Err(e)) => return failed(name, e.to_string()),
    };
    let mut worst: f64 = fd.eigenvalues[0].abs();
    for n in 1..5 {
        let exact = -((n * n) as f64) * PI * PI;
        worst = worst.max(((fd.eigenvalues[n] - exact) / exact).abs());
        worst = worst.max(((fd.eigenvalues[n] - pr.eigenvalues[n]) / exact).abs() * 100.0);
    }
    check(
        name,
        worst,
        1e-3,
        "max relative error vs -n^2 pi^2; Prufer gap weighted x100".into(),
    )
}

fn resonance() -> CheckResult {
    let name = "resonance_pi2";
    let fam = ParameterFamily::new(chafee(1.0), ParameterKind::ScaleF).expect("valid family");
    match bifurcation_sweep(&fam, (9.0, 11.0), 2) {
        Ok(out) => match out.crossings.iter().find(|c| c.u0 == 0.0) {
            Some(c) => check(
                name,
                (c.midpoint() - PI * PI).abs(),
                1e-4,
                format!("crossing at {:.10}", c.midpoint()),
            ),
            None => failed(name, "no crossing on the trivial branch".into()),
        },
        Err(e) => failed(name, e.to_string()),
    }
}

fn chafee_counts() -> CheckResult {
    let name = "chafee_infante_counts";
    let mut counts = Vec::new();
    for lambda in [1.0, 15.0] {
        match find_equilibria(&chafee(lambda)) {
            Ok(set) => counts.push(set.records.len()),
            Err(e) => return failed(name, e.to_string()),
        }
    }
    let mismatch = counts[0].abs_diff(3) + counts[1].abs_diff(5);
    check(
        name,
        mismatch as f64,
        0.0,
        format!("counts {counts:?}, expected [3, 5]"),
    )
}

fn sum_identities() -> CheckResult {
    let name = "level_sum_identities";
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let tol = ToleranceSet::default();
    let u = AnalyticCurve::cosine(2.0);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let deg = rng.gen_range(0..=5);
        let h = Poly::new((0..=deg).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let phi = |x: f64| u.deriv(x) * h.eval(u.value(x));
        for r in orthogonality_residuals(&u, phi, 10) {
            worst = worst.max(r.abs() * 100.0);
        }
        for _ in 0..10 {
            let q = rng.gen_range(-0.99..0.99);
            if let Ok(s) = regular_sum(&u, phi, q, &tol) {
                worst = worst.max(s.regular_sum.abs());
            }
        }
    }
    check(
        name,
        worst,
        1e-6,
        "max |regular sum| and 100 x max |orthogonality residual|".into(),
    )
}

fn critical_sums() -> CheckResult {
    let name = "critical_sum_values";
    let u = AnalyticCurve::cosine(2.0);
    let tol = ToleranceSet::default();
    let expected = 1.0 / (2.0 * PI);
    let mut worst: f64 = 0.0;
    for q in [1.0, -1.0] {
        match critical_sum(&u, |_| 1.0, q, &tol) {
            Ok(v) => worst = worst.max((v - expected).abs()),
            Err(e) => return failed(name, e.to_string()),
        }
    }
    check(name, worst, 1e-8, "deviation from 1/(2 pi)".into())
}

fn first_nonconstant(s: &ProblemSpec) -> Result<EquilibriumRecord, String> {
    let set = find_equilibria(s).map_err(|e| e.to_string())?;
    set.records
        .into_iter()
        .find(|r| !r.is_constant)
        .ok_or_else(|| "no nonconstant equilibrium".to_string())
}

fn wronskian() -> CheckResult {
    let name = "wronskian_constancy";
    let s = chafee(15.0);
    let outcome = first_nonconstant(&s).and_then(|r| {
        let v: Profile = integrate_variational(&s, &r.profile).map_err(|e| e.to_string())?;
        wronskian_constancy(&s, &r.profile, &v).map_err(|e| e.to_string())
    });
    match outcome {
        Ok(w) => {
            let crit = w
                .critical_checks
                .iter()
                .map(|c| (c.phi - c.predicted).abs() / c.predicted.abs().max(1.0))
                .fold(0.0, f64::max);
            check(
                name,
                w.max_rel_variation.max(crit * 0.1),
                1e-6,
                "relative variation of W".into(),
            )
        }
        Err(e) => failed(name, e),
    }
}

fn gradient() -> CheckResult {
    let name = "shooting_gradient";
    let tight = ToleranceSet {
        ode_rel: 1e-13,
        ode_abs: 1e-15,
        ..ToleranceSet::default()
    };
    let s = chafee(1.0).with_tolerances(tight).expect("valid tolerances");
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..5 {
        let u0 = -0.8 + 0.4 * i as f64;
        let fd = match (
            shooting_miss(&s, u0 + h),
            shooting_miss(&s, u0 - h),
            shooting_miss(&s, u0),
        ) {
            (Ok(p), Ok(m), Ok(c)) => ((p.0 - m.0) / (2.0 * h), c.1),
            _ => return failed(name, format!("integration failed at u0 = {u0}")),
        };
        worst = worst.max((fd.0 - fd.1).abs() / fd.1.abs().max(1e-12));
    }
    check(
        name,
        worst,
        1e-5,
        "relative error of v'(1) vs centred difference".into(),
    )
}

fn convex_nonexceptional() -> CheckResult {
    let name = "convex_diffusion_nonexceptional";
    let s = spec(&[1.25, -1.0, 1.0], &[0.0, 80.0, 0.0, -80.0], 2.0);
    let mut set = match find_equilibria(&s) {
        Ok(set) => set,
        Err(e) => return failed(name, e.to_string()),
    };
    if let Err(e) = analyze_all(&s, &mut set) {
        return failed(name, e.to_string());
    }
    if set.nonconstant_count() == 0 {
        return failed(name, "no nonconstant equilibrium to classify".into());
    }
    let mut worst: f64 = 0.0;
    for r in set.records.iter().filter(|r| !r.is_constant) {
        match classify_exceptional(&s, r) {
            Ok(v) if v.overall == ExceptionalClass::Nonexceptional => {}
            Ok(_) => return failed(name, format!("record at u0 = {} not nonexceptional", r.u0)),
            Err(e) => return failed(name, e.to_string()),
        }
        let points = &r.critical_points.as_ref().expect("analyzed").points;
        for (p, pbar) in same_value_pairs(points, s.tol().sum_tol) {
            let scale = intzero_scale(s.a(), &r.profile, p, pbar).max(1.0);
            worst = worst.max(intzero_integral(s.a(), &r.profile, p, pbar).abs() / scale);
        }
    }
    check(
        name,
        worst,
        1e-6,
        "max scaled |intzero integral| over same-value pairs".into(),
    )
}

fn shift_law() -> CheckResult {
    let name = "perturbation_shift_law";
    let s = spec(&[1.0], &[0.0, PI * PI], 2.0);
    let record = match find_equilibria(&s) {
        Ok(set) => match set.records.into_iter().find(|r| r.is_constant) {
            Some(r) => r,
            None => return failed(name, "no constant record".into()),
        },
        Err(e) => return failed(name, e.to_string()),
    };
    let eps = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];
    let linear = perturbation_scan(&s, &record, &Poly::new(vec![0.0, 1.0]), &eps);
    let quadratic = perturbation_scan(&s, &record, &Poly::new(vec![0.0, 0.0, 1.0]), &eps);
    match (linear, quadratic) {
        (Ok(lin), Ok(quad)) => {
            let mut worst: f64 = 0.0;
            for (row, e) in lin.rows.iter().zip(eps) {
                match row.equilibria.first() {
                    Some(p) => worst = worst.max((p.min_abs - e).abs()),
                    None => return failed(name, format!("continuation lost at eps = {e}")),
                }
            }
            let control = quad
                .rows
                .iter()
                .filter_map(|r| r.equilibria.first())
                .all(|p| p.min_abs < s.tol().hyp_tol);
            if !control {
                return failed(name, "quadratic direction opened the gap".into());
            }
            check(name, worst, 1e-8, "max |min|eig| - eps|".into())
        }
        (Err(e), _) | (_, Err(e)) => failed(name, e.to_string()),
    }
}

/// Runs every check in a fixed order.
pub fn run_suite() -> VerifyReport {
    let checks = vec![
        neumann_spectrum(),
        resonance(),
        chafee_counts(),
        sum_identities(),
        critical_sums(),
        wronskian(),
        gradient(),
        convex_nonexceptional(),
        shift_law(),
    ];
    VerifyReport { checks }
}
