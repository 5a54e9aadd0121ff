//! Exceptional equilibria: non-hyperbolic, nonconstant, every critical point
//! paired with another of the same value, and the variational solution
//! separating the partners of both endpoints.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibria::EquilibriumRecord;
use crate::integrate::{integrate_ivp, integrate_variational, IntegrateError, Profile};
use crate::levelsets::{critical_points, CriticalPoint, Curve};
use crate::poly::Poly;
use crate::problem::ProblemSpec;
use crate::quadrature::composite_gauss7;
use crate::spectrum::{
    classify_hyperbolic, eigenvalues_sl, Base, HyperbolicityClass, SpectrumError, DEFAULT_EIGEN_COUNT,
};

/// Default step in `u0` for [`turning_point_sensitivity`].
pub const DEFAULT_SENSITIVITY_STEP: f64 = 1e-4;
const NEWTON_ITERS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExceptionalError {
    #[error("constant equilibria are never exceptional")]
    ConstantRecord,
    #[error("degenerate critical point at x = {x}")]
    DegenerateCritical { x: f64 },
    #[error("critical point near x = {p} lost when perturbing u0 by {h:e}")]
    CriticalPointLost { p: f64, h: f64 },
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExceptionalClass {
    Exceptional,
    Nonexceptional,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Holds,
    Fails,
    Undecided,
}

/// Conditions are evaluated in order and evaluation stops at the first
/// failure; later ones are then `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalVerdict {
    /// Non-hyperbolicity.
    pub condition1: Condition,
    /// Every critical point has a same-value partner.
    pub condition2: Option<Condition>,
    /// `v` differs between each endpoint and one of its partners.
    pub condition3: Option<Condition>,
    pub overall: ExceptionalClass,
    /// Same-value critical pairs `(p, p̄)` that were used.
    pub witnesses: Vec<(f64, f64)>,
}

/// `½ ∫_p^p̄ a'(x) u'(x)² dx`.
pub fn intzero_integral(a: &Poly, curve: &impl Curve, p: f64, pbar: f64) -> f64 {
    let (lo, hi, sign) = if p <= pbar { (p, pbar, 1.0) } else { (pbar, p, -1.0) };
    let da = a.derivative();
    let mut breaks = vec![lo];
    breaks.extend(curve.knots().into_iter().filter(|&k| k > lo && k < hi));
    breaks.push(hi);
    sign * 0.5 * composite_gauss7(|x| da.eval(x) * curve.deriv(x).powi(2), &breaks)
}

/// `½ ∫_p^p̄ |a'(x)| u'(x)² dx`, the natural scale of [`intzero_integral`].
pub fn intzero_scale(a: &Poly, curve: &impl Curve, p: f64, pbar: f64) -> f64 {
    let (lo, hi) = if p <= pbar { (p, pbar) } else { (pbar, p) };
    let da = a.derivative();
    let mut breaks = vec![lo];
    breaks.extend(curve.knots().into_iter().filter(|&k| k > lo && k < hi));
    breaks.push(hi);
    0.5 * composite_gauss7(|x| da.eval(x).abs() * curve.deriv(x).powi(2), &breaks)
}

/// Pairs `(p, p̄)` of distinct critical points with `|u(p) - u(p̄)|` within
/// `sum_tol` of the value range, `p < p̄`.
pub fn same_value_pairs(points: &[CriticalPoint], sum_tol: f64) -> Vec<(f64, f64)> {
    let lo = points.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
    let tol = sum_tol * (hi - lo).max(f64::MIN_POSITIVE);
    let mut pairs = Vec::new();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if (a.value - b.value).abs() <= tol {
                pairs.push((a.x, b.x));
            }
        }
    }
    pairs
}

fn partners(pairs: &[(f64, f64)], x: f64) -> impl Iterator<Item = f64> + '_ {
    pairs.iter().filter_map(move |&(a, b)| {
        if a == x {
            Some(b)
        } else if b == x {
            Some(a)
        } else {
            None
        }
    })
}

/// Evaluates the three conditions for a nonconstant record.
pub fn classify_exceptional(
    spec: &ProblemSpec,
    record: &EquilibriumRecord,
) -> Result<ExceptionalVerdict, ExceptionalError> {
    if record.is_constant {
        return Err(ExceptionalError::ConstantRecord);
    }
    let hyperbolic = match record.flags.hyperbolic {
        Some(h) => h,
        None => classify_hyperbolic(
            &eigenvalues_sl(spec, Base::Profile(&record.profile), DEFAULT_EIGEN_COUNT)?,
            spec.tol().hyp_tol,
        ),
    };
    let condition1 = match hyperbolic {
        HyperbolicityClass::Hyperbolic => Condition::Fails,
        HyperbolicityClass::NonHyperbolic => Condition::Holds,
        HyperbolicityClass::Undecided => Condition::Undecided,
    };
    let mut verdict = ExceptionalVerdict {
        condition1,
        condition2: None,
        condition3: None,
        overall: ExceptionalClass::Nonexceptional,
        witnesses: Vec::new(),
    };
    if condition1 == Condition::Fails {
        return Ok(verdict);
    }

    let crit = match &record.critical_points {
        Some(c) => c.clone(),
        None => critical_points(&record.profile, spec.tol()),
    };
    if let Some(c) = crit.points.iter().find(|c| c.degenerate) {
        return Err(ExceptionalError::DegenerateCritical { x: c.x });
    }
    let pairs = same_value_pairs(&crit.points, spec.tol().sum_tol);
    verdict.witnesses = pairs.clone();
    let all_paired = crit.points.iter().all(|c| partners(&pairs, c.x).next().is_some());
    if !all_paired {
        verdict.condition2 = Some(Condition::Fails);
        return Ok(verdict);
    }
    verdict.condition2 = Some(Condition::Holds);

    let v = integrate_variational(spec, &record.profile)?;
    let threshold = spec.tol().sum_tol * v.max_abs_value();
    let separated = |end: f64| partners(&pairs, end).any(|p| (v.value(p) - v.value(end)).abs() > threshold);
    let condition3 = if separated(0.0) && separated(1.0) {
        Condition::Holds
    } else {
        Condition::Fails
    };
    verdict.condition3 = Some(condition3);
    verdict.overall = match (condition1, condition3) {
        (_, Condition::Fails) => ExceptionalClass::Nonexceptional,
        (Condition::Holds, Condition::Holds) => ExceptionalClass::Exceptional,
        _ => ExceptionalClass::Undecided,
    };
    Ok(verdict)
}

fn relocate_critical(profile: &Profile, p: f64, h: f64) -> Result<f64, ExceptionalError> {
    let lost = ExceptionalError::CriticalPointLost { p, h };
    let mut x = p;
    for _ in 0..NEWTON_ITERS {
        let step = profile.deriv(x) / profile.second_deriv(x);
        if !step.is_finite() {
            return Err(lost);
        }
        x -= step;
        if !(0.0..=1.0).contains(&x) {
            return Err(lost);
        }
        if step.abs() <= 1e-14 {
            return Ok(x);
        }
    }
    Err(lost)
}

/// `(lhs, rhs)` with `lhs` the centred difference in `u0` of the value at the
/// critical point near `p` (followed by Newton on `u' = 0`) and `rhs = v(p)`.
/// Endpoints stay fixed under the perturbation.
pub fn turning_point_sensitivity(
    spec: &ProblemSpec,
    record: &EquilibriumRecord,
    p: f64,
    h: f64,
) -> Result<(f64, f64), ExceptionalError> {
    if record.is_constant {
        return Err(ExceptionalError::ConstantRecord);
    }
    let v = integrate_variational(spec, &record.profile)?;
    let rhs = v.value(p);
    if p == 0.0 {
        return Ok((1.0, rhs));
    }
    let plus = integrate_ivp(spec, record.u0 + h)?;
    let minus = integrate_ivp(spec, record.u0 - h)?;
    let (xp, xm) = if p == 1.0 {
        (1.0, 1.0)
    } else {
        (relocate_critical(&plus, p, h)?, relocate_critical(&minus, p, h)?)
    };
    Ok(((plus.value(xp) - minus.value(xm)) / (2.0 * h), rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{analyze_all, find_equilibria};
    use crate::levelsets::AnalyticCurve;
    use std::f64::consts::PI;

    fn spec(a: Vec<f64>, f: Vec<f64>) -> ProblemSpec {
        ProblemSpec::new(a, f).unwrap()
    }

    #[test]
    fn intzero_examples() {
        let u = AnalyticCurve::cosine(2.0);
        assert_eq!(intzero_integral(&Poly::new(vec![1.0]), &u, 0.0, 1.0), 0.0);
        let v = intzero_integral(&Poly::new(vec![0.0, 1.0]), &u, 0.0, 1.0);
        assert!((v - PI * PI).abs() < 1e-8);
        assert!((intzero_integral(&Poly::new(vec![0.0, 1.0]), &u, 1.0, 0.0) + PI * PI).abs() < 1e-8);
    }

    #[test]
    fn hyperbolic_and_monotone_records_are_nonexceptional() {
        let s = spec(vec![1.0], vec![0.0, 15.0, 0.0, -15.0]);
        let mut set = find_equilibria(&s).unwrap();
        analyze_all(&s, &mut set).unwrap();
        for r in set.records.iter().filter(|r| !r.is_constant) {
            let v = classify_exceptional(&s, r).unwrap();
            assert_eq!(v.overall, ExceptionalClass::Nonexceptional);
            assert_eq!(v.condition1, Condition::Fails);
            assert_eq!(v.condition2, None);

            // forcing condition 1 exposes condition 2: a monotone profile has
            // no partner for x = 0
            let mut forced = r.clone();
            forced.flags.hyperbolic = Some(HyperbolicityClass::NonHyperbolic);
            let v = classify_exceptional(&s, &forced).unwrap();
            assert_eq!(v.condition2, Some(Condition::Fails));
            assert_eq!(v.overall, ExceptionalClass::Nonexceptional);
        }
        let c = set.records.iter().find(|r| r.is_constant).unwrap();
        assert_eq!(classify_exceptional(&s, c), Err(ExceptionalError::ConstantRecord));
    }

    #[test]
    fn undecided_condition1_propagates() {
        // two-lap profile at f = 45(u - u^3): 0 and 1 share the same value
        let s = spec(vec![1.0], vec![0.0, 45.0, 0.0, -45.0]);
        let mut set = find_equilibria(&s).unwrap();
        analyze_all(&s, &mut set).unwrap();
        let two_lap = set
            .records
            .iter()
            .find(|r| !r.is_constant && r.critical_points.as_ref().unwrap().points.len() == 3)
            .expect("two-lap equilibrium");
        let mut forced = two_lap.clone();
        forced.flags.hyperbolic = Some(HyperbolicityClass::Undecided);
        let v = classify_exceptional(&s, &forced).unwrap();
        assert_eq!(v.condition1, Condition::Undecided);
        // the interior critical point has no partner
        assert_eq!(v.condition2, Some(Condition::Fails));
        assert_eq!(v.overall, ExceptionalClass::Nonexceptional);
        assert_eq!(v.witnesses.len(), 1);
    }

    #[test]
    fn sensitivity_matches_variational_solution() {
        let s = spec(vec![1.0], vec![0.0, 45.0, 0.0, -45.0]);
        let mut set = find_equilibria(&s).unwrap();
        analyze_all(&s, &mut set).unwrap();
        let two_lap = set
            .records
            .iter()
            .find(|r| !r.is_constant && r.critical_points.as_ref().unwrap().points.len() == 3)
            .unwrap();
        let (l0, r0) = turning_point_sensitivity(&s, two_lap, 0.0, 1e-3).unwrap();
        assert_eq!(l0, 1.0);
        assert!((r0 - 1.0).abs() < 1e-12);
        let p = two_lap.critical_points.as_ref().unwrap().points[1].x;
        let (lhs, rhs) = turning_point_sensitivity(&s, two_lap, p, 1e-3).unwrap();
        assert!((lhs - rhs).abs() <= 1e-4 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}
