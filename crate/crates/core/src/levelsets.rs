//! Critical points, level-set preimages and the sums taken over them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::Profile;
use crate::poly::bisect_sign_change;
use crate::problem::ToleranceSet;
use crate::quadrature::composite_gauss7;

/// Levels closer than this fraction of the value range to a critical value
/// (but not equal to it) are refused.
pub const LEVEL_MARGIN: f64 = 1e-4;
/// Relative tolerance for `u(p) = q` at critical points and endpoints.
const LEVEL_EQ: f64 = 1e-9;
/// Interior sign changes of `u'` this close to a critical endpoint are the
/// endpoint itself seen through integration error.
const BOUNDARY_SHADOW: f64 = 1e-6;
/// Samples per knot interval when scanning `u'` for sign changes.
const SAMPLES_PER_KNOT: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevelSetError {
    #[error("profile is constant; every point is critical")]
    ConstantProfile,
    #[error("level {q} is within the level margin of critical value {critical_value}")]
    LevelTooCloseToCritical { q: f64, critical_value: f64 },
    #[error("level {q} has critical preimages")]
    CriticalLevel { q: f64 },
    #[error("regular preimage on the boundary at x = {x}")]
    BoundaryRegularPoint { x: f64 },
    #[error("level {q} has no critical preimage")]
    NoCriticalPreimage { q: f64 },
    #[error("degenerate critical point at x = {x}")]
    DegenerateCritical { x: f64 },
}

/// A twice differentiable function on `[0, 1]`.
pub trait Curve: Sync {
    fn value(&self, x: f64) -> f64;
    fn deriv(&self, x: f64) -> f64;
    fn second_deriv(&self, x: f64) -> f64;
    /// Breakpoints for sampling and quadrature, increasing from 0 to 1.
    fn knots(&self) -> Vec<f64>;
}

impl Curve for Profile {
    fn value(&self, x: f64) -> f64 {
        Profile::value(self, x)
    }

    fn deriv(&self, x: f64) -> f64 {
        Profile::deriv(self, x)
    }

    fn second_deriv(&self, x: f64) -> f64 {
        Profile::second_deriv(self, x)
    }

    fn knots(&self) -> Vec<f64> {
        self.nodes().to_vec()
    }
}

type RealFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A curve given by closed-form value and derivatives, sampled on a uniform
/// grid of 1000 cells.
pub struct AnalyticCurve {
    value: RealFn,
    deriv: RealFn,
    second: RealFn,
}

impl AnalyticCurve {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        second: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        AnalyticCurve {
            value: Box::new(value),
            deriv: Box::new(deriv),
            second: Box::new(second),
        }
    }

    /// `cos(k π x)`.
    pub fn cosine(k: f64) -> Self {
        let w = k * std::f64::consts::PI;
        AnalyticCurve::new(
            move |x| (w * x).cos(),
            move |x| -w * (w * x).sin(),
            move |x| -w * w * (w * x).cos(),
        )
    }
}

impl Curve for AnalyticCurve {
    fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    fn deriv(&self, x: f64) -> f64 {
        (self.deriv)(x)
    }

    fn second_deriv(&self, x: f64) -> f64 {
        (self.second)(x)
    }

    fn knots(&self) -> Vec<f64> {
        (0..=1000).map(|i| i as f64 / 1000.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: f64,
    pub value: f64,
    pub second_deriv: f64,
    pub on_boundary: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSet {
    /// Sorted by `x`. Empty when `all_critical` is set.
    pub points: Vec<CriticalPoint>,
    /// The curve is constant to `crit_tol`.
    pub all_critical: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularPoint {
    pub x: f64,
    pub slope: f64,
}

/// Preimages of a level, sorted by `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    pub q: f64,
    pub regular: Vec<RegularPoint>,
    pub critical: Vec<CriticalPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularSums {
    /// `Σ φ(p) / |u'(p)|`.
    pub regular_sum: f64,
    /// `Σ φ(p) sign u'(p)`.
    pub signed_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetReport {
    pub q: f64,
    pub regular_points: Vec<RegularPoint>,
    pub critical_points: Vec<CriticalPoint>,
    pub regular_sum: f64,
    pub signed_sum: f64,
    pub critical_sum: f64,
}

fn sample_grid(curve: &impl Curve) -> Vec<f64> {
    let knots = curve.knots();
    let mut grid = Vec::with_capacity(knots.len() * SAMPLES_PER_KNOT);
    for w in knots.windows(2) {
        for j in 0..SAMPLES_PER_KNOT {
            grid.push(w[0] + (w[1] - w[0]) * j as f64 / SAMPLES_PER_KNOT as f64);
        }
    }
    grid.push(*knots.last().expect("curve has knots"));
    grid
}

fn max_abs(xs: impl Iterator<Item = f64>) -> f64 {
    xs.map(f64::abs).fold(0.0, f64::max)
}

/// Zeros of `u'`, with the endpoints included when `u'` is negligible there.
pub fn critical_points(curve: &impl Curve, tol: &ToleranceSet) -> CriticalSet {
    let grid = sample_grid(curve);
    let du: Vec<f64> = grid.iter().map(|&x| curve.deriv(x)).collect();
    let max_du = max_abs(du.iter().copied());
    let max_u = max_abs(grid.iter().map(|&x| curve.value(x)));
    if max_du <= tol.crit_tol * max_u.max(1.0) {
        return CriticalSet {
            points: Vec::new(),
            all_critical: true,
        };
    }
    let max_d2u = max_abs(grid.iter().map(|&x| curve.second_deriv(x)));
    let point = |x: f64, on_boundary: bool| {
        let d2 = curve.second_deriv(x);
        CriticalPoint {
            x,
            value: curve.value(x),
            second_deriv: d2,
            on_boundary,
            degenerate: d2.abs() <= tol.crit_tol * max_d2u,
        }
    };

    let n = grid.len();
    let left = du[0].abs() <= tol.crit_tol * max_du;
    let right = du[n - 1].abs() <= tol.crit_tol * max_du;
    let mut points = Vec::new();
    if left {
        points.push(point(0.0, true));
    }
    for i in 0..n - 1 {
        let x = if i > 0 && du[i] == 0.0 {
            grid[i]
        } else if du[i] * du[i + 1] < 0.0 {
            bisect_sign_change(|x| curve.deriv(x), grid[i], grid[i + 1], du[i])
        } else {
            continue;
        };
        if (left && x < BOUNDARY_SHADOW) || (right && x > 1.0 - BOUNDARY_SHADOW) {
            continue;
        }
        points.push(point(x, false));
    }
    if right {
        points.push(point(1.0, true));
    }
    points.sort_by(|a, b| a.x.total_cmp(&b.x));
    points.dedup_by(|a, b| (a.x - b.x).abs() <= 10.0 * tol.root_tol);
    CriticalSet {
        points,
        all_critical: false,
    }
}

fn value_range(curve: &impl Curve, crit: &[CriticalPoint]) -> (f64, f64) {
    let mut lo = curve.value(0.0).min(curve.value(1.0));
    let mut hi = curve.value(0.0).max(curve.value(1.0));
    for c in crit {
        lo = lo.min(c.value);
        hi = hi.max(c.value);
    }
    (lo, hi)
}

/// All solutions of `u(x) = q`, split into regular and critical preimages.
pub fn level_set_at(curve: &impl Curve, q: f64, tol: &ToleranceSet) -> Result<LevelSet, LevelSetError> {
    let crit = critical_points(curve, tol);
    if crit.all_critical {
        return Err(LevelSetError::ConstantProfile);
    }
    level_set_with(curve, &crit.points, q)
}

fn level_set_with(curve: &impl Curve, crit: &[CriticalPoint], q: f64) -> Result<LevelSet, LevelSetError> {
    let (lo, hi) = value_range(curve, crit);
    let range = hi - lo;
    let eq = LEVEL_EQ * range;
    let margin = LEVEL_MARGIN * range;

    let mut critical = Vec::new();
    for c in crit {
        let gap = (c.value - q).abs();
        if gap <= eq {
            critical.push(*c);
        } else if gap < margin {
            return Err(LevelSetError::LevelTooCloseToCritical {
                q,
                critical_value: c.value,
            });
        }
    }

    // Monotone pieces between consecutive critical points and the endpoints.
    let mut breaks: Vec<f64> = vec![0.0];
    breaks.extend(crit.iter().filter(|c| !c.on_boundary).map(|c| c.x));
    breaks.push(1.0);
    let g = |x: f64| curve.value(x) - q;
    let zeroish = |v: f64| v.abs() <= eq;

    let mut regular = Vec::new();
    for end in [0.0, 1.0] {
        let boundary_critical = crit.iter().any(|c| c.on_boundary && c.x == end);
        if !boundary_critical && zeroish(g(end)) {
            regular.push(RegularPoint {
                x: end,
                slope: curve.deriv(end),
            });
        }
    }
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a >= b {
            continue;
        }
        let (ga, gb) = (g(a), g(b));
        if zeroish(ga) || zeroish(gb) || ga.signum() == gb.signum() {
            continue;
        }
        let x = bisect_sign_change(g, a, b, ga);
        regular.push(RegularPoint {
            x,
            slope: curve.deriv(x),
        });
    }
    regular.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(LevelSet { q, regular, critical })
}

fn regular_sums_of(level: &LevelSet, phi: &impl Fn(f64) -> f64) -> RegularSums {
    let mut sums = RegularSums {
        regular_sum: 0.0,
        signed_sum: 0.0,
    };
    for p in &level.regular {
        let v = phi(p.x);
        sums.regular_sum += v / p.slope.abs();
        sums.signed_sum += v * p.slope.signum();
    }
    sums
}

fn critical_sum_of(level: &LevelSet, phi: &impl Fn(f64) -> f64) -> Result<f64, LevelSetError> {
    let mut sum = 0.0;
    for c in &level.critical {
        if c.degenerate {
            return Err(LevelSetError::DegenerateCritical { x: c.x });
        }
        let weight = if c.on_boundary { 0.5 } else { 1.0 };
        sum += weight * phi(c.x) / c.second_deriv.abs().sqrt();
    }
    Ok(sum)
}

/// `Σ φ(p)/|u'(p)|` and `Σ φ(p) sign u'(p)` over the interior preimages of a
/// regular level.
pub fn regular_sum(
    curve: &impl Curve,
    phi: impl Fn(f64) -> f64,
    q: f64,
    tol: &ToleranceSet,
) -> Result<RegularSums, LevelSetError> {
    let level = level_set_at(curve, q, tol)?;
    if !level.critical.is_empty() {
        return Err(LevelSetError::CriticalLevel { q });
    }
    if let Some(p) = level.regular.iter().find(|p| p.x == 0.0 || p.x == 1.0) {
        return Err(LevelSetError::BoundaryRegularPoint { x: p.x });
    }
    Ok(regular_sums_of(&level, &phi))
}

/// `Σ φ(p)/√|u''(p)|` over critical preimages, boundary terms weighted ½.
pub fn critical_sum(
    curve: &impl Curve,
    phi: impl Fn(f64) -> f64,
    q: f64,
    tol: &ToleranceSet,
) -> Result<f64, LevelSetError> {
    let level = level_set_at(curve, q, tol)?;
    if level.critical.is_empty() {
        return Err(LevelSetError::NoCriticalPreimage { q });
    }
    critical_sum_of(&level, &phi)
}

/// Preimages and every sum at level `q`. Boundary regular points are listed
/// but left out of the regular sums.
pub fn level_set_report(
    curve: &impl Curve,
    phi: impl Fn(f64) -> f64,
    q: f64,
    tol: &ToleranceSet,
) -> Result<LevelSetReport, LevelSetError> {
    let mut level = level_set_at(curve, q, tol)?;
    let critical_sum = critical_sum_of(&level, &phi)?;
    let boundary: Vec<RegularPoint> = level
        .regular
        .iter()
        .copied()
        .filter(|p| p.x == 0.0 || p.x == 1.0)
        .collect();
    level.regular.retain(|p| p.x > 0.0 && p.x < 1.0);
    let sums = regular_sums_of(&level, &phi);
    level.regular.extend(boundary);
    level.regular.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(LevelSetReport {
        q,
        regular_points: level.regular,
        critical_points: level.critical,
        regular_sum: sums.regular_sum,
        signed_sum: sums.signed_sum,
        critical_sum,
    })
}

/// `∫₀¹ u(x)^k φ(x) dx` for `k = 0..=max_degree`.
pub fn orthogonality_residuals(curve: &impl Curve, phi: impl Fn(f64) -> f64, max_degree: usize) -> Vec<f64> {
    let knots = curve.knots();
    (0..=max_degree)
        .map(|k| composite_gauss7(|x| curve.value(x).powi(k as i32) * phi(x), &knots))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitWitness {
    pub q: f64,
    pub p_i: f64,
    pub p_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitTest {
    pub passed: bool,
    pub levels_checked: usize,
    pub witness: Option<OrbitWitness>,
}

pub const DEFAULT_ORBIT_LEVELS: usize = 200;

/// Radical inverse of `k` in base 2.
fn van_der_corput(mut k: usize) -> f64 {
    let mut x = 0.0;
    let mut base = 0.5;
    while k > 0 {
        if k & 1 == 1 {
            x += base;
        }
        k >>= 1;
        base *= 0.5;
    }
    x
}

/// Checks that `Φ` takes equal values on all regular preimages of each
/// tested level, i.e. that `Φ` factors through `u` on regular points.
///
/// Levels fill the value range in van der Corput order, so the first one is
/// the midpoint. Levels near critical values are skipped.
pub fn q_orbit_test(
    curve: &impl Curve,
    big_phi: impl Fn(f64) -> f64,
    tol: f64,
    n_levels: usize,
    tols: &ToleranceSet,
) -> Result<OrbitTest, LevelSetError> {
    let crit = critical_points(curve, tols);
    if crit.all_critical {
        return Err(LevelSetError::ConstantProfile);
    }
    let (lo, hi) = value_range(curve, &crit.points);
    let scale = max_abs(sample_grid(curve).into_iter().map(&big_phi)).max(f64::MIN_POSITIVE);
    let mut checked = 0;
    for k in 1..=n_levels {
        let q = lo + (hi - lo) * van_der_corput(k);
        let level = match level_set_with(curve, &crit.points, q) {
            Ok(level) if level.critical.is_empty() => level,
            _ => continue,
        };
        checked += 1;
        let values: Vec<f64> = level.regular.iter().map(|p| big_phi(p.x)).collect();
        let mut worst: Option<(f64, usize, usize)> = None;
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                let d = (values[i] - values[j]).abs();
                if d > tol * scale && worst.is_none_or(|w| d > w.0) {
                    worst = Some((d, i, j));
                }
            }
        }
        if let Some((_, i, j)) = worst {
            return Ok(OrbitTest {
                passed: false,
                levels_checked: checked,
                witness: Some(OrbitWitness {
                    q,
                    p_i: level.regular[i].x,
                    p_j: level.regular[j].x,
                }),
            });
        }
    }
    Ok(OrbitTest {
        passed: true,
        levels_checked: checked,
        witness: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn tol() -> ToleranceSet {
        ToleranceSet::default()
    }

    #[test]
    fn cosine_critical_points() {
        let u = AnalyticCurve::cosine(2.0);
        let c = critical_points(&u, &tol());
        assert!(!c.all_critical);
        let xs: Vec<f64> = c.points.iter().map(|p| p.x).collect();
        assert_eq!(xs.len(), 3);
        for (x, e) in xs.iter().zip([0.0, 0.5, 1.0]) {
            assert!((x - e).abs() < 1e-12);
        }
        let w2 = 4.0 * PI * PI;
        for (p, e) in c.points.iter().zip([-w2, w2, -w2]) {
            assert!((p.second_deriv - e).abs() < 1e-9);
            assert!(!p.degenerate);
        }
        let flags: Vec<bool> = c.points.iter().map(|p| p.on_boundary).collect();
        assert_eq!(flags, vec![true, false, true]);
    }

    #[test]
    fn constant_curve_is_all_critical() {
        let u = AnalyticCurve::new(|_| 2.0, |_| 0.0, |_| 0.0);
        let c = critical_points(&u, &tol());
        assert!(c.all_critical);
        assert!(c.points.is_empty());
        assert_eq!(level_set_at(&u, 2.0, &tol()), Err(LevelSetError::ConstantProfile));
    }

    #[test]
    fn cosine_level_sets() {
        let u = AnalyticCurve::cosine(2.0);
        let l = level_set_at(&u, 0.0, &tol()).unwrap();
        assert_eq!(l.regular.len(), 2);
        assert!((l.regular[0].x - 0.25).abs() < 1e-12);
        assert!((l.regular[1].x - 0.75).abs() < 1e-12);
        assert!((l.regular[0].slope + 2.0 * PI).abs() < 1e-9);
        assert!((l.regular[1].slope - 2.0 * PI).abs() < 1e-9);

        let top = level_set_at(&u, 1.0, &tol()).unwrap();
        assert!(top.regular.is_empty());
        let xs: Vec<f64> = top.critical.iter().map(|c| c.x).collect();
        assert_eq!(xs, vec![0.0, 1.0]);

        let half = level_set_at(&AnalyticCurve::cosine(1.0), 0.0, &tol()).unwrap();
        assert_eq!(half.regular.len(), 1);
        assert!((half.regular[0].x - 0.5).abs() < 1e-12);
        assert!((half.regular[0].slope + PI).abs() < 1e-9);
    }

    #[test]
    fn near_critical_level_refused() {
        let u = AnalyticCurve::cosine(2.0);
        assert!(matches!(
            level_set_at(&u, 1.0 - 1e-6, &tol()),
            Err(LevelSetError::LevelTooCloseToCritical { .. })
        ));
    }

    #[test]
    fn regular_sum_examples() {
        let u2 = AnalyticCurve::cosine(2.0);
        let s = regular_sum(&u2, |x| u2.deriv(x), 0.3, &tol()).unwrap();
        assert!(s.regular_sum.abs() < 1e-10);
        let one = regular_sum(&AnalyticCurve::cosine(1.0), |_| 1.0, 0.0, &tol()).unwrap();
        assert!((one.regular_sum - 1.0 / PI).abs() < 1e-9);
        let two = regular_sum(&u2, |_| 1.0, 0.0, &tol()).unwrap();
        assert!((two.regular_sum - 1.0 / PI).abs() < 1e-9);
        assert_eq!(
            regular_sum(&u2, |_| 1.0, 1.0, &tol()),
            Err(LevelSetError::CriticalLevel { q: 1.0 })
        );
    }

    #[test]
    fn boundary_regular_point_rejected() {
        let u = AnalyticCurve::new(|x| x, |_| 1.0, |_| 0.0);
        assert_eq!(
            regular_sum(&u, |_| 1.0, 0.0, &tol()),
            Err(LevelSetError::BoundaryRegularPoint { x: 0.0 })
        );
    }

    #[test]
    fn critical_sum_examples() {
        let u = AnalyticCurve::cosine(2.0);
        let expected = 1.0 / (2.0 * PI);
        assert!((critical_sum(&u, |_| 1.0, 1.0, &tol()).unwrap() - expected).abs() < 1e-12);
        assert!((critical_sum(&u, |_| 1.0, -1.0, &tol()).unwrap() - expected).abs() < 1e-12);
        assert!(critical_sum(&u, |x| x - 0.5, -1.0, &tol()).unwrap().abs() < 1e-12);
        assert_eq!(
            critical_sum(&u, |_| 1.0, 0.0, &tol()),
            Err(LevelSetError::NoCriticalPreimage { q: 0.0 })
        );
    }

    #[test]
    fn degenerate_critical_point_refused() {
        // u = (x - 1/2)^3 has a degenerate critical point at 1/2
        let u = AnalyticCurve::new(|x| (x - 0.5).powi(3), |x| 3.0 * (x - 0.5).powi(2), |x| 6.0 * (x - 0.5));
        let c = critical_points(&u, &tol());
        assert!(c.points.iter().any(|p| p.degenerate && (p.x - 0.5).abs() < 1e-6));
    }

    #[test]
    fn orthogonality_examples() {
        let u2 = AnalyticCurve::cosine(2.0);
        let r = orthogonality_residuals(&u2, |x| u2.deriv(x), 10);
        assert_eq!(r.len(), 11);
        assert!(r.iter().all(|v| v.abs() < 1e-10));
        let r1 = orthogonality_residuals(&AnalyticCurve::cosine(1.0), |_| 1.0, 2);
        assert!((r1[2] - 0.5).abs() < 1e-12);
        let r0 = orthogonality_residuals(&u2, |_| 1.0, 0);
        assert!((r0[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn orbit_examples() {
        let u = AnalyticCurve::cosine(2.0);
        let sq = q_orbit_test(&u, |x| u.value(x).powi(2), 1e-8, DEFAULT_ORBIT_LEVELS, &tol()).unwrap();
        assert!(sq.passed);
        assert!(sq.levels_checked > 100);

        let x = q_orbit_test(&u, |x| x, 1e-8, DEFAULT_ORBIT_LEVELS, &tol()).unwrap();
        assert!(!x.passed);
        let w = x.witness.unwrap();
        assert!(w.q.abs() < 1e-12);
        assert!((w.p_i - 0.25).abs() < 1e-12 && (w.p_j - 0.75).abs() < 1e-12);

        let d = q_orbit_test(&u, |x| u.deriv(x), 1e-8, DEFAULT_ORBIT_LEVELS, &tol()).unwrap();
        assert!(!d.passed);
    }

    #[test]
    fn report_collects_all_sums() {
        let u = AnalyticCurve::cosine(2.0);
        let r = level_set_report(&u, |_| 1.0, 0.0, &tol()).unwrap();
        assert_eq!(r.regular_points.len(), 2);
        assert!(r.critical_points.is_empty());
        assert_eq!(r.critical_sum, 0.0);
        assert!(r.signed_sum.abs() < 1e-15);
    }

    #[test]
    fn preimage_count_changes_by_two_across_interior_critical_value() {
        // cos(3πx): interior critical values -1 at 1/3 and +1 at 2/3, and the
        // preimage count drops from 3 to 1 near either extreme
        let u = AnalyticCurve::cosine(3.0);
        let counts: Vec<usize> = (1..200)
            .map(|i| -1.0 + 2.0 * i as f64 / 200.0)
            .filter_map(|q| level_set_at(&u, q, &tol()).ok())
            .map(|l| l.regular.len())
            .collect();
        assert!(counts.iter().all(|&c| c == 3));
        let u4 = AnalyticCurve::cosine(4.0);
        let mut last = None;
        for i in 1..400 {
            let q = -1.0 + 2.0 * i as f64 / 400.0;
            if let Ok(l) = level_set_at(&u4, q, &tol()) {
                let n = l.regular.len();
                if let Some(prev) = last {
                    assert!(n == prev || n.abs_diff(prev) == 2);
                }
                last = Some(n);
            }
        }
    }

    proptest! {
        #[test]
        fn sums_are_linear_in_phi(q in -0.95f64..0.95, c in -5.0f64..5.0) {
            let u = AnalyticCurve::cosine(3.0);
            let phi = |x: f64| 1.0 + x * x;
            if let Ok(s) = regular_sum(&u, phi, q, &tol()) {
                let sc = regular_sum(&u, |x| c * phi(x), q, &tol()).unwrap();
                prop_assert!((sc.regular_sum - c * s.regular_sum).abs() <= 1e-13 * (1.0 + s.regular_sum.abs() * c.abs()));
                prop_assert!((sc.signed_sum - c * s.signed_sum).abs() <= 1e-13 * (1.0 + s.signed_sum.abs() * c.abs()));
            }
            let cs = critical_sum(&u, phi, 1.0, &tol()).unwrap();
            let csc = critical_sum(&u, |x| c * phi(x), 1.0, &tol()).unwrap();
            prop_assert!((csc - c * cs).abs() <= 1e-13 * (1.0 + cs.abs() * c.abs()));
        }

        #[test]
        fn derivative_weighted_phi_sums_vanish(
            q in -0.99f64..0.99,
            h in proptest::collection::vec(-2.0f64..2.0, 1..5),
        ) {
            let u = AnalyticCurve::cosine(2.0);
            let hp = crate::poly::Poly::new(h);
            let phi = |x: f64| u.deriv(x) * hp.eval(u.value(x));
            if let Ok(s) = regular_sum(&u, phi, q, &tol()) {
                prop_assert!(s.regular_sum.abs() <= 1e-9);
            }
            for r in orthogonality_residuals(&u, phi, 10) {
                prop_assert!(r.abs() <= 1e-9);
            }
        }
    }
}
