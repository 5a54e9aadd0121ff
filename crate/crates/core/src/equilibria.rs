//! Equilibria by shooting on `u0 = u(0)`, merged with the constant
//! equilibria given by the real roots of `f`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exceptional::ExceptionalClass;
use crate::integrate::{integrate_ivp, integrate_variational, IntegrateError, Profile};
use crate::levelsets::{critical_points, CriticalSet};
use crate::poly::Poly;
use crate::problem::ProblemSpec;
use crate::spectrum::{
    classify_hyperbolic, eigenvalues_sl, Base, HyperbolicityClass, SpectrumError, SpectrumReport, DEFAULT_EIGEN_COUNT,
};

/// Initial number of scan points; refinements double the number of cells.
pub const MIN_SCAN_POINTS: usize = 512;
pub const MAX_SCAN_POINTS: usize = 8192;
const MAX_ROOT_ITERS: usize = 200;
const GOLDEN_ITERS: usize = 80;
/// A dip of `|m|` below this fraction of its neighbours is a tangency.
const TANGENCY_RATIO: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriaError {
    #[error("f is the zero polynomial: every constant is an equilibrium")]
    ZeroPolynomial,
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordFlags {
    pub hyperbolic: Option<HyperbolicityClass>,
    pub exceptional: Option<ExceptionalClass>,
    /// Found at a dip of `|m|` without a sign change.
    pub tangency_unresolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRecord {
    pub u0: f64,
    pub is_constant: bool,
    /// Root multiplicity in `f`, for constant records.
    pub multiplicity: Option<usize>,
    /// `u'(1)`.
    pub miss: f64,
    /// `v'(1)`, the derivative of the miss with respect to `u0`.
    pub miss_slope: f64,
    pub profile: Profile,
    pub critical_points: Option<CriticalSet>,
    pub spectrum: Option<SpectrumReport>,
    pub flags: RecordFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanWarning {
    /// `|m|` dips close to zero without changing sign near `u0`.
    TangencyUnresolved { u0: f64, miss: f64 },
    /// Constant equilibrium at a multiple root of `f`.
    MultipleRoot { u0: f64, multiplicity: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingScan {
    /// Uniform grid on `[-scan_bound, scan_bound]`.
    pub grid: Vec<f64>,
    /// `m(u0)`, `None` where the integration blew up.
    pub misses: Vec<Option<f64>>,
    pub brackets: Vec<(f64, f64)>,
    pub tangencies: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub scan: ShootingScan,
    /// Sorted by `u0`.
    pub records: Vec<EquilibriumRecord>,
    pub warnings: Vec<ScanWarning>,
}

impl EquilibriumSet {
    pub fn nonconstant_count(&self) -> usize {
        self.records.iter().filter(|r| !r.is_constant).count()
    }
}

/// Real roots of `f` in the scan range with multiplicities.
pub fn constant_equilibria(spec: &ProblemSpec) -> Result<Vec<(f64, usize)>, EquilibriaError> {
    if spec.f().is_zero() {
        return Err(EquilibriaError::ZeroPolynomial);
    }
    let b = spec.scan_bound();
    // Factor out u^k first so that the root at zero comes out exact.
    let coeffs = spec.f().coeffs();
    let k = coeffs.iter().take_while(|&&c| c == 0.0).count();
    let mut roots: Vec<(f64, usize)> = Poly::new(coeffs[k..].to_vec())
        .real_roots(-b, b)
        .into_iter()
        .map(|r| (r.x, r.multiplicity))
        .collect();
    if k > 0 {
        roots.push((0.0, k));
        roots.sort_by(|x, y| x.0.total_cmp(&y.0));
    }
    Ok(roots)
}

/// `m(u0) = u'(1; u0)` and `m'(u0) = v'(1)`.
pub fn shooting_miss(spec: &ProblemSpec, u0: f64) -> Result<(f64, f64), IntegrateError> {
    let u = integrate_ivp(spec, u0)?;
    let v = integrate_variational(spec, &u)?;
    Ok((u.end_deriv(), v.end_deriv()))
}

fn miss_only(spec: &ProblemSpec, u0: f64) -> Option<f64> {
    integrate_ivp(spec, u0).ok().map(|p| p.end_deriv())
}

fn scan_grid(bound: f64, cells: usize) -> Vec<f64> {
    (0..=cells)
        .map(|i| -bound + 2.0 * bound * i as f64 / cells as f64)
        .collect()
}

fn sign_events(misses: &[Option<f64>]) -> usize {
    let mut count = 0;
    for i in 0..misses.len() {
        match (misses[i], misses.get(i + 1).copied().flatten()) {
            (Some(m), _) if m == 0.0 => count += 1,
            (Some(a), Some(b)) if b != 0.0 && a.signum() != b.signum() => count += 1,
            _ => {}
        }
    }
    count
}

/// Samples the shooting map, doubling the resolution until the number of
/// sign changes agrees between two consecutive grids.
fn adaptive_scan(spec: &ProblemSpec) -> (Vec<f64>, Vec<Option<f64>>) {
    let bound = spec.scan_bound();
    let mut cells = MIN_SCAN_POINTS - 1;
    let mut grid = scan_grid(bound, cells);
    let mut misses: Vec<Option<f64>> = grid.par_iter().map(|&u| miss_only(spec, u)).collect();
    while 2 * cells < MAX_SCAN_POINTS {
        let finer_grid = scan_grid(bound, 2 * cells);
        let fresh: Vec<Option<f64>> = finer_grid
            .par_iter()
            .skip(1)
            .step_by(2)
            .map(|&u| miss_only(spec, u))
            .collect();
        let mut finer = Vec::with_capacity(finer_grid.len());
        for (i, m) in misses.iter().enumerate() {
            finer.push(*m);
            if let Some(f) = fresh.get(i) {
                finer.push(*f);
            }
        }
        let stable = sign_events(&finer) == sign_events(&misses);
        grid = finer_grid;
        misses = finer;
        cells *= 2;
        if stable {
            break;
        }
    }
    (grid, misses)
}

fn miss_tolerance(spec: &ProblemSpec, profile: &Profile) -> f64 {
    spec.tol().root_tol * profile.max_abs_deriv().max(1.0)
}

struct Root {
    u0: f64,
    miss: f64,
    tangency: bool,
}

/// Hybrid Newton/bisection on a sign-change bracket.
fn refine_bracket(spec: &ProblemSpec, mut lo: f64, mut hi: f64, m_lo: f64) -> Option<Root> {
    let s_lo = m_lo.signum();
    let mut x = 0.5 * (lo + hi);
    let mut best: Option<Root> = None;
    for _ in 0..MAX_ROOT_ITERS {
        let u = integrate_ivp(spec, x).ok()?;
        let v = integrate_variational(spec, &u).ok()?;
        let (m, slope) = (u.end_deriv(), v.end_deriv());
        if best.as_ref().is_none_or(|b| m.abs() < b.miss.abs()) {
            best = Some(Root {
                u0: x,
                miss: m,
                tangency: false,
            });
        }
        if m.abs() <= miss_tolerance(spec, &u) {
            break;
        }
        if m.signum() == s_lo {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - m / slope;
        let next = if slope != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x || hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            break;
        }
        x = next;
    }
    best
}

/// Golden-section minimum of `|m|` on `[lo, hi]`.
fn minimize_abs_miss(spec: &ProblemSpec, mut lo: f64, mut hi: f64) -> Option<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let mut mc = miss_only(spec, c)?;
    let mut md = miss_only(spec, d)?;
    for _ in 0..GOLDEN_ITERS {
        if mc.abs() < md.abs() {
            hi = d;
            d = c;
            md = mc;
            c = hi - g * (hi - lo);
            mc = miss_only(spec, c)?;
        } else {
            lo = c;
            c = d;
            mc = md;
            d = lo + g * (hi - lo);
            md = miss_only(spec, d)?;
        }
    }
    Some(if mc.abs() < md.abs() { (c, mc) } else { (d, md) })
}

fn near_constant(constants: &[(f64, usize)], lo: f64, hi: f64) -> bool {
    constants.iter().any(|&(c, _)| c >= lo && c <= hi)
}

/// Scans `[-scan_bound, scan_bound]` for zeros of the shooting map and
/// returns them together with the constant equilibria.
pub fn find_equilibria(spec: &ProblemSpec) -> Result<EquilibriumSet, EquilibriaError> {
    let constants = constant_equilibria(spec)?;
    let (grid, misses) = adaptive_scan(spec);
    let n = grid.len();

    let mut brackets = Vec::new();
    let mut exact = Vec::new();
    for i in 0..n {
        match (misses[i], misses.get(i + 1).copied().flatten()) {
            (Some(m), _) if m == 0.0 => exact.push(grid[i]),
            (Some(a), Some(b)) if b != 0.0 && a.signum() != b.signum() => brackets.push((grid[i], grid[i + 1], a)),
            _ => {}
        }
    }

    let mut tangencies = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let (Some(l), Some(m), Some(r)) = (misses[i - 1], misses[i], misses[i + 1]) else {
            continue;
        };
        if m == 0.0 || l.signum() != m.signum() || r.signum() != m.signum() {
            continue;
        }
        if m.abs() < l.abs() && m.abs() < r.abs() {
            tangencies.push((grid[i - 1], grid[i + 1], l.abs().max(r.abs())));
        }
    }

    // Tangency cells either split into two sign-change brackets or are reported.
    let probed: Vec<Option<(f64, f64)>> = tangencies
        .par_iter()
        .map(|&(lo, hi, _)| minimize_abs_miss(spec, lo, hi))
        .collect();
    let mut warnings = Vec::new();
    let mut tangency_roots = Vec::new();
    for (&(lo, hi, side), probe) in tangencies.iter().zip(&probed) {
        let Some((x, m)) = *probe else { continue };
        let m_lo = miss_only(spec, lo).unwrap_or(m);
        if m != 0.0 && m.signum() != m_lo.signum() {
            brackets.push((lo, x, m_lo));
            brackets.push((x, hi, m));
        } else if m.abs() <= TANGENCY_RATIO * side.max(1.0) && !near_constant(&constants, lo, hi) {
            warnings.push(ScanWarning::TangencyUnresolved { u0: x, miss: m });
            tangency_roots.push(x);
        }
    }

    let mut roots: Vec<Root> = brackets
        .par_iter()
        .filter(|&&(lo, hi, _)| !near_constant(&constants, lo, hi))
        .filter_map(|&(lo, hi, m_lo)| refine_bracket(spec, lo, hi, m_lo))
        .collect();
    for x in exact.into_iter().filter(|&x| !near_constant(&constants, x, x)) {
        roots.push(Root {
            u0: x,
            miss: 0.0,
            tangency: false,
        });
    }
    for x in tangency_roots {
        let u = integrate_ivp(spec, x)?;
        if u.end_deriv().abs() <= miss_tolerance(spec, &u) {
            roots.push(Root {
                u0: x,
                miss: u.end_deriv(),
                tangency: true,
            });
        }
    }

    let dedup = 10.0 * spec.tol().root_tol;
    roots.sort_by(|a, b| a.u0.total_cmp(&b.u0));
    let mut kept: Vec<Root> = Vec::new();
    for r in roots {
        if constants.iter().any(|&(c, _)| (c - r.u0).abs() <= dedup) {
            continue;
        }
        match kept.last_mut() {
            Some(last) if (r.u0 - last.u0).abs() <= dedup => {
                if r.miss.abs() < last.miss.abs() {
                    *last = r;
                }
            }
            _ => kept.push(r),
        }
    }

    let mut records = Vec::with_capacity(kept.len() + constants.len());
    for r in &kept {
        records.push(make_record(spec, r.u0, None, r.tangency)?);
    }
    for &(c, mult) in &constants {
        if mult > 1 {
            warnings.push(ScanWarning::MultipleRoot {
                u0: c,
                multiplicity: mult,
            });
        }
        records.push(make_record(spec, c, Some(mult), false)?);
    }
    records.sort_by(|a, b| a.u0.total_cmp(&b.u0));

    Ok(EquilibriumSet {
        scan: ShootingScan {
            grid,
            misses,
            brackets: brackets.iter().map(|&(lo, hi, _)| (lo, hi)).collect(),
            tangencies: tangencies.iter().map(|&(lo, hi, _)| (lo, hi)).collect(),
        },
        records,
        warnings,
    })
}

fn make_record(
    spec: &ProblemSpec,
    u0: f64,
    multiplicity: Option<usize>,
    tangency: bool,
) -> Result<EquilibriumRecord, EquilibriaError> {
    let profile = integrate_ivp(spec, u0)?;
    let v = integrate_variational(spec, &profile)?;
    Ok(EquilibriumRecord {
        u0,
        is_constant: multiplicity.is_some(),
        multiplicity,
        miss: profile.end_deriv(),
        miss_slope: v.end_deriv(),
        profile,
        critical_points: None,
        spectrum: None,
        flags: RecordFlags {
            hyperbolic: None,
            exceptional: None,
            tangency_unresolved: tangency,
        },
    })
}

/// Fills critical points, spectrum and hyperbolicity of one record.
pub fn analyze_record(spec: &ProblemSpec, record: &mut EquilibriumRecord) -> Result<(), EquilibriaError> {
    let base = if record.is_constant {
        Base::Constant(record.u0)
    } else {
        Base::Profile(&record.profile)
    };
    let report = eigenvalues_sl(spec, base, DEFAULT_EIGEN_COUNT)?;
    record.flags.hyperbolic = Some(classify_hyperbolic(&report, spec.tol().hyp_tol));
    record.spectrum = Some(report);
    record.critical_points = Some(critical_points(&record.profile, spec.tol()));
    Ok(())
}

/// Runs [`analyze_record`] on every record.
pub fn analyze_all(spec: &ProblemSpec, set: &mut EquilibriumSet) -> Result<(), EquilibriaError> {
    set.records
        .par_iter_mut()
        .map(|r| analyze_record(spec, r))
        .collect::<Result<Vec<()>, _>>()?;
    Ok(())
}
