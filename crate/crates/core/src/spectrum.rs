//! Spectrum of the linearization `(a w')' + f'(u) w = λ w` with Neumann
//! conditions, hyperbolicity classification and the Wronskian identity for
//! constant diffusion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{IntegrateError, Profile, ProfileKind};
use crate::levelsets::critical_points;
use crate::ode::{dopri5, Tolerances};
use crate::problem::ProblemSpec;
use crate::tridiag::SymTridiag;

pub const DEFAULT_EIGEN_COUNT: usize = 8;
const WRONSKIAN_SAMPLES: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("discretization error estimate {estimate:e} exceeds {limit:e}; increase grid_n")]
    GridTooCoarse { estimate: f64, limit: f64 },
    #[error("u0 = {u0} is not a constant equilibrium (f(u0) = {residual:e})")]
    NotAnEquilibrium { u0: f64, residual: f64 },
    #[error("the Wronskian identity needs constant diffusion")]
    NotConstantA,
    #[error("f is the zero polynomial")]
    ZeroPolynomial,
    #[error("degenerate critical point at x = {x}")]
    DegenerateCritical { x: f64 },
    #[error("expected a {expected:?} profile")]
    WrongProfileKind { expected: ProfileKind },
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// The state the problem is linearized about.
#[derive(Debug, Clone, Copy)]
pub enum Base<'a> {
    Profile(&'a Profile),
    Constant(f64),
}

impl Base<'_> {
    fn value(&self, x: f64) -> f64 {
        match self {
            Base::Profile(p) => p.value(x),
            Base::Constant(u0) => *u0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    FdTridiag,
    Prufer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperbolicityClass {
    Hyperbolic,
    NonHyperbolic,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Largest eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub min_abs: f64,
    /// Estimated absolute error of the eigenvalue closest to zero.
    pub error_estimate: f64,
    pub grid_n: usize,
    pub method: SpectrumMethod,
    /// The smallest computed eigenvalue is negative, so every eigenvalue
    /// near zero is in the list.
    pub window_covers_zero: bool,
}

impl SpectrumReport {
    /// Number of positive eigenvalues.
    pub fn morse_index(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > 0.0).count()
    }
}

/// Conservative vertex-centred discretization of `w ↦ (a w')' + q w` on
/// `x_i = i/n`, Neumann ends by reflection, symmetrized by `diag(½,1,…,1,½)`.
pub fn assemble(spec: &ProblemSpec, potential: impl Fn(f64) -> f64, n: usize) -> SymTridiag {
    let h = 1.0 / n as f64;
    let h2 = h * h;
    let a = spec.a();
    let half: Vec<f64> = (0..n).map(|i| a.eval((i as f64 + 0.5) * h)).collect();
    let mut d = Vec::with_capacity(n + 1);
    let mut e = Vec::with_capacity(n);
    for i in 0..=n {
        let q = potential(i as f64 * h);
        let flux = if i == 0 {
            2.0 * half[0]
        } else if i == n {
            2.0 * half[n - 1]
        } else {
            half[i - 1] + half[i]
        };
        d.push(q - flux / h2);
    }
    for i in 0..n {
        let scale = if i == 0 || i == n - 1 {
            std::f64::consts::SQRT_2
        } else {
            1.0
        };
        e.push(scale * half[i] / h2);
    }
    SymTridiag::new(d, e)
}

fn top_on_grid(spec: &ProblemSpec, potential: &impl Fn(f64) -> f64, n: usize, k: usize) -> Vec<f64> {
    assemble(spec, potential, n).top_eigenvalues(k)
}

fn extrapolate(fine: f64, coarse: f64, ratio: f64) -> f64 {
    fine + (fine - coarse) / (ratio * ratio - 1.0)
}

fn index_of_min_abs(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Top eigenvalues of `w ↦ (a w')' + q w`, plus `shift`, Richardson-extrapolated
/// from grids `n`, `n/2` and `n/4`; `k` grows until the window reaches below `-1`.
fn fd_spectrum(
    spec: &ProblemSpec,
    potential: impl Fn(f64) -> f64,
    shift: f64,
    k: usize,
) -> Result<SpectrumReport, SpectrumError> {
    let n = spec.grid_n();
    let (n2, n4) = (n / 2, n / 4);
    let max_k = n4 + 1;
    let floor = -(10.0 * spec.tol().hyp_tol).max(1.0);
    let mut k = k.clamp(1, max_k);
    let mut fine = top_on_grid(spec, &potential, n, k);
    while fine.last().expect("k >= 1") + shift >= floor && k < max_k {
        k = (2 * k).min(max_k);
        fine = top_on_grid(spec, &potential, n, k);
    }
    let mid = top_on_grid(spec, &potential, n2, k);
    let coarse = top_on_grid(spec, &potential, n4, k);
    let r1 = n as f64 / n2 as f64;
    let r2 = n2 as f64 / n4 as f64;
    let best: Vec<f64> = fine
        .iter()
        .zip(&mid)
        .map(|(&f, &m)| extrapolate(f, m, r1) + shift)
        .collect();
    let rough: Vec<f64> = mid
        .iter()
        .zip(&coarse)
        .map(|(&m, &c)| extrapolate(m, c, r2) + shift)
        .collect();
    let j = index_of_min_abs(&best);
    let estimate = (best[j] - rough[j]).abs();
    let limit = spec.tol().hyp_tol / 10.0;
    if estimate > limit {
        return Err(SpectrumError::GridTooCoarse { estimate, limit });
    }
    Ok(SpectrumReport {
        min_abs: best[j].abs(),
        window_covers_zero: *best.last().expect("k >= 1") < 0.0,
        eigenvalues: best,
        error_estimate: estimate,
        grid_n: n,
        method: SpectrumMethod::FdTridiag,
    })
}

/// Top `k` eigenvalues (at least) of the linearization about `base`.
pub fn eigenvalues_sl(spec: &ProblemSpec, base: Base<'_>, k: usize) -> Result<SpectrumReport, SpectrumError> {
    if let Base::Profile(p) = base {
        if p.kind != ProfileKind::Solution {
            return Err(SpectrumError::WrongProfileKind {
                expected: ProfileKind::Solution,
            });
        }
    }
    let df = spec.f().derivative();
    fd_spectrum(spec, |x| df.eval(base.value(x)), 0.0, k)
}

/// Banded decision on `min_abs` against `hyp_tol`, widened by the error
/// estimate.
pub fn classify_hyperbolic(report: &SpectrumReport, hyp_tol: f64) -> HyperbolicityClass {
    classify_gap(report.min_abs, report.error_estimate, hyp_tol)
}

fn classify_gap(min_abs: f64, estimate: f64, hyp_tol: f64) -> HyperbolicityClass {
    if min_abs > hyp_tol + estimate {
        HyperbolicityClass::Hyperbolic
    } else if min_abs < hyp_tol - estimate {
        HyperbolicityClass::NonHyperbolic
    } else {
        HyperbolicityClass::Undecided
    }
}

/// Hyperbolicity of the constant equilibrium `u0` from the Neumann spectrum
/// `μ_n` of `φ ↦ (a φ')'`: the linearization has eigenvalues `f'(u0) + μ_n`.
pub fn check_constant_hyperbolic(spec: &ProblemSpec, u0: f64) -> Result<HyperbolicityClass, SpectrumError> {
    let (fu, dfu, _) = spec.evaluate_f(u0);
    if fu.abs() > spec.tol().root_tol * spec.f().magnitude(u0).max(1.0) {
        return Err(SpectrumError::NotAnEquilibrium { u0, residual: fu });
    }
    let shifted = fd_spectrum(spec, |_| 0.0, dfu, DEFAULT_EIGEN_COUNT)?;
    Ok(classify_hyperbolic(&shifted, spec.tol().hyp_tol))
}

/// Top `k` eigenvalues by Prüfer-angle shooting: with `w = r sin θ`,
/// `a w' = r cos θ`, the `j`-th largest eigenvalue solves
/// `θ(1; λ) = π/2 + jπ` from `θ(0) = π/2`.
pub fn prufer_eigenvalues(spec: &ProblemSpec, base: Base<'_>, k: usize) -> Result<SpectrumReport, SpectrumError> {
    let df = spec.f().derivative();
    let q = |x: f64| df.eval(base.value(x));
    let a = spec.a();
    let tol = Tolerances { rel: 1e-12, abs: 1e-12 };
    let theta_end = |lambda: f64| -> Result<f64, SpectrumError> {
        let sol = dopri5(
            |x, th: &[f64; 1]| {
                let (s, c) = th[0].sin_cos();
                [c * c / a.eval(x) + (q(x) - lambda) * s * s]
            },
            0.0,
            [std::f64::consts::FRAC_PI_2],
            1.0,
            &tol,
            |_| false,
        )
        .map_err(IntegrateError::from)?;
        Ok(sol.states.last().expect("nonempty")[0])
    };
    let q_max = (0..=1000)
        .map(|i| q(i as f64 / 1000.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut eigenvalues = Vec::with_capacity(k);
    for j in 0..k {
        let target = std::f64::consts::FRAC_PI_2 + j as f64 * std::f64::consts::PI;
        let mut hi = q_max + 1.0;
        if let Some(&prev) = eigenvalues.last() {
            hi = hi.min(prev);
        }
        let mut step = 1.0f64;
        let mut lo = hi - step;
        while theta_end(lo)? <= target {
            hi = lo;
            step *= 2.0;
            lo = hi - step;
        }
        // θ(1; λ) is decreasing in λ: θ(lo) > target ≥ θ(hi)
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-13 * mid.abs().max(1.0) {
                break;
            }
            if theta_end(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        eigenvalues.push(0.5 * (lo + hi));
    }
    let j = index_of_min_abs(&eigenvalues);
    Ok(SpectrumReport {
        min_abs: eigenvalues.get(j).map_or(f64::INFINITY, |v| v.abs()),
        window_covers_zero: eigenvalues.last().is_some_and(|&l| l < 0.0),
        eigenvalues,
        error_estimate: 0.0,
        grid_n: 0,
        method: SpectrumMethod::Prufer,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalCheck {
    pub x: f64,
    /// `φ(p)` from the profile.
    pub phi: f64,
    /// `-k a / f(u(p))`.
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WronskianTrace {
    pub grid: Vec<f64>,
    /// `W(x) = a (u' φ' - u'' φ)`.
    pub samples: Vec<f64>,
    /// `(max W - min W) / max |W|`.
    pub max_rel_variation: f64,
    /// `k = φ(p) u''(p)`, equal to `-W / a`.
    pub k: f64,
    pub critical_checks: Vec<CriticalCheck>,
}

/// Samples the Wronskian of `u'` and `φ` for constant `a` and checks
/// `φ(p) u''(p) = k` at the critical points of `u`.
pub fn wronskian_constancy(spec: &ProblemSpec, base: &Profile, phi: &Profile) -> Result<WronskianTrace, SpectrumError> {
    if !spec.is_constant_diffusion() {
        return Err(SpectrumError::NotConstantA);
    }
    if spec.f().is_zero() {
        return Err(SpectrumError::ZeroPolynomial);
    }
    if base.kind != ProfileKind::Solution {
        return Err(SpectrumError::WrongProfileKind {
            expected: ProfileKind::Solution,
        });
    }
    let a = spec.a().coeff(0);
    let f = spec.f();
    let second = |x: f64| -f.eval(base.value(x)) / a;
    let grid: Vec<f64> = (0..WRONSKIAN_SAMPLES)
        .map(|i| i as f64 / (WRONSKIAN_SAMPLES - 1) as f64)
        .collect();
    let samples: Vec<f64> = grid
        .iter()
        .map(|&x| a * (base.deriv(x) * phi.deriv(x) - second(x) * phi.value(x)))
        .collect();
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = samples.iter().map(|w| w.abs()).fold(0.0, f64::max);
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let k = -mean / a;

    let mut critical_checks = Vec::new();
    for c in critical_points(base, spec.tol()).points {
        if c.degenerate {
            return Err(SpectrumError::DegenerateCritical { x: c.x });
        }
        let fu = f.eval(c.value);
        critical_checks.push(CriticalCheck {
            x: c.x,
            phi: phi.value(c.x),
            predicted: -k * a / fu,
        });
    }
    Ok(WronskianTrace {
        grid,
        samples,
        max_rel_variation: if scale > 0.0 { (max - min) / scale } else { 0.0 },
        k,
        critical_checks,
    })
}
