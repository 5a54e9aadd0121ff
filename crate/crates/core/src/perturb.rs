//! Perturbations of `f` along a direction `g`, and one-parameter sweeps that
//! count equilibria and locate where constant branches change Morse index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibria::{analyze_all, find_equilibria, EquilibriaError, EquilibriumRecord, ScanWarning};
use crate::integrate::{integrate_ivp, integrate_variational};
use crate::poly::Poly;
use crate::problem::{ProblemError, ProblemSpec};
use crate::spectrum::{
    classify_hyperbolic, eigenvalues_sl, Base, HyperbolicityClass, SpectrumError, DEFAULT_EIGEN_COUNT,
};

const NEWTON_ITERS: usize = 50;
/// Crossings are bisected down to this width in the parameter.
pub const CROSSING_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbError {
    #[error("perturbation direction must vanish at u = 0 (g(0) = {0})")]
    NonzeroConstantTerm(f64),
    #[error("eps list must be nonempty and strictly increasing")]
    InvalidEpsList,
    #[error("a sweep needs at least 2 steps, got {0}")]
    TooFewSteps(usize),
    #[error("invalid parameter range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("coefficient index 0 cannot be a parameter (f(0) = 0 is fixed)")]
    ConstantCoefficient,
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Equilibria(#[from] EquilibriaError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

/// Which coefficient of `f` the sweep parameter controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum ParameterKind {
    /// `f_λ = λ f`.
    ScaleF,
    /// `f_λ` is `f` with coefficient `i` replaced by `λ`.
    FCoeff(usize),
}

#[derive(Debug, Clone)]
pub struct ParameterFamily {
    pub base: ProblemSpec,
    pub kind: ParameterKind,
}

impl ParameterFamily {
    pub fn new(base: ProblemSpec, kind: ParameterKind) -> Result<Self, PerturbError> {
        if kind == ParameterKind::FCoeff(0) {
            return Err(PerturbError::ConstantCoefficient);
        }
        Ok(ParameterFamily { base, kind })
    }

    pub fn spec_at(&self, lambda: f64) -> Result<ProblemSpec, ProblemError> {
        let f = match self.kind {
            ParameterKind::ScaleF => self.base.f().scale(lambda),
            ParameterKind::FCoeff(i) => {
                let mut c = self.base.f().coeffs().to_vec();
                if c.len() <= i {
                    c.resize(i + 1, 0.0);
                }
                c[i] = lambda;
                Poly::new(c)
            }
        };
        self.base.with_f(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyDescriptor {
    /// `f + ε g`, continued from the equilibrium at `u0`.
    Perturbation {
        f: Poly,
        g: Poly,
        u0: f64,
    },
    Sweep {
        f: Poly,
        parameter: ParameterKind,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub u0: f64,
    pub is_constant: bool,
    pub min_abs: f64,
    pub hyperbolic: HyperbolicityClass,
    pub morse_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `ε` or `λ`.
    pub parameter: f64,
    pub equilibrium_count: usize,
    pub nonconstant_count: usize,
    pub equilibria: Vec<BranchPoint>,
    pub continuation_lost: bool,
    pub tangency_warnings: usize,
}

/// A change of Morse index along a constant branch, bracketed in the
/// parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub u0: f64,
    pub lo: f64,
    pub hi: f64,
    pub morse_lo: usize,
    pub morse_hi: usize,
}

impl Crossing {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub family: FamilyDescriptor,
    /// Sorted by strictly increasing parameter.
    pub rows: Vec<SweepRow>,
    pub crossings: Vec<Crossing>,
}

fn branch_point(spec: &ProblemSpec, u0: f64, record: Option<&EquilibriumRecord>) -> Result<BranchPoint, SpectrumError> {
    let report = match record {
        Some(r) if !r.is_constant => eigenvalues_sl(spec, Base::Profile(&r.profile), DEFAULT_EIGEN_COUNT)?,
        _ => eigenvalues_sl(spec, Base::Constant(u0), DEFAULT_EIGEN_COUNT)?,
    };
    Ok(BranchPoint {
        u0,
        is_constant: record.is_none_or(|r| r.is_constant),
        min_abs: report.min_abs,
        hyperbolic: classify_hyperbolic(&report, spec.tol().hyp_tol),
        morse_index: report.morse_index(),
    })
}

fn newton_constant(f: &Poly, mut u: f64, tol: f64) -> Option<f64> {
    let df = f.derivative();
    for _ in 0..NEWTON_ITERS {
        let v = f.eval(u);
        if v.abs() <= tol * f.magnitude(u).max(1.0) {
            return Some(u);
        }
        let step = v / df.eval(u);
        if !step.is_finite() {
            return None;
        }
        u -= step;
    }
    None
}

fn newton_shooting(spec: &ProblemSpec, mut u0: f64) -> Option<EquilibriumRecord> {
    for _ in 0..NEWTON_ITERS {
        let u = integrate_ivp(spec, u0).ok()?;
        let v = integrate_variational(spec, &u).ok()?;
        let (m, slope) = (u.end_deriv(), v.end_deriv());
        if m.abs() <= spec.tol().root_tol * u.max_abs_deriv().max(1.0) {
            return Some(EquilibriumRecord {
                u0,
                is_constant: false,
                multiplicity: None,
                miss: m,
                miss_slope: slope,
                profile: u,
                critical_points: None,
                spectrum: None,
                flags: Default::default(),
            });
        }
        let step = m / slope;
        if !step.is_finite() {
            return None;
        }
        u0 -= step;
    }
    None
}

/// Continues `record` along `f + ε g` for each `ε` and reports the spectral
/// gap of the continued equilibrium.
pub fn perturbation_scan(
    spec: &ProblemSpec,
    record: &EquilibriumRecord,
    g: &Poly,
    eps_list: &[f64],
) -> Result<SweepResult, PerturbError> {
    if g.coeff(0) != 0.0 {
        return Err(PerturbError::NonzeroConstantTerm(g.coeff(0)));
    }
    if eps_list.is_empty() || eps_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(PerturbError::InvalidEpsList);
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    let mut last_u0 = record.u0;
    for &eps in eps_list {
        let perturbed = spec.with_f(&spec.f().add(&g.scale(eps)))?;
        let continued = if record.is_constant {
            newton_constant(perturbed.f(), last_u0, spec.tol().root_tol).map(|u0| (u0, None))
        } else {
            newton_shooting(&perturbed, last_u0).map(|r| (r.u0, Some(r)))
        };
        let row = match continued {
            Some((u0, rec)) => {
                last_u0 = u0;
                let point = branch_point(&perturbed, u0, rec.as_ref())?;
                SweepRow {
                    parameter: eps,
                    equilibrium_count: 1,
                    nonconstant_count: usize::from(!point.is_constant),
                    equilibria: vec![point],
                    continuation_lost: false,
                    tangency_warnings: 0,
                }
            }
            None => SweepRow {
                parameter: eps,
                equilibrium_count: 0,
                nonconstant_count: 0,
                equilibria: Vec::new(),
                continuation_lost: true,
                tangency_warnings: 0,
            },
        };
        rows.push(row);
    }
    Ok(SweepResult {
        family: FamilyDescriptor::Perturbation {
            f: spec.f().clone(),
            g: g.clone(),
            u0: record.u0,
        },
        rows,
        crossings: Vec::new(),
    })
}

fn sweep_row(family: &ParameterFamily, lambda: f64) -> Result<SweepRow, PerturbError> {
    let spec = family.spec_at(lambda)?;
    let mut set = find_equilibria(&spec)?;
    analyze_all(&spec, &mut set)?;
    let equilibria = set
        .records
        .iter()
        .map(|r| {
            let report = r.spectrum.as_ref().expect("analyzed");
            BranchPoint {
                u0: r.u0,
                is_constant: r.is_constant,
                min_abs: report.min_abs,
                hyperbolic: r.flags.hyperbolic.expect("analyzed"),
                morse_index: report.morse_index(),
            }
        })
        .collect();
    Ok(SweepRow {
        parameter: lambda,
        equilibrium_count: set.records.len(),
        nonconstant_count: set.nonconstant_count(),
        equilibria,
        continuation_lost: false,
        tangency_warnings: set
            .warnings
            .iter()
            .filter(|w| matches!(w, ScanWarning::TangencyUnresolved { .. }))
            .count(),
    })
}

fn constant_morse(family: &ParameterFamily, lambda: f64, u0: f64) -> Result<usize, PerturbError> {
    let spec = family.spec_at(lambda)?;
    Ok(eigenvalues_sl(&spec, Base::Constant(u0), DEFAULT_EIGEN_COUNT)?.morse_index())
}

fn same_branch(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(1.0)
}

/// Equilibria and spectra at `n_steps` evenly spaced parameter values, with
/// Morse-index changes along constant branches bisected to [`CROSSING_TOL`].
pub fn bifurcation_sweep(
    family: &ParameterFamily,
    range: (f64, f64),
    n_steps: usize,
) -> Result<SweepResult, PerturbError> {
    let (lo, hi) = range;
    if n_steps < 2 {
        return Err(PerturbError::TooFewSteps(n_steps));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(PerturbError::InvalidRange { lo, hi });
    }
    let params: Vec<f64> = (0..n_steps)
        .map(|i| lo + (hi - lo) * i as f64 / (n_steps - 1) as f64)
        .collect();
    let rows = params
        .iter()
        .map(|&l| sweep_row(family, l))
        .collect::<Result<Vec<_>, _>>()?;

    let mut brackets = Vec::new();
    for w in rows.windows(2) {
        for a in w[0].equilibria.iter().filter(|e| e.is_constant) {
            let Some(b) = w[1]
                .equilibria
                .iter()
                .find(|e| e.is_constant && same_branch(a.u0, e.u0))
            else {
                continue;
            };
            if a.morse_index != b.morse_index {
                brackets.push((a.u0, w[0].parameter, w[1].parameter, a.morse_index));
            }
        }
    }
    let crossings = brackets
        .par_iter()
        .map(|&(u0, mut l, mut h, morse_lo)| {
            let mut morse_hi = constant_morse(family, h, u0)?;
            while h - l > CROSSING_TOL {
                let mid = 0.5 * (l + h);
                let m = constant_morse(family, mid, u0)?;
                if m == morse_lo {
                    l = mid;
                } else {
                    h = mid;
                    morse_hi = m;
                }
            }
            Ok(Crossing {
                u0,
                lo: l,
                hi: h,
                morse_lo,
                morse_hi,
            })
        })
        .collect::<Result<Vec<_>, PerturbError>>()?;

    Ok(SweepResult {
        family: FamilyDescriptor::Sweep {
            f: family.base.f().clone(),
            parameter: family.kind,
        },
        rows,
        crossings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::find_equilibria;
    use std::f64::consts::PI;

    fn resonant() -> (ProblemSpec, EquilibriumRecord) {
        let s = ProblemSpec::new(vec![1.0], vec![0.0, PI * PI]).unwrap();
        let set = find_equilibria(&s).unwrap();
        let r = set.records.into_iter().find(|r| r.is_constant).unwrap();
        (s, r)
    }

    #[test]
    fn linear_direction_shifts_the_spectrum() {
        let (s, r) = resonant();
        let eps = [1e-4, 1e-3, 1e-2];
        let out = perturbation_scan(&s, &r, &Poly::new(vec![0.0, 1.0]), &eps).unwrap();
        for (row, e) in out.rows.iter().zip(eps) {
            assert!(!row.continuation_lost);
            assert!(
                (row.equilibria[0].min_abs - e).abs() <= 1e-8,
                "{} vs {e}",
                row.equilibria[0].min_abs
            );
        }
    }

    #[test]
    fn quadratic_direction_keeps_resonance() {
        let (s, r) = resonant();
        let out = perturbation_scan(&s, &r, &Poly::new(vec![0.0, 0.0, 1.0]), &[1e-3, 1e-2]).unwrap();
        for row in &out.rows {
            assert!(row.equilibria[0].min_abs < s.tol().hyp_tol);
            assert_eq!(row.equilibria[0].u0, 0.0);
        }
    }

    #[test]
    fn invalid_inputs() {
        let (s, r) = resonant();
        assert_eq!(
            perturbation_scan(&s, &r, &Poly::new(vec![1.0, 1.0]), &[1e-3]),
            Err(PerturbError::NonzeroConstantTerm(1.0))
        );
        assert_eq!(
            perturbation_scan(&s, &r, &Poly::new(vec![0.0, 1.0]), &[1e-2, 1e-3]),
            Err(PerturbError::InvalidEpsList)
        );
        let fam = ParameterFamily::new(s.clone(), ParameterKind::ScaleF).unwrap();
        assert_eq!(
            bifurcation_sweep(&fam, (1.0, 2.0), 1),
            Err(PerturbError::TooFewSteps(1))
        );
        assert!(ParameterFamily::new(s, ParameterKind::FCoeff(0)).is_err());
    }

    #[test]
    fn coefficient_family() {
        let base = ProblemSpec::new(vec![1.0], vec![0.0, 1.0, 0.0, -1.0]).unwrap();
        let fam = ParameterFamily::new(base, ParameterKind::FCoeff(1)).unwrap();
        assert_eq!(fam.spec_at(3.0).unwrap().f().coeffs(), &[0.0, 3.0, 0.0, -1.0]);
        let fam5 = ParameterFamily::new(fam.base.clone(), ParameterKind::FCoeff(5)).unwrap();
        assert_eq!(
            fam5.spec_at(2.0).unwrap().f().coeffs(),
            &[0.0, 1.0, 0.0, -1.0, 0.0, 2.0]
        );
    }

    #[test]
    fn chafee_infante_first_crossing() {
        let base = ProblemSpec::new(vec![1.0], vec![0.0, 1.0, 0.0, -1.0]).unwrap();
        let fam = ParameterFamily::new(base, ParameterKind::ScaleF).unwrap();
        let out = bifurcation_sweep(&fam, (8.0, 12.0), 3).unwrap();
        assert_eq!(out.crossings.len(), 1);
        let c = out.crossings[0];
        assert_eq!(c.u0, 0.0);
        assert!((c.midpoint() - PI * PI).abs() < 1e-4);
        assert_eq!((c.morse_lo, c.morse_hi), (1, 2));
        assert_eq!(out.rows[0].nonconstant_count, 0);
        assert_eq!(out.rows[2].nonconstant_count, 2);
    }
}
