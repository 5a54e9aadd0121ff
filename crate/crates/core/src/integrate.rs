//! Initial value problems for equilibria and their linear variational
//! equation, integrated in momentum form `(u, p = a u')`.
//!
//! The momentum form needs `a` but never `a'`, and the Neumann condition at
//! `x = 0` becomes `p(0) = 0`, which is imposed exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::{dopri5, DenseSolution, OdeError, Tolerances};
use crate::poly::Poly;
use crate::problem::ProblemSpec;

/// Growth cap on `|u|` (or `|v|`) before an integration is declared a blow-up.
pub const BLOW_UP_CAP: f64 = 1e6;

pub const PROFILE_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("solution blew up (|u| > 1e6) at x = {x}")]
    BlowUp { x: f64 },
    #[error("step size collapsed below 1e-14 at x = {x}")]
    StepUnderflow { x: f64 },
    #[error("initial value {u0} exceeds 10 x scan_bound = {limit}")]
    InitialValueOutOfRange { u0: f64, limit: f64 },
    #[error("variational integration needs a solution profile as base")]
    NotASolutionProfile,
}

impl From<OdeError> for IntegrateError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::BlowUp { x } => IntegrateError::BlowUp { x },
            OdeError::StepUnderflow { x, .. } => IntegrateError::StepUnderflow { x },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Solution,
    Variational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolantKind {
    /// Fourth-order continuous extension of Dormand–Prince 5(4).
    Dopri5Continuous,
}

/// A computed solution on `[0, 1]` with dense output.
///
/// States are `(u, p)` with `p = a u'` (or `(v, a v')` for a variational
/// profile). `u'` is recovered as `p / a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub version: u32,
    pub kind: ProfileKind,
    pub interpolant: InterpolantKind,
    /// Diffusion coefficient the profile was computed with.
    pub a: Poly,
    #[serde(flatten)]
    dense: DenseSolution<2>,
}

impl Profile {
    fn from_dense(kind: ProfileKind, a: &Poly, dense: DenseSolution<2>) -> Self {
        Profile {
            version: PROFILE_VERSION,
            kind,
            interpolant: InterpolantKind::Dopri5Continuous,
            a: a.clone(),
            dense,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.dense.nodes
    }

    pub fn states(&self) -> &[[f64; 2]] {
        &self.dense.states
    }

    pub fn value(&self, x: f64) -> f64 {
        self.dense.eval(x)[0]
    }

    /// Momentum `p = a u'`.
    pub fn flux(&self, x: f64) -> f64 {
        self.dense.eval(x)[1]
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.flux(x) / self.a.eval(x)
    }

    /// `u''` from the interpolant: `(p' - a' u') / a`.
    pub fn second_deriv(&self, x: f64) -> f64 {
        let (a, da, _) = self.a.eval_with_derivs(x);
        let y = self.dense.eval(x);
        let dp = self.dense.eval_deriv(x)[1];
        (dp - da * y[1] / a) / a
    }

    /// `p'` from the interpolant.
    pub fn flux_deriv(&self, x: f64) -> f64 {
        self.dense.eval_deriv(x)[1]
    }

    pub fn initial_value(&self) -> f64 {
        self.dense.states[0][0]
    }

    pub fn end_state(&self) -> [f64; 2] {
        *self.dense.states.last().expect("profile has at least one node")
    }

    /// `u'(1)`.
    pub fn end_deriv(&self) -> f64 {
        self.end_state()[1] / self.a.eval(1.0)
    }

    /// Sampling grid refining every step `per_step` times.
    pub fn refined_grid(&self, per_step: usize) -> Vec<f64> {
        let nodes = self.nodes();
        let mut grid = Vec::with_capacity(nodes.len() * per_step);
        for w in nodes.windows(2) {
            for j in 0..per_step {
                grid.push(w[0] + (w[1] - w[0]) * j as f64 / per_step as f64);
            }
        }
        grid.push(*nodes.last().unwrap());
        grid
    }

    pub fn max_abs_deriv(&self) -> f64 {
        self.refined_grid(4)
            .into_iter()
            .map(|x| self.deriv(x).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_value(&self) -> f64 {
        self.refined_grid(4)
            .into_iter()
            .map(|x| self.value(x).abs())
            .fold(0.0, f64::max)
    }
}

fn tolerances(spec: &ProblemSpec) -> Tolerances {
    Tolerances {
        rel: spec.tol().ode_rel,
        abs: spec.tol().ode_abs,
    }
}

/// Solves `(a u')' + f(u) = 0`, `u(0) = u0`, `u'(0) = 0` on `[0, 1]`.
pub fn integrate_ivp(spec: &ProblemSpec, u0: f64) -> Result<Profile, IntegrateError> {
    let limit = 10.0 * spec.scan_bound();
    if !(u0.abs() <= limit) {
        return Err(IntegrateError::InitialValueOutOfRange { u0, limit });
    }
    let a = spec.a();
    let f = spec.f();
    let dense = dopri5(
        |x, y: &[f64; 2]| [y[1] / a.eval(x), -f.eval(y[0])],
        0.0,
        [u0, 0.0],
        1.0,
        &tolerances(spec),
        |y| y[0].abs() > BLOW_UP_CAP,
    )?;
    Ok(Profile::from_dense(ProfileKind::Solution, a, dense))
}

/// Solves `(a v')' + f'(u(x)) v = 0`, `v(0) = 1`, `v'(0) = 0` along `base`;
/// the result is `∂u/∂u0`.
pub fn integrate_variational(spec: &ProblemSpec, base: &Profile) -> Result<Profile, IntegrateError> {
    if base.kind != ProfileKind::Solution {
        return Err(IntegrateError::NotASolutionProfile);
    }
    let a = spec.a();
    let df = spec.f().derivative();
    let dense = dopri5(
        |x, y: &[f64; 2]| [y[1] / a.eval(x), -df.eval(base.value(x)) * y[0]],
        0.0,
        [1.0, 0.0],
        1.0,
        &tolerances(spec),
        // Linear in v, so it cannot escape in finite time; large values are genuine.
        |y| !y[0].is_finite(),
    )?;
    Ok(Profile::from_dense(ProfileKind::Variational, a, dense))
}

/// Antiderivative of `f` with `F(0) = 0`.
pub fn antiderivative(f: &Poly) -> Poly {
    let mut c = vec![0.0];
    c.extend(f.coeffs().iter().enumerate().map(|(i, &v)| v / (i + 1) as f64));
    Poly::new(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(a: Vec<f64>, f: Vec<f64>) -> ProblemSpec {
        ProblemSpec::new(a, f).unwrap()
    }

    #[test]
    fn linear_cosine_solution() {
        let p = integrate_ivp(&spec(vec![1.0], vec![0.0, 1.0]), 1.0).unwrap();
        assert!((p.value(1.0) - 0.5403023058681398).abs() < 1e-8);
        assert!((p.deriv(1.0) + 0.8414709848078965).abs() < 1e-8);
        assert_eq!(p.kind, ProfileKind::Solution);
        assert_eq!(p.nodes()[0], 0.0);
        assert_eq!(*p.nodes().last().unwrap(), 1.0);
        assert!(p.nodes().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(p.deriv(0.0), 0.0);
    }

    #[test]
    fn linear_cosh_solution() {
        let p = integrate_ivp(&spec(vec![1.0], vec![0.0, -1.0]), 1.0).unwrap();
        assert!((p.value(1.0) - 1f64.cosh()).abs() < 1e-8);
    }

    #[test]
    fn zero_nonlinearity_is_flat() {
        let p = integrate_ivp(&spec(vec![1.0], vec![0.0]), 3.0).unwrap();
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            assert_eq!(p.value(x), 3.0);
            assert_eq!(p.deriv(x), 0.0);
        }
    }

    #[test]
    fn variational_examples() {
        let s = spec(vec![1.0], vec![0.0, 1.0]);
        let base = integrate_ivp(&s, 1.0).unwrap();
        let v = integrate_variational(&s, &base).unwrap();
        assert_eq!(v.kind, ProfileKind::Variational);
        assert!((v.deriv(1.0) + 0.8414709848078965).abs() < 1e-8);
        assert_eq!(v.value(0.0), 1.0);
        assert_eq!(v.deriv(0.0), 0.0);

        let s = spec(vec![1.0], vec![0.0]);
        let base = integrate_ivp(&s, 0.7).unwrap();
        let v = integrate_variational(&s, &base).unwrap();
        assert_eq!(v.value(0.6), 1.0);
        assert_eq!(v.deriv(1.0), 0.0);

        assert_eq!(
            integrate_variational(&s, &v).unwrap_err(),
            IntegrateError::NotASolutionProfile
        );
    }

    #[test]
    fn variational_matches_finite_difference() {
        let s = spec(vec![1.0], vec![0.0, 1.0, 0.0, -1.0]);
        let tight = crate::problem::ToleranceSet {
            ode_rel: 1e-13,
            ode_abs: 1e-15,
            ..Default::default()
        };
        let s_tight = s.clone().with_tolerances(tight).unwrap();
        let u0 = 0.1;
        let h = 1e-5;
        let m = |u: f64| integrate_ivp(&s_tight, u).unwrap().end_deriv();
        let fd = (m(u0 + h) - m(u0 - h)) / (2.0 * h);
        let v = integrate_variational(&s, &integrate_ivp(&s, u0).unwrap()).unwrap();
        let rel = (v.deriv(1.0) - fd).abs() / fd.abs();
        assert!(rel < 1e-5, "rel = {rel}");
    }

    #[test]
    fn blow_up_and_range_guard() {
        let s = spec(vec![1.0], vec![0.0, 0.0, 0.0, 1.0]).with_scan_bound(10.0).unwrap();
        // u'' = -u^3 is bounded; u'' = +u^3 with large u0 escapes
        assert!(integrate_ivp(&s, 50.0).is_ok());
        let s = spec(vec![1.0], vec![0.0, 0.0, 0.0, -1.0]);
        assert!(matches!(integrate_ivp(&s, 50.0), Err(IntegrateError::BlowUp { .. })));
        assert!(matches!(
            integrate_ivp(&s, 101.0),
            Err(IntegrateError::InitialValueOutOfRange { .. })
        ));
    }

    #[test]
    fn energy_is_conserved_for_constant_a() {
        let s = spec(vec![2.0], vec![0.0, 15.0, 0.0, -15.0]);
        let big_f = antiderivative(s.f());
        for u0 in [-0.9, -0.3, 0.2, 0.7] {
            let p = integrate_ivp(&s, u0).unwrap();
            let energy = |x: f64| 0.5 * 2.0 * p.deriv(x).powi(2) + big_f.eval(p.value(x));
            let e0 = energy(0.0);
            let bound = 100.0 * s.tol().ode_rel * e0.abs() + s.tol().ode_abs;
            for &x in p.nodes() {
                assert!((energy(x) - e0).abs() <= bound, "u0={u0} x={x}");
            }
        }
    }

    #[test]
    fn energy_drift_on_escaping_orbit_tracks_term_size() {
        // beyond the saddle at u = 1 the orbit escapes; kinetic and potential
        // parts grow far beyond their sum, and the drift follows their size
        let s = spec(vec![2.0], vec![0.0, 15.0, 0.0, -15.0]);
        let big_f = antiderivative(s.f());
        let p = integrate_ivp(&s, 1.05).unwrap();
        let energy = |x: f64| 0.5 * 2.0 * p.deriv(x).powi(2) + big_f.eval(p.value(x));
        let e0 = energy(0.0);
        let scale = p
            .nodes()
            .iter()
            .map(|&x| p.deriv(x).powi(2) + big_f.eval(p.value(x)).abs())
            .fold(0.0, f64::max);
        for &x in p.nodes() {
            assert!(
                (energy(x) - e0).abs() <= 1e3 * s.tol().ode_rel * scale + s.tol().ode_abs,
                "x={x}"
            );
        }
    }

    #[test]
    fn momentum_matches_derivative_at_nodes() {
        let s = spec(vec![1.0, 0.5, -0.3], vec![0.0, 10.0, 0.0, -10.0]);
        let p = integrate_ivp(&s, 0.6).unwrap();
        for (&x, st) in p.nodes().iter().zip(p.states()) {
            let a = s.a().eval(x);
            assert!((p.deriv(x) - st[1] / a).abs() <= 1e-14 * (1.0 + st[1].abs()));
        }
    }

    #[test]
    fn reflected_problem_reproduces_reflected_profile() {
        // Running the reflected coefficient from x = 0, starting at the forward
        // end state with the momentum negated, retraces the forward profile.
        let s = spec(vec![1.0, 0.8], vec![0.0, 12.0, 0.0, -12.0]);
        let p = integrate_ivp(&s, 0.4).unwrap();
        let end = p.end_state();
        let b = s.a().reflect_unit();
        let f = s.f().clone();
        let back = dopri5(
            |x, y: &[f64; 2]| [y[1] / b.eval(x), -f.eval(y[0])],
            0.0,
            [end[0], -end[1]],
            1.0,
            &Tolerances { rel: 1e-10, abs: 1e-12 },
            |_| false,
        )
        .unwrap();
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            assert!((back.eval(1.0 - x)[0] - p.value(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn profile_json_round_trip() {
        let p = integrate_ivp(&spec(vec![1.0], vec![0.0, 1.0]), 1.0).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"version\":1"));
        let back: Profile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
