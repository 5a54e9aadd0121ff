//! Problem data: the diffusion coefficient `a(x)` on `[0, 1]`, the
//! nonlinearity `f(u)`, and the numerical tolerances used everywhere else.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::Poly;

/// Number of samples used to certify `a > 0` on `[0, 1]`.
pub const POSITIVITY_SAMPLES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("malformed line `{0}` (expected key=value)")]
    MalformedLine(String),
    #[error("malformed number `{0}`")]
    MalformedNumber(String),
    #[error("empty coefficient list for `{0}`")]
    EmptyCoefficients(&'static str),
    #[error("diffusion coefficient is not positive on [0,1]: a({x}) = {value}")]
    NonPositiveDiffusion { x: f64, value: f64 },
    #[error("f(0) = {0} but the constant coefficient of f must be exactly 0")]
    NonzeroConstantTerm(f64),
    #[error("scan_bound must be positive and finite, got {0}")]
    InvalidScanBound(f64),
    #[error("grid_n must be at least 16, got {0}")]
    GridTooSmall(usize),
    #[error("tolerance `{name}` must be positive and finite, got {value}")]
    InvalidTolerance { name: &'static str, value: f64 },
    #[error("x = {0} lies outside [0,1]")]
    DomainError(f64),
    #[error("a' vanishes at x = {x} without changing sign")]
    DegenerateSignChange { x: f64 },
}

/// Tolerances shared by all numerical stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSet {
    /// Relative integrator tolerance.
    pub ode_rel: f64,
    /// Absolute integrator tolerance.
    pub ode_abs: f64,
    /// Root-finding tolerance in `u0` (and for polynomial roots).
    pub root_tol: f64,
    /// Eigenvalues with `|λ|` at or below this count as zero.
    ///
    /// Should stay at least ten times the eigensolver discretization error;
    /// `eigenvalues_sl` refuses grids that cannot meet that.
    pub hyp_tol: f64,
    /// Relative `|u'|` threshold for critical points.
    pub crit_tol: f64,
    /// Tolerance for the integral and level-set identities.
    pub sum_tol: f64,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        ToleranceSet {
            ode_rel: 1e-10,
            ode_abs: 1e-12,
            root_tol: 1e-10,
            hyp_tol: 1e-6,
            crit_tol: 1e-8,
            sum_tol: 1e-6,
        }
    }
}

impl ToleranceSet {
    fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("ode_rel", self.ode_rel),
            ("ode_abs", self.ode_abs),
            ("root_tol", self.root_tol),
            ("hyp_tol", self.hyp_tol),
            ("crit_tol", self.crit_tol),
            ("sum_tol", self.sum_tol),
        ]
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        for (name, value) in self.named() {
            if !(value.is_finite() && value > 0.0) {
                return Err(ProblemError::InvalidTolerance { name, value });
            }
        }
        Ok(())
    }
}

/// Validated problem data. Construct with [`ProblemSpec::new`] or
/// [`parse_spec`]; every constructor enforces the invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    a: Poly,
    f: Poly,
    scan_bound: f64,
    grid_n: usize,
    tol: ToleranceSet,
}

impl ProblemSpec {
    pub const DEFAULT_SCAN_BOUND: f64 = 10.0;
    pub const DEFAULT_GRID_N: usize = 2000;

    pub fn new(a_coeffs: Vec<f64>, f_coeffs: Vec<f64>) -> Result<Self, ProblemError> {
        Self::with_options(
            a_coeffs,
            f_coeffs,
            Self::DEFAULT_SCAN_BOUND,
            Self::DEFAULT_GRID_N,
            ToleranceSet::default(),
        )
    }

    pub fn with_options(
        a_coeffs: Vec<f64>,
        f_coeffs: Vec<f64>,
        scan_bound: f64,
        grid_n: usize,
        tol: ToleranceSet,
    ) -> Result<Self, ProblemError> {
        if a_coeffs.is_empty() {
            return Err(ProblemError::EmptyCoefficients("a_coeffs"));
        }
        if f_coeffs.is_empty() {
            return Err(ProblemError::EmptyCoefficients("f_coeffs"));
        }
        for &c in a_coeffs.iter().chain(&f_coeffs) {
            if !c.is_finite() {
                return Err(ProblemError::MalformedNumber(c.to_string()));
            }
        }
        if f_coeffs[0] != 0.0 {
            return Err(ProblemError::NonzeroConstantTerm(f_coeffs[0]));
        }
        if !(scan_bound.is_finite() && scan_bound > 0.0) {
            return Err(ProblemError::InvalidScanBound(scan_bound));
        }
        if grid_n < 16 {
            return Err(ProblemError::GridTooSmall(grid_n));
        }
        tol.validate()?;
        let a = Poly::new(a_coeffs);
        check_positive(&a)?;
        Ok(ProblemSpec {
            a,
            f: Poly::new(f_coeffs),
            scan_bound,
            grid_n,
            tol,
        })
    }

    pub fn a(&self) -> &Poly {
        &self.a
    }

    pub fn f(&self) -> &Poly {
        &self.f
    }

    pub fn scan_bound(&self) -> f64 {
        self.scan_bound
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn tol(&self) -> &ToleranceSet {
        &self.tol
    }

    /// Same `a` and options with a different nonlinearity.
    pub fn with_f(&self, f: &Poly) -> Result<Self, ProblemError> {
        let coeffs = if f.is_zero() { vec![0.0] } else { f.coeffs().to_vec() };
        Self::with_options(self.a.coeffs().to_vec(), coeffs, self.scan_bound, self.grid_n, self.tol)
    }

    pub fn with_scan_bound(mut self, scan_bound: f64) -> Result<Self, ProblemError> {
        if !(scan_bound.is_finite() && scan_bound > 0.0) {
            return Err(ProblemError::InvalidScanBound(scan_bound));
        }
        self.scan_bound = scan_bound;
        Ok(self)
    }

    pub fn with_grid_n(mut self, grid_n: usize) -> Result<Self, ProblemError> {
        if grid_n < 16 {
            return Err(ProblemError::GridTooSmall(grid_n));
        }
        self.grid_n = grid_n;
        Ok(self)
    }

    pub fn with_tolerances(mut self, tol: ToleranceSet) -> Result<Self, ProblemError> {
        tol.validate()?;
        self.tol = tol;
        Ok(self)
    }

    /// `(a, a', a'')` at `x ∈ [0, 1]`.
    pub fn evaluate_a(&self, x: f64) -> Result<(f64, f64, f64), ProblemError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(ProblemError::DomainError(x));
        }
        Ok(self.a.eval_with_derivs(x))
    }

    /// `(f, f', f'')` at `u`.
    pub fn evaluate_f(&self, u: f64) -> (f64, f64, f64) {
        self.f.eval_with_derivs(u)
    }

    pub fn is_constant_diffusion(&self) -> bool {
        self.a.derivative().is_zero()
    }

    /// Splits `[0, 1]` into maximal intervals on which `a'` keeps a strict
    /// sign. Interior zeros of `a'` of even multiplicity do not separate
    /// monotonicity intervals and are reported as errors.
    pub fn monotonicity_intervals(&self) -> Result<MonotonicityPartition, ProblemError> {
        let da = self.a.derivative();
        if da.is_zero() {
            return Ok(MonotonicityPartition {
                breakpoints: Vec::new(),
                signs: Vec::new(),
                constant_flag: true,
            });
        }
        let mut breakpoints = vec![0.0];
        for r in da.real_roots(0.0, 1.0) {
            if r.x <= 0.0 || r.x >= 1.0 {
                continue;
            }
            if r.multiplicity % 2 == 0 {
                return Err(ProblemError::DegenerateSignChange { x: r.x });
            }
            breakpoints.push(r.x);
        }
        breakpoints.push(1.0);
        let signs = breakpoints
            .windows(2)
            .map(|w| {
                let s = da.eval(0.5 * (w[0] + w[1]));
                if s > 0.0 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        Ok(MonotonicityPartition {
            breakpoints,
            signs,
            constant_flag: false,
        })
    }

    /// True iff `a` is even about `x = 1/2` to relative tolerance `tol`.
    pub fn symmetry_check_a(&self, tol: f64) -> bool {
        const SAMPLES: usize = 1001;
        let mut max_dev = 0.0f64;
        let mut max_a = 0.0f64;
        for i in 0..SAMPLES {
            let x = i as f64 / (SAMPLES - 1) as f64;
            let ax = self.a.eval(x);
            max_dev = max_dev.max((ax - self.a.eval(1.0 - x)).abs());
            max_a = max_a.max(ax.abs());
        }
        max_dev <= tol * max_a
    }

    /// Canonical key=value rendering; parsing it back yields an equal spec.
    pub fn to_spec_text(&self) -> String {
        let list = |p: &Poly| {
            let c: Vec<String> = if p.is_zero() {
                vec!["0".into()]
            } else {
                p.coeffs().iter().map(|c| format!("{c:?}")).collect()
            };
            format!("[{}]", c.join(", "))
        };
        let mut s = String::new();
        s.push_str(&format!("a_coeffs={}\n", list(&self.a)));
        s.push_str(&format!("f_coeffs={}\n", list(&self.f)));
        s.push_str(&format!("scan_bound={:?}\n", self.scan_bound));
        s.push_str(&format!("grid_n={}\n", self.grid_n));
        for (name, value) in self.tol.named() {
            s.push_str(&format!("{name}={value:?}\n"));
        }
        s
    }
}

fn check_positive(a: &Poly) -> Result<(), ProblemError> {
    let mut min_x = 0.0;
    let mut min_v = f64::INFINITY;
    let mut visit = |x: f64| {
        let v = a.eval(x);
        if v < min_v || v.is_nan() {
            min_v = v;
            min_x = x;
        }
    };
    for i in 0..=POSITIVITY_SAMPLES {
        visit(i as f64 / POSITIVITY_SAMPLES as f64);
    }
    for r in a.derivative().real_roots(0.0, 1.0) {
        visit(r.x);
    }
    if min_v > 0.0 {
        Ok(())
    } else {
        Err(ProblemError::NonPositiveDiffusion { x: min_x, value: min_v })
    }
}

/// Intervals of strict monotonicity of `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityPartition {
    /// `0 = x_0 < x_1 < ... < x_n = 1`; empty when `a` is constant.
    pub breakpoints: Vec<f64>,
    /// Sign of `a'` on each interval.
    pub signs: Vec<i8>,
    pub constant_flag: bool,
}

impl MonotonicityPartition {
    pub fn interval_count(&self) -> usize {
        self.signs.len()
    }
}

const KEYS: [&str; 10] = [
    "a_coeffs",
    "f_coeffs",
    "scan_bound",
    "grid_n",
    "ode_rel",
    "ode_abs",
    "root_tol",
    "hyp_tol",
    "crit_tol",
    "sum_tol",
];

/// Parses a key=value spec document. Entries are separated by newlines or
/// `;`, `#` starts a comment.
pub fn parse_spec(text: &str) -> Result<ProblemSpec, ProblemError> {
    let mut entries: BTreeMap<&str, String> = BTreeMap::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for item in line.split(';') {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| ProblemError::MalformedLine(item.to_string()))?;
            let key = key.trim();
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(ProblemError::UnknownKey(key.to_string()));
            };
            if entries.insert(known, value.trim().to_string()).is_some() {
                return Err(ProblemError::DuplicateKey(key.to_string()));
            }
        }
    }

    let a = parse_list(entries.get("a_coeffs").ok_or(ProblemError::MissingKey("a_coeffs"))?)?;
    let f = parse_list(entries.get("f_coeffs").ok_or(ProblemError::MissingKey("f_coeffs"))?)?;
    let scan_bound = match entries.get("scan_bound") {
        Some(s) => parse_number(s)?,
        None => ProblemSpec::DEFAULT_SCAN_BOUND,
    };
    let grid_n = match entries.get("grid_n") {
        Some(s) => s
            .parse::<usize>()
            .map_err(|_| ProblemError::MalformedNumber(s.clone()))?,
        None => ProblemSpec::DEFAULT_GRID_N,
    };
    let mut tol = ToleranceSet::default();
    for (name, slot) in [
        ("ode_rel", &mut tol.ode_rel),
        ("ode_abs", &mut tol.ode_abs),
        ("root_tol", &mut tol.root_tol),
        ("hyp_tol", &mut tol.hyp_tol),
        ("crit_tol", &mut tol.crit_tol),
        ("sum_tol", &mut tol.sum_tol),
    ] {
        if let Some(s) = entries.get(name) {
            *slot = parse_number(s)?;
        }
    }
    ProblemSpec::with_options(a, f, scan_bound, grid_n, tol)
}

fn parse_number(s: &str) -> Result<f64, ProblemError> {
    // accept the unicode minus sign as well
    let cleaned = s.trim().replace('\u{2212}', "-");
    match cleaned.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ProblemError::MalformedNumber(s.trim().to_string())),
    }
}

pub(crate) fn parse_list(s: &str) -> Result<Vec<f64>, ProblemError> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| ProblemError::MalformedNumber(s.to_string()))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(parse_number).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_identity_example() {
        let spec = parse_spec("a_coeffs=[1]; f_coeffs=[0,1]").unwrap();
        assert_eq!(spec.a().coeffs(), &[1.0]);
        assert_eq!(spec.f().coeffs(), &[0.0, 1.0]);
        assert_eq!(spec.scan_bound(), 10.0);
        assert_eq!(spec.grid_n(), 2000);
        assert_eq!(*spec.tol(), ToleranceSet::default());
    }

    #[test]
    fn rejects_vanishing_diffusion() {
        let err = parse_spec("a_coeffs=[0,1]; f_coeffs=[0,1]").unwrap_err();
        assert!(matches!(err, ProblemError::NonPositiveDiffusion { x, .. } if x == 0.0));
    }

    #[test]
    fn rejects_nonzero_constant_term() {
        assert_eq!(
            parse_spec("a_coeffs=[1]; f_coeffs=[1,1]").unwrap_err(),
            ProblemError::NonzeroConstantTerm(1.0)
        );
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            parse_spec("f_coeffs=[0,1]").unwrap_err(),
            ProblemError::MissingKey("a_coeffs")
        );
        assert!(matches!(
            parse_spec("a_coeffs=[1]; f_coeffs=[0,x]").unwrap_err(),
            ProblemError::MalformedNumber(_)
        ));
        assert!(matches!(
            parse_spec("a_coeffs=[1]; f_coeffs=[0,1]; colour=red").unwrap_err(),
            ProblemError::UnknownKey(_)
        ));
        assert!(matches!(
            parse_spec("a_coeffs=[1]; a_coeffs=[2]; f_coeffs=[0]").unwrap_err(),
            ProblemError::DuplicateKey(_)
        ));
        assert!(matches!(
            parse_spec("a_coeffs=[1]; f_coeffs=[0]; grid_n=8").unwrap_err(),
            ProblemError::GridTooSmall(8)
        ));
        assert!(matches!(
            parse_spec("a_coeffs=[1]; f_coeffs=[0]; hyp_tol=0").unwrap_err(),
            ProblemError::InvalidTolerance { name: "hyp_tol", .. }
        ));
        assert!(matches!(
            parse_spec("a_coeffs=[1]; f_coeffs=[0]; scan_bound=-1").unwrap_err(),
            ProblemError::InvalidScanBound(_)
        ));
    }

    #[test]
    fn multiline_with_comments_and_overrides() {
        let text = "# chafee-infante\na_coeffs = [1.25, \u{2212}1, 1]\nf_coeffs=[0, 15, 0, -15] # lambda = 15\nscan_bound=2\nhyp_tol=1e-7\n";
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec.a().coeffs(), &[1.25, -1.0, 1.0]);
        assert_eq!(spec.scan_bound(), 2.0);
        assert_eq!(spec.tol().hyp_tol, 1e-7);
    }

    #[test]
    fn evaluate_a_examples() {
        let s = ProblemSpec::new(vec![1.0, 1.0], vec![0.0]).unwrap();
        assert_eq!(s.evaluate_a(0.5).unwrap(), (1.5, 1.0, 0.0));
        let s = ProblemSpec::new(vec![1.0], vec![0.0]).unwrap();
        assert_eq!(s.evaluate_a(0.3).unwrap(), (1.0, 0.0, 0.0));
        let s = ProblemSpec::new(vec![1.25, -1.0, 1.0], vec![0.0]).unwrap();
        assert_eq!(s.evaluate_a(0.5).unwrap(), (1.0, 0.0, 2.0));
        assert_eq!(s.evaluate_a(1.5).unwrap_err(), ProblemError::DomainError(1.5));
    }

    #[test]
    fn evaluate_f_examples() {
        let s = ProblemSpec::new(vec![1.0], vec![0.0, 1.0, 0.0, -1.0]).unwrap();
        assert_eq!(s.evaluate_f(1.0), (0.0, -2.0, -6.0));
        let s = ProblemSpec::new(vec![1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(s.evaluate_f(2.0), (2.0, 1.0, 0.0));
        let s = ProblemSpec::new(vec![1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(s.evaluate_f(5.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn monotonicity_examples() {
        let inc = ProblemSpec::new(vec![1.0, 1.0], vec![0.0]).unwrap();
        let p = inc.monotonicity_intervals().unwrap();
        assert_eq!(p.signs, vec![1]);
        assert_eq!(p.breakpoints, vec![0.0, 1.0]);

        let parab = ProblemSpec::new(vec![1.25, -1.0, 1.0], vec![0.0]).unwrap();
        let p = parab.monotonicity_intervals().unwrap();
        assert_eq!(p.signs, vec![-1, 1]);
        assert!((p.breakpoints[1] - 0.5).abs() < 1e-15);

        let c = ProblemSpec::new(vec![1.0], vec![0.0]).unwrap();
        let p = c.monotonicity_intervals().unwrap();
        assert!(p.constant_flag);
        assert_eq!(p.interval_count(), 0);
    }

    #[test]
    fn monotonicity_degenerate_sign_change() {
        // a = 1 + (x - 1/2)^3 : a' = 3 (x - 1/2)^2 has a double root at 1/2
        let a = Poly::new(vec![-0.5, 1.0]);
        let cube = a.mul(&a).mul(&a).add(&Poly::new(vec![1.0]));
        let spec = ProblemSpec::new(cube.coeffs().to_vec(), vec![0.0]).unwrap();
        assert!(matches!(
            spec.monotonicity_intervals(),
            Err(ProblemError::DegenerateSignChange { .. })
        ));
    }

    #[test]
    fn symmetry_examples() {
        let even = ProblemSpec::new(vec![1.25, -1.0, 1.0], vec![0.0]).unwrap();
        assert!(even.symmetry_check_a(1e-12));
        let inc = ProblemSpec::new(vec![1.0, 1.0], vec![0.0]).unwrap();
        assert!(!inc.symmetry_check_a(1e-6));
        let c = ProblemSpec::new(vec![3.0], vec![0.0]).unwrap();
        assert!(c.symmetry_check_a(0.0));
    }

    #[test]
    fn spec_text_round_trip() {
        let spec = parse_spec("a_coeffs=[1.25,-1,1]; f_coeffs=[0,15,0,-15]; scan_bound=2").unwrap();
        assert_eq!(parse_spec(&spec.to_spec_text()).unwrap(), spec);
    }

    fn cubic_a() -> impl Strategy<Value = Vec<f64>> {
        // 2 + small cubic stays positive on [0,1]
        prop::collection::vec(-0.5f64..0.5, 3).prop_map(|mut c| {
            c.insert(0, 2.0);
            c
        })
    }

    proptest! {
        #[test]
        fn accepted_specs_are_positive(a in cubic_a(), f1 in -5.0f64..5.0) {
            let spec = ProblemSpec::new(a, vec![0.0, f1]).unwrap();
            let min = (0..=POSITIVITY_SAMPLES)
                .map(|i| spec.a().eval(i as f64 / POSITIVITY_SAMPLES as f64))
                .fold(f64::INFINITY, f64::min);
            prop_assert!(min > 0.0);
            prop_assert_eq!(spec.evaluate_f(0.0).0, 0.0);
        }

        #[test]
        fn breakpoints_are_sign_changes(a in cubic_a()) {
            let spec = ProblemSpec::new(a, vec![0.0]).unwrap();
            if let Ok(p) = spec.monotonicity_intervals() {
                let da = spec.a().derivative();
                let tol = spec.tol().root_tol;
                for &x in &p.breakpoints[1..p.breakpoints.len().saturating_sub(1)] {
                    prop_assert!(da.eval(x).abs() <= tol);
                    prop_assert!(da.eval(x - tol).signum() != da.eval(x + tol).signum());
                }
                for w in p.breakpoints.windows(2) {
                    prop_assert!(w[0] < w[1]);
                }
            }
        }

        #[test]
        fn symmetry_is_reflection_invariant(a in cubic_a(), tol in 1e-8f64..1e-1) {
            let spec = ProblemSpec::new(a, vec![0.0]).unwrap();
            let reflected = ProblemSpec::new(spec.a().reflect_unit().coeffs().to_vec(), vec![0.0]).unwrap();
            prop_assert_eq!(spec.symmetry_check_a(tol), reflected.symmetry_check_a(tol));
        }
    }
}
