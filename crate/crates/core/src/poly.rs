//! Dense univariate polynomials with `f64` coefficients in ascending order.
//!
//! Both the diffusion coefficient and the nonlinearity are polynomials, so
//! everything downstream (exact derivatives, critical points of `a`, constant
//! equilibria) reduces to the few routines here.

use serde::{Deserialize, Serialize};

/// A real root together with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub x: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    /// Builds a polynomial from ascending coefficients; trailing exact zeros
    /// are dropped so that `degree` is meaningful.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Value, first and second derivative in one Horner pass.
    pub fn eval_with_derivs(&self, x: f64) -> (f64, f64, f64) {
        let mut p = 0.0;
        let mut dp = 0.0;
        let mut ddp = 0.0;
        for &c in self.coeffs.iter().rev() {
            ddp = ddp * x + 2.0 * dp;
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp, ddp)
    }

    /// Sum of `|c_i| |x|^i`, the natural roundoff scale of `eval(x)`.
    pub fn magnitude(&self, x: f64) -> f64 {
        let ax = x.abs();
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * ax + c.abs())
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    /// `x ↦ p(1 - x)`, used for reflection arguments about `x = 1/2`.
    pub fn reflect_unit(&self) -> Poly {
        // Horner in the polynomial ring: p(1 - x) = c0 + (1 - x)(c1 + (1 - x)(...))
        let one_minus_x = Poly::new(vec![1.0, -1.0]);
        let mut acc = Poly::zero();
        for &c in self.coeffs.iter().rev() {
            acc = acc.mul(&one_minus_x).add(&Poly::new(vec![c]));
        }
        acc
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// All real roots in the closed interval `[lo, hi]`, ascending, with
    /// multiplicities.
    ///
    /// The interval is split at the real roots of the derivative (found
    /// recursively); on each piece the polynomial is monotone, so a strict sign
    /// change brackets exactly one simple root. A derivative root where the
    /// polynomial itself vanishes (to roundoff) is a multiple root.
    ///
    /// The zero polynomial has no isolated roots and returns an empty list.
    pub fn real_roots(&self, lo: f64, hi: f64) -> Vec<Root> {
        assert!(lo <= hi, "empty root interval");
        match self.degree() {
            None | Some(0) => Vec::new(),
            Some(1) => {
                let x = -self.coeffs[0] / self.coeffs[1];
                if (lo..=hi).contains(&x) {
                    vec![Root { x, multiplicity: 1 }]
                } else {
                    Vec::new()
                }
            }
            Some(_) => self.roots_by_monotone_pieces(lo, hi),
        }
    }

    fn is_root_at(&self, x: f64) -> bool {
        self.eval(x).abs() <= 64.0 * f64::EPSILON * self.magnitude(x)
    }

    fn roots_by_monotone_pieces(&self, lo: f64, hi: f64) -> Vec<Root> {
        let crit = self.derivative().real_roots(lo, hi);
        let mut roots = Vec::new();

        // Piece endpoints, flagged when they are already known roots.
        let mut points: Vec<(f64, bool)> = Vec::with_capacity(crit.len() + 2);
        points.push((lo, false));
        for c in &crit {
            let multiple = self.is_root_at(c.x);
            if multiple {
                roots.push(Root {
                    x: c.x,
                    multiplicity: c.multiplicity + 1,
                });
            }
            if c.x > lo && c.x < hi {
                points.push((c.x, multiple));
            } else if multiple {
                // root sits on the boundary; mark the boundary point
                if c.x <= lo {
                    points[0].1 = true;
                }
            }
        }
        let hi_is_root = crit.iter().any(|c| c.x >= hi && self.is_root_at(c.x));
        points.push((hi, hi_is_root));

        for (i, w) in points.windows(2).enumerate() {
            let (a, a_root) = w[0];
            let (b, b_root) = w[1];
            if a_root || b_root || a >= b {
                continue;
            }
            let fa = self.eval(a);
            let fb = self.eval(b);
            if fa == 0.0 {
                // Simple root exactly at a piece endpoint. Interior endpoints
                // are derivative roots and were handled above.
                if i == 0 {
                    roots.push(Root { x: a, multiplicity: 1 });
                }
                continue;
            }
            if fb == 0.0 {
                if i + 2 == points.len() {
                    roots.push(Root { x: b, multiplicity: 1 });
                }
                continue;
            }
            if fa.signum() != fb.signum() {
                roots.push(Root {
                    x: bisect_sign_change(|x| self.eval(x), a, b, fa),
                    multiplicity: 1,
                });
            }
        }
        roots.sort_by(|p, q| p.x.total_cmp(&q.x));
        roots.dedup_by(|p, q| p.x == q.x);
        roots
    }

    /// Number of distinct real roots in `(lo, hi]` by Sturm's theorem.
    ///
    /// Floating-point Sturm chains are only trustworthy for low degree and
    /// well-separated roots; this is used as an independent count to
    /// cross-check `real_roots`.
    pub fn sturm_root_count(&self, lo: f64, hi: f64) -> usize {
        let chain = self.sturm_chain();
        let variations = |x: f64| {
            let mut count = 0;
            let mut last = 0.0f64;
            for p in &chain {
                let v = p.eval(x);
                if v != 0.0 {
                    if last != 0.0 && v.signum() != last.signum() {
                        count += 1;
                    }
                    last = v;
                }
            }
            count
        };
        let (vl, vh): (usize, usize) = (variations(lo), variations(hi));
        vl.saturating_sub(vh)
    }

    fn sturm_chain(&self) -> Vec<Poly> {
        let mut chain = vec![self.clone(), self.derivative()];
        let norm = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        loop {
            let n = chain.len();
            if chain[n - 1].is_zero() {
                chain.pop();
                break;
            }
            let (_, rem) = chain[n - 2].div_rem(&chain[n - 1]);
            let rem = rem.chop(1e-12 * norm.max(1.0));
            if rem.is_zero() {
                break;
            }
            chain.push(rem.scale(-1.0));
        }
        chain
    }

    fn chop(&self, eps: f64) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .map(|&c| if c.abs() <= eps { 0.0 } else { c })
                .collect(),
        )
    }

    /// Polynomial long division. Panics on a zero divisor.
    pub fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        let dd = divisor.degree().expect("division by zero polynomial");
        let lead = divisor.coeffs[dd];
        let mut rem = self.coeffs.clone();
        let Some(nd) = self.degree() else {
            return (Poly::zero(), Poly::zero());
        };
        if nd < dd {
            return (Poly::zero(), self.clone());
        }
        let mut quot = vec![0.0; nd - dd + 1];
        for k in (0..=nd - dd).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, &c) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * c;
            }
            rem[k + dd] = 0.0;
        }
        rem.truncate(dd);
        (Poly::new(quot), Poly::new(rem))
    }
}

/// Bisection on a bracket with a strict sign change, run until the midpoint
/// no longer moves. `fa` is the function value at `a`.
pub(crate) fn bisect_sign_change(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64) -> f64 {
    let sa = fa.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trims_trailing_zeros() {
        let p = Poly::new(vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(p.degree(), Some(1));
        assert!(Poly::new(vec![0.0, 0.0]).is_zero());
    }

    #[test]
    fn eval_with_derivs_cubic() {
        // u - u^3 at u = 1
        let p = Poly::new(vec![0.0, 1.0, 0.0, -1.0]);
        assert_eq!(p.eval_with_derivs(1.0), (0.0, -2.0, -6.0));
    }

    #[test]
    fn roots_of_chafee_infante_cubic() {
        let p = Poly::new(vec![0.0, 1.0, 0.0, -1.0]);
        let r = p.real_roots(-2.0, 2.0);
        let xs: Vec<f64> = r.iter().map(|r| r.x).collect();
        assert_eq!(r.len(), 3);
        assert!((xs[0] + 1.0).abs() < 1e-14);
        assert!(xs[1].abs() < 1e-14);
        assert!((xs[2] - 1.0).abs() < 1e-14);
        assert!(r.iter().all(|r| r.multiplicity == 1));
    }

    #[test]
    fn double_root_multiplicity() {
        let p = Poly::new(vec![0.0, 0.0, 1.0]);
        assert_eq!(
            p.real_roots(-5.0, 5.0),
            vec![Root {
                x: 0.0,
                multiplicity: 2
            }]
        );
        // (x - 1)^3 (x + 2)
        let q = Poly::new(vec![-0.5, 0.5]).scale(2.0);
        let cube = q.mul(&q).mul(&q).mul(&Poly::new(vec![2.0, 1.0]));
        let r = cube.real_roots(-3.0, 3.0);
        assert_eq!(r.len(), 2);
        assert!((r[0].x + 2.0).abs() < 1e-12);
        assert_eq!(r[1].multiplicity, 3);
        assert!((r[1].x - 1.0).abs() < 1e-6);
    }

    #[test]
    fn roots_respect_interval() {
        let p = Poly::new(vec![0.0, 1.0, 0.0, -1.0]);
        assert_eq!(p.real_roots(0.5, 2.0).len(), 1);
        assert_eq!(p.real_roots(-0.5, 0.5).len(), 1);
        // endpoint root is included
        assert_eq!(p.real_roots(1.0, 2.0).len(), 1);
    }

    #[test]
    fn reflection_about_half() {
        // a = 1 + x  ->  2 - x
        let p = Poly::new(vec![1.0, 1.0]);
        assert_eq!(p.reflect_unit(), Poly::new(vec![2.0, -1.0]));
    }

    #[test]
    fn division() {
        let p = Poly::new(vec![-1.0, 0.0, 1.0]);
        let (q, r) = p.div_rem(&Poly::new(vec![-1.0, 1.0]));
        assert_eq!(q, Poly::new(vec![1.0, 1.0]));
        assert!(r.is_zero());
    }

    proptest! {
        // Products of distinct linear factors: the monotone-piece isolation and
        // the Sturm count must agree, and every reported root must be one of
        // the factors.
        #[test]
        fn isolation_matches_sturm(mut xs in prop::collection::vec(-3.0f64..3.0, 1..6)) {
            xs.sort_by(f64::total_cmp);
            xs.dedup_by(|a, b| (*a - *b).abs() < 0.05);
            let p = xs.iter().fold(Poly::new(vec![1.0]), |acc, &r| acc.mul(&Poly::new(vec![-r, 1.0])));
            let roots = p.real_roots(-4.0, 4.0);
            prop_assert_eq!(roots.len(), xs.len());
            prop_assert_eq!(p.sturm_root_count(-4.0, 4.0), xs.len());
            for (r, x) in roots.iter().zip(&xs) {
                prop_assert!((r.x - x).abs() < 1e-8, "{} vs {}", r.x, x);
            }
        }
    }
}
