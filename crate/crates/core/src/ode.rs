//! Dormand–Prince 5(4) with its fourth-order continuous extension.
//!
//! Fixed-size states (`[f64; D]`) only; the systems here have one or two
//! components.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("solution escaped the growth cap near x = {x}")]
    BlowUp { x: f64 },
    #[error("step size underflow (h = {h:e}) at x = {x}")]
    StepUnderflow { x: f64, h: f64 },
}

pub const MIN_STEP: f64 = 1e-14;
const MAX_STEPS: usize = 1_000_000;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// dense output weights
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Accepted steps with their interpolation coefficients.
///
/// On step `i` with `θ = (x - nodes[i]) / h`,
/// `y(θ) = r0 + θ (r1 + (1-θ) (r2 + θ (r3 + (1-θ) r4)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DenseRepr", try_from = "DenseRepr")]
pub struct DenseSolution<const D: usize> {
    pub nodes: Vec<f64>,
    pub states: Vec<[f64; D]>,
    pub coeffs: Vec<[[f64; D]; 5]>,
}

/// Serialized layout: nested vectors, since serde has no const-generic arrays.
#[derive(Serialize, Deserialize)]
struct DenseRepr {
    nodes: Vec<f64>,
    states: Vec<Vec<f64>>,
    coeffs: Vec<Vec<Vec<f64>>>,
}

impl<const D: usize> From<DenseSolution<D>> for DenseRepr {
    fn from(s: DenseSolution<D>) -> Self {
        DenseRepr {
            nodes: s.nodes,
            states: s.states.iter().map(|y| y.to_vec()).collect(),
            coeffs: s
                .coeffs
                .iter()
                .map(|c| c.iter().map(|r| r.to_vec()).collect())
                .collect(),
        }
    }
}

impl<const D: usize> TryFrom<DenseRepr> for DenseSolution<D> {
    type Error = String;

    fn try_from(r: DenseRepr) -> Result<Self, String> {
        let arr = |v: &Vec<f64>| -> Result<[f64; D], String> {
            v.as_slice()
                .try_into()
                .map_err(|_| format!("expected {D} components, found {}", v.len()))
        };
        let states = r.states.iter().map(arr).collect::<Result<Vec<_>, _>>()?;
        let coeffs = r
            .coeffs
            .iter()
            .map(|c| {
                if c.len() != 5 {
                    return Err(format!("expected 5 interpolation rows, found {}", c.len()));
                }
                Ok([arr(&c[0])?, arr(&c[1])?, arr(&c[2])?, arr(&c[3])?, arr(&c[4])?])
            })
            .collect::<Result<Vec<_>, _>>()?;
        if r.nodes.len() < 2 || states.len() != r.nodes.len() || coeffs.len() + 1 != r.nodes.len() {
            return Err("inconsistent dense solution lengths".into());
        }
        Ok(DenseSolution {
            nodes: r.nodes,
            states,
            coeffs,
        })
    }
}

impl<const D: usize> DenseSolution<D> {
    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let last = self.coeffs.len() - 1;
        let i = self.nodes.partition_point(|&n| n <= x).saturating_sub(1).min(last);
        let h = self.nodes[i + 1] - self.nodes[i];
        (i, (x - self.nodes[i]) / h, h)
    }

    pub fn eval(&self, x: f64) -> [f64; D] {
        let (i, t, _) = self.locate(x);
        let r = &self.coeffs[i];
        let t1 = 1.0 - t;
        std::array::from_fn(|k| r[0][k] + t * (r[1][k] + t1 * (r[2][k] + t * (r[3][k] + t1 * r[4][k]))))
    }

    /// Derivative of the interpolant.
    pub fn eval_deriv(&self, x: f64) -> [f64; D] {
        let (i, t, h) = self.locate(x);
        let r = &self.coeffs[i];
        let t1 = 1.0 - t;
        std::array::from_fn(|k| {
            let a = r[2][k] + t * (r[3][k] + t1 * r[4][k]);
            let da = r[3][k] + (1.0 - 2.0 * t) * r[4][k];
            let b = r[1][k] + t1 * a;
            let db = -a + t1 * da;
            (b + t * db) / h
        })
    }
}

pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    std::array::from_fn(|k| y[k] + h * terms.iter().map(|(c, v)| c * v[k]).sum::<f64>())
}

/// Integrates `y' = rhs(x, y)` from `x0` to `x1 > x0`.
///
/// `escaped` is checked on every accepted state and aborts with
/// [`OdeError::BlowUp`]; non-finite states always abort.
pub fn dopri5<const D: usize>(
    rhs: impl Fn(f64, &[f64; D]) -> [f64; D],
    x0: f64,
    y0: [f64; D],
    x1: f64,
    tol: &Tolerances,
    escaped: impl Fn(&[f64; D]) -> bool,
) -> Result<DenseSolution<D>, OdeError> {
    assert!(x1 > x0);
    let span = x1 - x0;
    let mut x = x0;
    let mut y = y0;
    let mut k1 = rhs(x, &y);
    let mut h = initial_step(&y, &k1, span, tol);
    let mut out = DenseSolution {
        nodes: vec![x0],
        states: vec![y0],
        coeffs: Vec::new(),
    };

    for _ in 0..MAX_STEPS {
        if x >= x1 {
            return Ok(out);
        }
        let last = x + h >= x1 - 1e-12 * span;
        if last {
            h = x1 - x;
        }
        let k2 = rhs(x + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = rhs(x + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(x + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(
            x + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = rhs(
            x + h,
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let x_new = if last { x1 } else { x + h };
        let k7 = rhs(x_new, &y_new);

        let mut err2 = 0.0;
        for k in 0..D {
            let e = h * (E1 * k1[k] + E3 * k3[k] + E4 * k4[k] + E5 * k5[k] + E6 * k6[k] + E7 * k7[k]);
            let sc = tol.abs + tol.rel * y[k].abs().max(y_new[k].abs());
            err2 += (e / sc).powi(2);
        }
        let err = (err2 / D as f64).sqrt();

        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            if escaped(&y) || h < MIN_STEP {
                return Err(OdeError::BlowUp { x });
            }
            h *= 0.2;
            continue;
        }

        if err <= 1.0 {
            let ydiff: [f64; D] = std::array::from_fn(|k| y_new[k] - y[k]);
            let bspl: [f64; D] = std::array::from_fn(|k| h * k1[k] - ydiff[k]);
            let coeffs = [
                y,
                ydiff,
                bspl,
                std::array::from_fn(|k| ydiff[k] - h * k7[k] - bspl[k]),
                std::array::from_fn(|k| {
                    h * (D1 * k1[k] + D3 * k3[k] + D4 * k4[k] + D5 * k5[k] + D6 * k6[k] + D7 * k7[k])
                }),
            ];
            out.coeffs.push(coeffs);
            out.nodes.push(x_new);
            out.states.push(y_new);
            x = x_new;
            y = y_new;
            k1 = k7;
            if escaped(&y) {
                return Err(OdeError::BlowUp { x });
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= fac;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
        if h < MIN_STEP && x < x1 {
            return Err(OdeError::StepUnderflow { x, h });
        }
    }
    Err(OdeError::StepUnderflow { x, h })
}

fn initial_step<const D: usize>(y: &[f64; D], f: &[f64; D], span: f64, tol: &Tolerances) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for k in 0..D {
        let sc = tol.abs + tol.rel * y[k].abs();
        d0 += (y[k] / sc).powi(2);
        d1 += (f[k] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / D as f64).sqrt(), (d1 / D as f64).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.clamp(1e-6, 0.1 * span)
}
