//! Composite 7-point Gauss–Legendre quadrature.

const NODES: [f64; 7] = [
    -0.9491079123427585,
    -0.7415311855993945,
    -0.4058451513773972,
    0.0,
    0.4058451513773972,
    0.7415311855993945,
    0.9491079123427585,
];
const WEIGHTS: [f64; 7] = [
    0.1294849661688697,
    0.2797053914892766,
    0.3818300505051189,
    0.4179591836734694,
    0.3818300505051189,
    0.2797053914892766,
    0.1294849661688697,
];

/// Integral of `g` over `[lo, hi]` with one 7-point rule.
pub fn gauss7(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    half * NODES
        .iter()
        .zip(WEIGHTS)
        .map(|(t, w)| w * g(mid + half * t))
        .sum::<f64>()
}

/// Sum of 7-point rules over consecutive breakpoints.
pub fn composite_gauss7(g: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    breaks.windows(2).map(|w| gauss7(&g, w[0], w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_degree_13() {
        let g = |x: f64| x.powi(13) + 3.0 * x.powi(12) - x;
        let exact = 1.0 / 14.0 + 3.0 / 13.0 - 0.5;
        assert!((gauss7(g, 0.0, 1.0) - exact).abs() < 1e-14);
    }

    #[test]
    fn composite_trig() {
        let breaks: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let v = composite_gauss7(|x| (std::f64::consts::PI * x).sin(), &breaks);
        assert!((v - 2.0 / std::f64::consts::PI).abs() < 1e-14);
    }
}
