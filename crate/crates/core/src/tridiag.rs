//! Eigenvalues of symmetric tridiagonal matrices by Sturm-count bisection.

/// Symmetric tridiagonal matrix with diagonal `d` and off-diagonal `e`
/// (`e.len() == d.len() - 1`).
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiag {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Self {
        assert_eq!(e.len() + 1, d.len());
        SymTridiag { d, e }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.d[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.d.len() {
            let denom = if q == 0.0 {
                f64::EPSILON * self.e[i - 1].abs().max(1e-300)
            } else {
                q
            };
            q = self.d[i] - x - self.e[i - 1] * self.e[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.d.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.e[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - left - right);
            hi = hi.max(self.d[i] + left + right);
        }
        (lo, hi)
    }

    /// The `j`-th smallest eigenvalue (0-based).
    pub fn eigenvalue(&self, j: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// The `k` largest eigenvalues in descending order.
    pub fn top_eigenvalues(&self, k: usize) -> Vec<f64> {
        let n = self.dim();
        (0..k.min(n)).map(|i| self.eigenvalue(n - 1 - i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_laplacian() {
        // tridiag(-1, 2, -1) of size n: 2 - 2 cos(k pi / (n + 1))
        let n = 50;
        let m = SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1]);
        for k in 1..=n {
            let exact = 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((m.eigenvalue(k - 1) - exact).abs() < 1e-12);
        }
        let top = m.top_eigenvalues(3);
        assert!(top[0] > top[1] && top[1] > top[2]);
    }

    #[test]
    fn diagonal_counts() {
        let m = SymTridiag::new(vec![3.0, -1.0, 2.0], vec![0.0, 0.0]);
        assert_eq!(m.count_below(0.0), 1);
        assert_eq!(m.count_below(2.5), 2);
        let top = m.top_eigenvalues(3);
        for (got, want) in top.iter().zip([3.0, 2.0, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
