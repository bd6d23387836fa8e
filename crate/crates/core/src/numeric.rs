//! Small numerical helpers shared by the physics modules.

use nalgebra::{DMatrix, DVector};

/// Gauss–Legendre nodes and weights on [-1, 1].
///
/// Nodes are found by Newton iteration on the Legendre recurrence, which
/// converges to machine precision for any practical order.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrate `f` over [a, b] split into `panels` equal sub-intervals.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let width = (b - a) / panels as f64;
        let mut total = 0.0;
        for k in 0..panels {
            let lo = a + width * k as f64;
            let half = 0.5 * width;
            let mid = lo + half;
            let mut acc = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += w * f(mid + half * x);
            }
            total += acc * half;
        }
        total
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Least-squares polynomial fit `y ≈ Σ c_k x^k` for `k = 0..=degree`.
///
/// The abscissae are rescaled to [-1, 1] by `scale` before the fit and the
/// coefficients are converted back, which keeps the Vandermonde matrix well
/// conditioned for micron-scale inputs.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize, scale: f64) -> Vec<f64> {
    let rows = xs.len();
    let cols = degree + 1;
    let a = DMatrix::from_fn(rows, cols, |i, j| (xs[i] / scale).powi(j as i32));
    let b = DVector::from_column_slice(ys);
    let sol = lstsq(a, b);
    (0..cols).map(|j| sol[j] / scale.powi(j as i32)).collect()
}

/// Minimum-norm least-squares solution via SVD.
pub fn lstsq(a: DMatrix<f64>, b: DVector<f64>) -> DVector<f64> {
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-14 * (svd.singular_values.len() as f64);
    svd.solve(&b, tol).expect("SVD factors were requested")
}

/// Binomial coefficient as f64 (small arguments only).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Evaluate `Σ c_k x^k` by Horner's rule.
pub fn polyval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// `n` evenly spaced samples covering [lo, hi] inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(8);
        // degree 2n-1 = 15 is exact
        let val = gl.integrate(-1.0, 2.0, 1, |x| x.powi(15) + 3.0 * x * x);
        let exact = (2f64.powi(16) - 1.0) / 16.0 + (8.0 + 1.0);
        assert!((val - exact).abs() < 1e-10 * exact.abs());
        let w: f64 = gl.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn polyfit_recovers_exact_polynomial() {
        let xs = linspace(-1e-5, 1e-5, 41);
        let c = [3.0, -2e5, 7e9, 1e14];
        let ys: Vec<f64> = xs.iter().map(|&x| polyval(&c, x)).collect();
        let fit = polyfit(&xs, &ys, 3, 1e-5);
        for (a, b) in fit.iter().zip(c) {
            assert!((a - b).abs() < 1e-9 * b.abs());
        }
    }

    #[test]
    fn binomial_row() {
        let row: Vec<f64> = (0..=5).map(|k| binomial(5, k)).collect();
        assert_eq!(row, vec![1.0, 5.0, 10.0, 10.0, 5.0, 1.0]);
        assert_eq!(binomial(3, 4), 0.0);
    }
}
