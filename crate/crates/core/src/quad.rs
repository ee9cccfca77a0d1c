//! Gauss-Legendre rules and one-dimensional hat functions.

/// Nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `max(0, 1 - |t|/width)`.
pub fn hat_1d(t: f64, width: f64) -> f64 {
    (1.0 - t.abs() / width).max(0.0)
}

/// Derivative of [`hat_1d`], taken as zero at the kinks' outer edge.
pub fn hat_1d_derivative(t: f64, width: f64) -> f64 {
    if t.abs() >= width {
        0.0
    } else if t > 0.0 {
        -1.0 / width
    } else if t < 0.0 {
        1.0 / width
    } else {
        0.0
    }
}

/// `∫_a^b f` by an `n`-point rule.
pub fn integrate_1d(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for n in 1..=10 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for p in 0..(2 * n) {
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(p as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn three_point_nodes() {
        let (x, w) = gauss_legendre(3);
        assert!((x[2] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn hat_values() {
        assert_eq!(hat_1d(0.0, 0.5), 1.0);
        assert_eq!(hat_1d(0.25, 0.5), 0.5);
        assert_eq!(hat_1d(0.6, 0.5), 0.0);
        assert_eq!(hat_1d_derivative(0.1, 0.5), -2.0);
        assert_eq!(hat_1d_derivative(-0.1, 0.5), 2.0);
        assert!((integrate_1d(0.0, 1.0, 2, |t| t * t * t) - 0.25).abs() < 1e-15);
    }
}
