//! Gauss–Legendre rules and graded composite rules on intervals.

use std::f64::consts::PI;

/// n-point Gauss–Legendre nodes and weights on [−1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
    (x, w)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_on(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter()
        .zip(&w)
        .map(|(xi, wi)| (c + r * xi, r * wi))
        .collect()
}

/// Barycentric weights for Lagrange interpolation on the given nodes.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            let p: f64 = (0..nodes.len())
                .filter(|&m| m != j)
                .map(|m| nodes[j] - nodes[m])
                .product();
            1.0 / p
        })
        .collect()
}

/// Values of the Lagrange basis polynomials at `t`.
pub fn lagrange_basis(nodes: &[f64], bw: &[f64], t: f64) -> Vec<f64> {
    if let Some(j) = nodes.iter().position(|&x| x == t) {
        let mut v = vec![0.0; nodes.len()];
        v[j] = 1.0;
        return v;
    }
    let terms: Vec<f64> = nodes.iter().zip(bw).map(|(x, w)| w / (t - x)).collect();
    let s: f64 = terms.iter().sum();
    terms.iter().map(|v| v / s).collect()
}

/// 1D composite trapezoid on samples with uniform spacing.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dx * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 1 {
                    0.0
                } else {
                    2.0 / (p as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn known_three_point_rule() {
        let (x, w) = gauss_legendre(3);
        assert!((x[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn mapped_rule_and_interpolation() {
        let r = gauss_on(1.0, 3.0, 8);
        let q: f64 = r.iter().map(|(x, w)| w * x.exp()).sum();
        assert!((q - (3f64.exp() - 1f64.exp())).abs() < 1e-12);
        let nodes: Vec<f64> = r.iter().map(|p| p.0).collect();
        let bw = barycentric_weights(&nodes);
        let l = lagrange_basis(&nodes, &bw, 2.2);
        let v: f64 = l.iter().zip(&nodes).map(|(l, x)| l * x.powi(5)).sum();
        assert!((v - 2.2f64.powi(5)).abs() < 1e-11);
    }
}
