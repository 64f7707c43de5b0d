//! Incident waves, the square-root branch used for vertical wave numbers,
//! and classification of Rayleigh orders.
//!
//! The period of every structure is fixed to 2π, so the horizontal wave
//! number of order `n` is `n + α`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Period of all periodic structures.
pub const PERIOD: f64 = 2.0 * PI;

/// Square root holomorphic off the cut iℝ≤0, with √t = i√|t| for t < 0.
///
/// Values on the cut are the limit from Re z < 0, so Im ≥ 0 there.
pub fn branch_sqrt(z: C64) -> C64 {
    if z.im == 0.0 {
        return if z.re >= 0.0 {
            C64::new(z.re.sqrt(), 0.0)
        } else {
            C64::new(0.0, (-z.re).sqrt())
        };
    }
    let s = z.sqrt();
    if z.im < 0.0 && z.re <= 0.0 {
        -s
    } else {
        s
    }
}

/// β_n = √(k² − (n+α)²) for real k and α.
pub fn beta(n: i64, alpha: f64, k: f64) -> C64 {
    let a = n as f64 + alpha;
    branch_sqrt(C64::new(k * k - a * a, 0.0))
}

/// β_n for complex k and α (absorbing media).
pub fn beta_c(n: i64, alpha: C64, k: C64) -> C64 {
    let a = alpha + n as f64;
    branch_sqrt(k * k - a * a)
}

/// Default cut-off tolerance relative to k.
pub const CUTOFF_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderKind {
    Propagating,
    Evanescent,
    Cutoff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayleighOrder {
    pub n: i64,
    pub beta: C64,
    pub kind: OrderKind,
}

pub fn classify(n: i64, alpha: f64, k: f64, tol: f64) -> OrderKind {
    let a = (n as f64 + alpha).abs();
    if (a - k).abs() <= tol {
        OrderKind::Cutoff
    } else if a < k {
        OrderKind::Propagating
    } else {
        OrderKind::Evanescent
    }
}

/// Non-evanescent orders in increasing `n`, then no tail.
pub fn propagating_orders(alpha: f64, k: f64, tol: f64) -> Vec<RayleighOrder> {
    let lo = (-k - alpha - tol).ceil() as i64;
    let hi = (k - alpha + tol).floor() as i64;
    (lo..=hi)
        .filter_map(|n| {
            let kind = classify(n, alpha, k, tol);
            (kind != OrderKind::Evanescent).then(|| RayleighOrder {
                n,
                beta: beta(n, alpha, k),
                kind,
            })
        })
        .collect()
}

/// All orders with |n| ≤ n_max, classified.
pub fn orders_upto(alpha: f64, k: f64, tol: f64, n_max: i64) -> Vec<RayleighOrder> {
    (-n_max..=n_max)
        .map(|n| RayleighOrder {
            n,
            beta: beta(n, alpha, k),
            kind: classify(n, alpha, k, tol),
        })
        .collect()
}

pub fn is_cutoff(alpha: f64, k: f64, tol: f64) -> bool {
    propagating_orders(alpha, k, tol)
        .iter()
        .any(|o| o.kind == OrderKind::Cutoff)
}

/// Largest |n| among non-evanescent orders (0 if none).
pub fn max_propagating_index(alpha: f64, k: f64) -> i64 {
    propagating_orders(alpha, k, CUTOFF_REL_TOL * k)
        .iter()
        .map(|o| o.n.abs())
        .max()
        .unwrap_or(0)
}

/// Default DtN truncation: the largest propagating index plus eight evanescent orders.
pub fn default_dtn_order(alpha: f64, k: f64) -> usize {
    (max_propagating_index(alpha, k) + 8) as usize
}

/// Cut-off values of α in [−1/2, 1/2] for wave number k, sorted and deduplicated.
pub fn cutoff_alphas(k: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let nmax = k.ceil() as i64 + 2;
    for n in -nmax..=nmax {
        for a in [k - n as f64, -k - n as f64] {
            if (-0.5 - 1e-12..=0.5 + 1e-12).contains(&a) {
                out.push(a.clamp(-0.5, 0.5));
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    out
}

/// A plane wave incident from above: e^{ik(x₁ sinθ − x₂ cosθ)}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub k: f64,
    pub theta: f64,
}

impl WaveParams {
    pub fn new(k: f64, theta: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "k must be positive, got {k}"
            )));
        }
        if !(theta.abs() < PI / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "|theta| must be < pi/2, got {theta}"
            )));
        }
        Ok(Self { k, theta })
    }

    pub fn alpha(&self) -> f64 {
        self.k * self.theta.sin()
    }

    pub fn beta0(&self) -> f64 {
        self.k * self.theta.cos()
    }

    /// Direction θ̂ = (sinθ, −cosθ).
    pub fn direction(&self) -> [f64; 2] {
        [self.theta.sin(), -self.theta.cos()]
    }

    pub fn incident(&self, x: [f64; 2]) -> C64 {
        let d = self.direction();
        C64::from_polar(1.0, self.k * (x[0] * d[0] + x[1] * d[1]))
    }
}

/// Far-field constant γ = e^{iπ/4}/√(8kπ).
pub fn gamma_far(k: f64) -> C64 {
    C64::from_polar(1.0 / (8.0 * k * PI).sqrt(), PI / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sqrt_examples() {
        assert_eq!(branch_sqrt(C64::new(4.0, 0.0)), C64::new(2.0, 0.0));
        let s = branch_sqrt(C64::new(-5.0, 0.0));
        assert_eq!(s.re, 0.0);
        assert!((s.im - 5f64.sqrt()).abs() < 1e-15);
        let s = branch_sqrt(C64::new(0.0, 1.0));
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s - C64::new(r, r)).norm() < 1e-15);
    }

    #[test]
    fn sqrt_on_cut_is_left_limit() {
        let z = C64::new(0.0, -2.0);
        let on = branch_sqrt(z);
        let left = branch_sqrt(C64::new(-1e-13, -2.0));
        assert!((on - left).norm() < 1e-6);
        assert!(on.im >= 0.0);
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta(0, 0.0, 2.0), C64::new(2.0, 0.0));
        assert!((beta(3, 0.0, 2.0) - C64::new(0.0, 5f64.sqrt())).norm() < 1e-15);
        assert_eq!(beta(2, 0.0, 2.0), C64::new(0.0, 0.0));
    }

    #[test]
    fn order_examples() {
        let o = propagating_orders(0.0, 2.0, 1e-9 * 2.0);
        let ns: Vec<i64> = o.iter().map(|o| o.n).collect();
        assert_eq!(ns, vec![-2, -1, 0, 1, 2]);
        assert_eq!(o[0].kind, OrderKind::Cutoff);
        assert_eq!(o[4].kind, OrderKind::Cutoff);
        assert!(is_cutoff(0.0, 2.0, 2e-9));
        assert!(is_cutoff(0.3, 1.7, 1.7e-9));
        assert!(!is_cutoff(0.25, 1.0, 1e-9));
        assert!(is_cutoff(0.5, 1.5, 1e-9));
        let o = propagating_orders(0.3, 1.2, 1e-9);
        assert_eq!(o.iter().map(|o| o.n).collect::<Vec<_>>(), vec![-1, 0]);
        let o = propagating_orders(0.25, 0.5, 1e-9);
        assert_eq!(o.iter().map(|o| o.n).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn cutoff_alpha_set() {
        assert_eq!(cutoff_alphas(2.0), vec![0.0]);
        let c = cutoff_alphas(1.7);
        assert_eq!(c.len(), 2);
        assert!((c[0] + 0.3).abs() < 1e-12 && (c[1] - 0.3).abs() < 1e-12);
        assert_eq!(cutoff_alphas(1.5), vec![-0.5, 0.5]);
    }

    #[test]
    fn gamma_at_k2() {
        assert!((gamma_far(2.0).norm() - 0.141047395886939).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn sqrt_squares_back(re in -50.0f64..50.0, im in -50.0f64..50.0) {
            let z = C64::new(re, im);
            let s = branch_sqrt(z);
            prop_assert!((s * s - z).norm() <= 1e-12 * (1.0 + z.norm()));
        }

        #[test]
        fn sqrt_anticonjugation_third_quadrant(re in -50.0f64..-1e-6, im in -50.0f64..-1e-6) {
            let z = C64::new(re, im);
            let lhs = branch_sqrt(z.conj());
            let rhs = -branch_sqrt(z).conj();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + z.norm()));
        }

        #[test]
        fn sqrt_conjugation_fourth_quadrant(re in 1e-6f64..50.0, im in -50.0f64..-1e-6) {
            let z = C64::new(re, im);
            prop_assert!((branch_sqrt(z.conj()) - branch_sqrt(z).conj()).norm() <= 1e-12 * (1.0 + z.norm()));
        }

        #[test]
        fn beta_upper_half_plane(n in -40i64..40, alpha in -0.5f64..0.5, k in 0.01f64..10.0) {
            prop_assert!(beta(n, alpha, k).im >= 0.0);
        }

        #[test]
        fn beta_c_upper_half_plane(n in -40i64..40, theta in -1.4f64..1.4, k in 0.1f64..6.0, eps in 1e-5f64..0.5) {
            let kc = C64::new(k, eps);
            prop_assert!(beta_c(n, kc * theta.sin(), kc).im >= 0.0);
        }

        #[test]
        fn orders_symmetric(alpha in -0.5f64..0.5, k in 0.05f64..8.0) {
            let tol = 1e-9 * k;
            let a: Vec<(i64, OrderKind)> = propagating_orders(alpha, k, tol).iter().map(|o| (o.n, o.kind)).collect();
            let mut b: Vec<(i64, OrderKind)> = propagating_orders(-alpha, k, tol).iter().map(|o| (-o.n, o.kind)).collect();
            b.reverse();
            prop_assert_eq!(a, b);
        }
    }
}
