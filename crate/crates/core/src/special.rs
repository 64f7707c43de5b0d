//! Bessel functions of orders 0 and 1 for real positive arguments and the
//! 2D Helmholtz fundamental solution.
//!
//! Power series below `SERIES_LIMIT`, Hankel asymptotic expansion (optimally
//! truncated) above.

use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_2_PI, FRAC_PI_4, PI};

const SERIES_LIMIT: f64 = 12.0;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn series(x: f64) -> (f64, f64, f64, f64) {
    let q = 0.25 * x * x;
    let half = 0.5 * x;
    let lg = half.ln() + EULER_GAMMA;
    // J0, J1 and the harmonic-number sums for Y0, Y1.
    let mut t0 = 1.0; // (-q)^m / (m!)^2
    let mut t1 = half; // (-1)^m (x/2)^{2m+1} / (m!(m+1)!)
    let (mut j0, mut j1) = (t0, t1);
    let mut s0 = 0.0;
    let mut s1 = (1.0 + 0.0) * t1; // H_m + H_{m+1} weights, m = 0 gives H_0 + H_1 = 1
    let mut hm = 0.0;
    for m in 1..200 {
        let mf = m as f64;
        t0 *= -q / (mf * mf);
        t1 *= -q / (mf * (mf + 1.0));
        hm += 1.0 / mf;
        j0 += t0;
        j1 += t1;
        s0 -= hm * t0;
        s1 += (2.0 * hm + 1.0 / (mf + 1.0)) * t1;
        if t0.abs() < 1e-18 * j0.abs().max(1e-300)
            && t1.abs() < 1e-18 * j1.abs().max(1e-300)
            && m > 4
        {
            break;
        }
    }
    let y0 = FRAC_2_PI * (lg * j0 + s0);
    // ψ(m+1) + ψ(m+2) = −2γ + H_m + H_{m+1}
    let y1 =
        FRAC_2_PI * half.ln() * j1 - 2.0 / (PI * x) - (1.0 / PI) * (s1 - 2.0 * EULER_GAMMA * j1);
    (j0, j1, y0, y1)
}

fn hankel_asymptotic(nu: f64, x: f64) -> C64 {
    let mu = 4.0 * nu * nu;
    let mut sum = C64::new(1.0, 0.0);
    let mut term = C64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let fac = (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        let next = term * C64::new(0.0, fac);
        let mag = next.norm();
        if mag >= last || mag < 1e-17 {
            if mag < 1e-17 {
                sum += next;
            }
            break;
        }
        term = next;
        sum += term;
        last = mag;
    }
    let phase = x - 0.5 * nu * PI - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * C64::from_polar(1.0, phase) * sum
}

/// (J0, J1, Y0, Y1) at x > 0.
pub fn bessel01(x: f64) -> (f64, f64, f64, f64) {
    assert!(x > 0.0, "bessel01 needs x > 0");
    if x < SERIES_LIMIT {
        series(x)
    } else {
        let h0 = hankel_asymptotic(0.0, x);
        let h1 = hankel_asymptotic(1.0, x);
        (h0.re, h1.re, h0.im, h1.im)
    }
}

pub fn j0(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        bessel01(x.abs()).0
    }
}

pub fn j1(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * bessel01(x.abs()).1
    }
}

/// H0⁽¹⁾(x) for x > 0.
pub fn hankel1_0(x: f64) -> C64 {
    let (j0, _, y0, _) = bessel01(x);
    C64::new(j0, y0)
}

/// H1⁽¹⁾(x) for x > 0.
pub fn hankel1_1(x: f64) -> C64 {
    let (_, j1, _, y1) = bessel01(x);
    C64::new(j1, y1)
}

/// Φ(x; y) = (i/4) H0⁽¹⁾(k|x − y|).
pub fn fundamental(x: [f64; 2], y: [f64; 2], k: f64) -> C64 {
    let r = (x[0] - y[0]).hypot(x[1] - y[1]);
    C64::new(0.0, 0.25) * hankel1_0(k * r)
}

/// ∇ₓΦ(x; y) = −(i k/4) H1⁽¹⁾(k r) (x − y)/r.
pub fn fundamental_grad(x: [f64; 2], y: [f64; 2], k: f64) -> [C64; 2] {
    let d = [x[0] - y[0], x[1] - y[1]];
    let r = d[0].hypot(d[1]);
    let c = C64::new(0.0, -0.25 * k) * hankel1_1(k * r) / r;
    [c * d[0], c * d[1]]
}

#[cfg(test)]
mod tests {
    use super::*;

    // scipy.special 1.15.3: (x, J0, J1, Y0, Y1)
    const REF: [(f64, f64, f64, f64, f64); 9] = [
        (
            0.1,
            0.99750156206604,
            0.049937526036242,
            -1.5342386513503667,
            -6.458951094702027,
        ),
        (
            1.0,
            0.7651976865579665,
            0.44005058574493355,
            0.08825696421567697,
            -0.7812128213002888,
        ),
        (
            2.5,
            -0.04838377646819804,
            0.497094102464274,
            0.498070359615232,
            0.14591813796678577,
        ),
        (
            7.9,
            0.1943618448412782,
            0.21917939992175126,
            0.20652094814437574,
            -0.1817210772805731,
        ),
        (
            11.9,
            0.02504944169958986,
            -0.22898324966192404,
            -0.2298332139433751,
            -0.03471149833403043,
        ),
        (
            12.1,
            0.06966677360680752,
            -0.21574897337692486,
            -0.21843838055092546,
            -0.07873693145139557,
        ),
        (
            20.0,
            0.16702466434058322,
            0.0668331241758502,
            0.06264059680938369,
            -0.1655116143625212,
        ),
        (
            55.5,
            -0.02810407430115211,
            -0.10360300589593366,
            -0.10334564480672331,
            0.027174247859296303,
        ),
        (
            300.0,
            -0.033298554876306494,
            -0.03188743137749927,
            -0.03183188973000254,
            0.033245548121310864,
        ),
    ];

    #[test]
    fn frozen_reference_values() {
        for (x, a, b, c, d) in REF {
            let (j0, j1, y0, y1) = bessel01(x);
            let tol = 2e-11 * (1.0 + d.abs());
            assert!((j0 - a).abs() < tol, "J0({x}) = {j0}, want {a}");
            assert!((j1 - b).abs() < tol, "J1({x}) = {j1}, want {b}");
            assert!((y0 - c).abs() < tol, "Y0({x}) = {y0}, want {c}");
            assert!((y1 - d).abs() < tol, "Y1({x}) = {y1}, want {d}");
        }
    }

    #[test]
    fn wronskian() {
        // J1 Y0 − J0 Y1 = 2/(πx)
        for i in 1..400 {
            let x = 0.05 * i as f64 * 1.7;
            let (j0, j1, y0, y1) = bessel01(x);
            let w = j1 * y0 - j0 * y1;
            assert!(
                (w * PI * x / 2.0 - 1.0).abs() < 1e-10,
                "x = {x}: {}",
                w * PI * x / 2.0
            );
        }
    }

    #[test]
    fn fundamental_gradient_matches_difference() {
        let (x, y, k) = ([0.3, 1.2], [-0.4, 2.5], 1.7);
        let g = fundamental_grad(x, y, k);
        let e = 1e-6;
        let dx =
            (fundamental([x[0] + e, x[1]], y, k) - fundamental([x[0] - e, x[1]], y, k)) / (2.0 * e);
        let dy =
            (fundamental([x[0], x[1] + e], y, k) - fundamental([x[0], x[1] - e], y, k)) / (2.0 * e);
        assert!((g[0] - dx).norm() < 1e-8 && (g[1] - dy).norm() < 1e-8);
    }
}
