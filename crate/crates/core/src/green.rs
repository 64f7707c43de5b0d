//! Green's function of the unperturbed grating by Floquet–Bloch synthesis.
//!
//! G(x; y) = Φ(x − y) + ∫_{−1/2}^{1/2} w_α(x) dα, where w_α is the radiating
//! α-quasi-periodic field with Dirichlet data −Φ_α(· − y) on Γ and Φ_α is the
//! quasi-periodic fundamental solution.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::modes::PropagativeSet;
use crate::qpsolver::{assemble_with, beta_complex, solve_factored, CellOperators};
use crate::quadrature::{gauss_legendre, gauss_on};
use crate::special::{fundamental, fundamental_grad};
use crate::wave::{cutoff_alphas, gamma_far, WaveParams, PERIOD};
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Quadrature on α ∈ [−1/2, 1/2].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub graded: bool,
    pub cutoff_values: Vec<f64>,
}

fn breakpoints(k: f64) -> (Vec<f64>, Vec<f64>) {
    let cut = cutoff_alphas(k);
    let mut b = vec![-0.5];
    b.extend(cut.iter().copied());
    b.push(0.5);
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, c| (*a - *c).abs() < 1e-12);
    (b, cut)
}

impl QuadratureRule {
    /// Composite Gauss–Legendre on equal panels.
    pub fn gauss(panels: usize, points: usize) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for p in 0..panels {
            let a = -0.5 + p as f64 / panels as f64;
            for (x, w) in gauss_on(a, a + 1.0 / panels as f64, points) {
                nodes.push(x);
                weights.push(w);
            }
        }
        Self {
            nodes,
            weights,
            graded: false,
            cutoff_values: Vec::new(),
        }
    }

    /// Composite Gauss with geometric grading (ratio 1/2, `levels` levels)
    /// toward every cut-off value of k.
    pub fn graded(k: f64, levels: usize, points: usize) -> Self {
        let (b, cut) = breakpoints(k);
        let is_cut = |a: f64| cut.iter().any(|c| (c - a).abs() < 1e-12);
        let mut panels: Vec<(f64, f64)> = Vec::new();
        for w in b.windows(2) {
            let (a, c) = (w[0], w[1]);
            let m = 0.5 * (a + c);
            let half = 0.5 * (c - a);
            for (end, dir) in [(a, 1.0), (c, -1.0)] {
                if is_cut(end) {
                    let mut edges = vec![0.0];
                    for l in (0..levels).rev() {
                        edges.push(half * 0.5f64.powi(l as i32 + 1));
                    }
                    edges.dedup();
                    edges.push(half);
                    let mut e: Vec<f64> = edges.iter().map(|t| end + dir * t).collect();
                    e.sort_by(f64::total_cmp);
                    for q in e.windows(2) {
                        panels.push((q[0], q[1]));
                    }
                } else if dir > 0.0 {
                    panels.push((a, m));
                } else {
                    panels.push((m, c));
                }
            }
        }
        panels.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (a, c) in panels {
            for (x, w) in gauss_on(a, c, points) {
                nodes.push(x);
                weights.push(w);
            }
        }
        Self {
            nodes,
            weights,
            graded: true,
            cutoff_values: cut,
        }
    }

    /// Between consecutive cut-offs, α = a + (b − a)(1 − cos πs)/2 with s ∈
    /// [0, 1] split into `subpanels_per_unit`·(b − a) (at least 2) equal Gauss
    /// panels. The Jacobian vanishes like √(α − a) at both ends, which removes
    /// the inverse square-root singularities of Φ_α at cut-offs.
    pub fn sqrt_mapped(k: f64, subpanels_per_unit: f64, points: usize) -> Self {
        let (b, cut) = breakpoints(k);
        let (gx, gw) = gauss_legendre(points);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in b.windows(2) {
            let (a, c) = (w[0], w[1]);
            let m = ((subpanels_per_unit * (c - a)).ceil() as usize).max(2);
            for p in 0..m {
                let (s0, s1) = (p as f64 / m as f64, (p + 1) as f64 / m as f64);
                for (x, wt) in gx.iter().zip(&gw) {
                    let s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * x;
                    let ws = 0.5 * (s1 - s0) * wt;
                    nodes.push(a + (c - a) * 0.5 * (1.0 - (PI * s).cos()));
                    weights.push(ws * (c - a) * 0.5 * PI * (PI * s).sin());
                }
            }
        }
        Self {
            nodes,
            weights,
            graded: true,
            cutoff_values: cut,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: &dyn Fn(f64) -> C64) -> C64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| f(*a) * *w)
            .sum()
    }
}

/// Value of the quasi-periodic fundamental solution and a bound on the
/// neglected tail.
#[derive(Debug, Clone, Copy)]
pub struct QpValue {
    pub value: C64,
    pub tail_bound: f64,
}

/// Φ_α(x − y) = (i/4π) Σ_{|l|≤cap} e^{i(α+l)(x₁−y₁) + iβ_l|x₂−y₂|}/β_l.
pub fn qp_fundamental(
    x: [f64; 2],
    y: [f64; 2],
    alpha: f64,
    k: f64,
    order_cap: usize,
) -> Result<QpValue> {
    let d1 = x[0] - y[0];
    let d2 = (x[1] - y[1]).abs();
    if d2 == 0.0 {
        return Err(Error::InvalidParameter(
            "qp_fundamental needs x2 != y2 (no series acceleration)".into(),
        ));
    }
    let cap = order_cap as i64;
    let (ka, aa) = (C64::new(k, 0.0), C64::new(alpha, 0.0));
    let mut s = C64::new(0.0, 0.0);
    for l in -cap..=cap {
        let b = beta_complex(l, aa, ka);
        if b.norm() < 1e-9 * k {
            return Err(Error::CutoffDivergence { order: l, alpha });
        }
        s += (I * ((alpha + l as f64) * d1 + b * d2)).exp() / b;
    }
    // |β_l| ≥ |l| − |α| − k for the omitted orders; two geometric tails.
    let b0 = (cap as f64 + 1.0 - alpha.abs() - k).max(0.0);
    let tail_bound = if b0 > 0.0 {
        2.0 * (-b0 * d2).exp() / (b0 * (1.0 - (-d2).exp())) / (4.0 * PI)
    } else {
        f64::INFINITY
    };
    Ok(QpValue {
        value: I / (4.0 * PI) * s,
        tail_bound,
    })
}

/// Order cap giving a tail below 1e−15 at vertical separation d2.
pub fn qp_order_cap(k: f64, d2: f64) -> usize {
    (k + 1.0 + 40.0 / d2.abs().max(1e-3)).ceil() as usize
}

/// (Fg)(x₁, α) = Σ_n g(x₁ + 2πn) e^{−i2πnα}; `samples[i]` holds g on period
/// n = i − N of 2N + 1 supplied periods.
pub fn fb_transform(samples: &[Vec<C64>], alpha: f64) -> Vec<C64> {
    let nper = samples.len() as i64;
    let half = (nper - 1) / 2;
    let mut out = vec![C64::new(0.0, 0.0); samples.first().map_or(0, |s| s.len())];
    for (i, s) in samples.iter().enumerate() {
        let n = i as i64 - half;
        let ph = C64::from_polar(1.0, -2.0 * PI * n as f64 * alpha);
        for (o, v) in out.iter_mut().zip(s) {
            *o += v * ph;
        }
    }
    out
}

/// g(x₁ + 2πm) = ∫ (Fg)(x₁, α) e^{i2πmα} dα by the rule.
pub fn inverse_fb(transformed: &[Vec<C64>], rule: &QuadratureRule, m: i64) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); transformed.first().map_or(0, |s| s.len())];
    for ((t, a), w) in transformed.iter().zip(&rule.nodes).zip(&rule.weights) {
        let ph = C64::from_polar(*w, 2.0 * PI * m as f64 * a);
        for (o, v) in out.iter_mut().zip(t) {
            *o += v * ph;
        }
    }
    out
}

fn max_order(k: f64) -> usize {
    k.floor() as usize + 10
}

/// Radiating fields w_α on the cell, one per quadrature node, with given
/// Dirichlet data on Γ.
fn dirichlet_slices(
    ops: &Arc<CellOperators>,
    k: f64,
    rule: &QuadratureRule,
    dtn_order: usize,
    data: &(dyn Fn(f64, [f64; 2]) -> Result<Vec<C64>> + Sync),
) -> Result<Vec<Vec<ComplexField>>> {
    let res: Vec<Result<Vec<ComplexField>>> = rule
        .nodes
        .par_iter()
        .map(|&alpha| {
            let sys = assemble_with(ops, C64::new(k, 0.0), C64::new(alpha, 0.0), dtn_order)?;
            let fact = sys.factor()?;
            let zero = vec![C64::new(0.0, 0.0); ops.n_free()];
            let mut fields = Vec::new();
            let g_all: Vec<Vec<C64>> = {
                let per_node: Vec<Vec<C64>> = ops
                    .dofs
                    .dirichlet
                    .iter()
                    .map(|&i| data(alpha, ops.mesh.mesh.nodes[i]))
                    .collect::<Result<_>>()?;
                let m = per_node.first().map_or(0, |v| v.len());
                (0..m)
                    .map(|j| per_node.iter().map(|v| v[j]).collect())
                    .collect()
            };
            for g in g_all {
                fields.push(solve_factored(&sys, &fact, &zero, Some(&g), false)?);
            }
            Ok(fields)
        })
        .collect();
    res.into_iter().collect()
}

/// G(·; y) of the unperturbed grating for one source point above Γ.
#[derive(Debug, Clone)]
pub struct PointSourceGreen {
    pub ops: Arc<CellOperators>,
    pub k: f64,
    pub source: [f64; 2],
    pub rule: QuadratureRule,
    slices: Vec<ComplexField>,
}

impl PointSourceGreen {
    /// Solves one α-slice per quadrature node. The source must lie strictly
    /// above max Γ so that the Φ_α series on Γ converges geometrically.
    pub fn new(
        ops: &Arc<CellOperators>,
        source: [f64; 2],
        k: f64,
        rule: &QuadratureRule,
        dtn_order: Option<usize>,
    ) -> Result<Self> {
        let top = ops.mesh.curve.height_max();
        if !(source[1] > top + 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "source height {} must exceed the profile maximum {top}",
                source[1]
            )));
        }
        let order = dtn_order.unwrap_or_else(|| max_order(k));
        let data = |alpha: f64, p: [f64; 2]| -> Result<Vec<C64>> {
            let cap = qp_order_cap(k, p[1] - source[1]);
            let v = qp_fundamental(p, source, alpha, k, cap)?.value;
            Ok(vec![-v * C64::from_polar(1.0, -alpha * p[0])])
        };
        let slices = dirichlet_slices(ops, k, rule, order, &data)?
            .into_iter()
            .map(|mut v| v.remove(0))
            .collect();
        Ok(Self {
            ops: ops.clone(),
            k,
            source,
            rule: rule.clone(),
            slices,
        })
    }

    /// ∫ w_α(x) dα.
    pub fn scattered(&self, x: [f64; 2]) -> Result<C64> {
        let mut s = C64::new(0.0, 0.0);
        for (f, w) in self.slices.iter().zip(&self.rule.weights) {
            s += f.evaluate_point(x)? * *w;
        }
        Ok(s)
    }

    pub fn eval(&self, x: [f64; 2]) -> Result<C64> {
        if x == self.source {
            return Err(Error::InvalidParameter(
                "G is singular at the source point".into(),
            ));
        }
        Ok(fundamental(x, self.source, self.k) + self.scattered(x)?)
    }

    /// Scattered part at x = (cell node) + 2πm, given x₁.
    pub fn scattered_at_node(&self, node: usize, x1: f64) -> C64 {
        self.slices
            .iter()
            .zip(&self.rule.weights)
            .map(|(f, w)| f.values[node] * C64::from_polar(*w, f.alpha.re * x1))
            .sum()
    }

    /// G on the line x₂ at x₁ = x0 + 2π(m + j/per_period) for m in `ms`,
    /// j = 0..per_period. Returns (x₁, G) sorted by x₁.
    pub fn on_line(
        &self,
        x0: f64,
        x2: f64,
        per_period: usize,
        ms: std::ops::RangeInclusive<i64>,
    ) -> Result<Vec<(f64, C64)>> {
        let mesh = &self.ops.mesh.mesh;
        let mut out = Vec::new();
        for j in 0..per_period {
            let xl = (x0 + PERIOD * j as f64 / per_period as f64).rem_euclid(PERIOD);
            let shift = x0 + PERIOD * j as f64 / per_period as f64 - xl;
            let (t, b) = mesh
                .locate([xl, x2])
                .ok_or(Error::OutOfDomain { x: xl, y: x2 })?;
            let tri = mesh.triangles[t];
            // periodic factor of each slice at the local point, times its weight
            let local: Vec<(f64, C64)> = self
                .slices
                .iter()
                .zip(&self.rule.weights)
                .map(|(f, w)| {
                    (
                        f.alpha.re,
                        (0..3).map(|a| f.values[tri[a]] * b[a]).sum::<C64>() * *w,
                    )
                })
                .collect();
            for m in ms.clone() {
                let x1 = xl + shift + PERIOD * m as f64;
                let s: C64 = local
                    .iter()
                    .map(|(a, v)| v * C64::from_polar(1.0, a * x1))
                    .sum();
                out.push((x1, fundamental([x1, x2], self.source, self.k) + s));
            }
        }
        out.sort_by(|p, q| p.0.total_cmp(&q.0));
        Ok(out)
    }

    /// The synthesized G at the cell's Γ nodes (zero up to quadrature error).
    pub fn gamma_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &i in &self.ops.dofs.dirichlet {
            let p = self.ops.mesh.mesh.nodes[i];
            if p[1] < self.source[1] {
                worst = worst.max(self.eval(p)?.norm());
            }
        }
        Ok(worst)
    }
}

/// Total, radiating and propagating parts at the evaluation points.
#[derive(Debug, Clone)]
pub struct GreenEvaluation {
    pub source: [f64; 2],
    pub points: Vec<[f64; 2]>,
    pub total: Vec<C64>,
    pub rad: Vec<C64>,
    pub prop: Vec<C64>,
    /// Points inside a ψ± transition band.
    pub band_flags: Vec<bool>,
}

/// Evaluates G(x; y) at the points, with G_prop from the propagative set
/// when one is supplied (G_rad = G − G_prop).
pub fn greens_unperturbed(
    ops: &Arc<CellOperators>,
    y: [f64; 2],
    k: f64,
    rule: &QuadratureRule,
    dtn_order: Option<usize>,
    points: &[[f64; 2]],
    modes: Option<(&PropagativeSet, &CutoffPair)>,
) -> Result<GreenEvaluation> {
    let g = PointSourceGreen::new(ops, y, k, rule, dtn_order)?;
    let total: Vec<C64> = points.iter().map(|p| g.eval(*p)).collect::<Result<_>>()?;
    let mut prop = vec![C64::new(0.0, 0.0); points.len()];
    let mut band_flags = vec![false; points.len()];
    if let Some((set, psi)) = modes {
        for (i, p) in points.iter().enumerate() {
            let (v, band) = green_prop_part(*p, y, set, psi)?;
            prop[i] = v;
            band_flags[i] = band;
        }
    }
    let rad = total.iter().zip(&prop).map(|(t, p)| t - p).collect();
    Ok(GreenEvaluation {
        source: y,
        points: points.to_vec(),
        total,
        rad,
        prop,
        band_flags,
    })
}

/// Quintic smoothstep cut-offs: ψ₊ rises on [σ − 1, σ], ψ₋(x₁) = ψ₊(−x₁).
#[derive(Debug, Clone, Copy)]
pub struct CutoffPair {
    pub sigma: f64,
}

impl CutoffPair {
    /// σ = max(R, 2π) + 1.5.
    pub fn for_radius(r: f64) -> Self {
        Self {
            sigma: r.max(PERIOD) + 1.5,
        }
    }

    fn step(t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }

    pub fn plus(&self, x1: f64) -> f64 {
        Self::step(x1 - (self.sigma - 1.0))
    }

    pub fn minus(&self, x1: f64) -> f64 {
        self.plus(-x1)
    }

    pub fn in_band(&self, x1: f64) -> bool {
        let a = x1.abs();
        a > self.sigma - 1.0 && a < self.sigma
    }
}

/// 2πi Σ_j [ψ₊(x₁) Σ_{λ>0} φ̂(x) conj(φ̂(y))/λ − ψ₋(x₁) Σ_{λ<0} φ̂(x) conj(φ̂(y))/λ].
/// The flag marks x inside a transition band.
pub fn green_prop_part(
    x: [f64; 2],
    y: [f64; 2],
    set: &PropagativeSet,
    psi: &CutoffPair,
) -> Result<(C64, bool)> {
    let (pp, pm) = (psi.plus(x[0]), psi.minus(x[0]));
    let mut s = C64::new(0.0, 0.0);
    for e in &set.entries {
        for (phi, lam) in e.modes.iter().zip(&e.lambdas) {
            let w = if *lam > 0.0 { pp } else { -pm };
            if w == 0.0 {
                continue;
            }
            s += w / lam * phi.evaluate_point(x)? * phi.evaluate_point(y)?.conj();
        }
    }
    Ok((2.0 * PI * I * s, psi.in_band(x[0])))
}

/// Function value and gradient with respect to the point.
pub type ValueGrad = (C64, [C64; 2]);

/// Residual of the representation u(x) = ∫_{C_R} [u ∂_νG(x; ·) − G(x; ·) ∂_νu] ds
/// on the half circle C_R = {|y − c| = R, y₂ > c₂} with ν the normal pointing
/// away from c (equivalently ∫[∂_νu G − ∂_νG u] with ν pointing into D_R).
/// Trapezoid rule with `n` intervals in angle; returns
/// max_x |u(x) − integral| / max_x |u(x)|.
pub fn check_representation(
    u: &dyn Fn([f64; 2]) -> ValueGrad,
    g: &dyn Fn([f64; 2], [f64; 2]) -> ValueGrad,
    center: [f64; 2],
    radius: f64,
    n: usize,
    test_points: &[[f64; 2]],
) -> f64 {
    let h = PI / n as f64;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &x in test_points {
        let mut s = C64::new(0.0, 0.0);
        for j in 0..=n {
            let t = j as f64 * h;
            let nu = [t.cos(), t.sin()];
            let y = [center[0] + radius * nu[0], center[1] + radius * nu[1]];
            let (uv, ug) = u(y);
            let (gv, gg) = g(x, y);
            let dn_u = ug[0] * nu[0] + ug[1] * nu[1];
            let dn_g = gg[0] * nu[0] + gg[1] * nu[1];
            let wt = if j == 0 || j == n { 0.5 } else { 1.0 };
            s += (uv * dn_g - gv * dn_u) * (wt * h * radius);
        }
        let ux = u(x).0;
        worst = worst.max((ux - s).norm());
        scale = scale.max(ux.norm());
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// Image Green's function of the sound-soft line x₂ = 0 and its gradient in y.
pub fn image_green(x: [f64; 2], y: [f64; 2], k: f64) -> ValueGrad {
    let ys = [y[0], -y[1]];
    let v = fundamental(x, y, k) - fundamental(x, ys, k);
    // ∇_y Φ(x; y) = −∇_x Φ(x; y); the mirror point flips the second component.
    let a = fundamental_grad(x, y, k);
    let b = fundamental_grad(x, ys, k);
    (v, [-a[0] + b[0], -a[1] - b[1]])
}

/// Far sources z above the cell: Φ_α(x − z) is a sum of downward plane
/// waves, so w_α is a combination of per-order responses computed once.
#[derive(Debug, Clone)]
pub struct FarSourceGreen {
    pub ops: Arc<CellOperators>,
    pub k: f64,
    pub rule: QuadratureRule,
    pub orders: Vec<i64>,
    /// slices[j][o]: response to Dirichlet data −e^{i(α_j+l_o)x₁ − iβ x₂}.
    slices: Vec<Vec<ComplexField>>,
}

impl FarSourceGreen {
    pub fn new(
        ops: &Arc<CellOperators>,
        k: f64,
        rule: &QuadratureRule,
        dtn_order: Option<usize>,
    ) -> Result<Self> {
        let order = dtn_order.unwrap_or_else(|| max_order(k));
        let lmax = k.ceil() as i64 + 1;
        let orders: Vec<i64> = (-lmax..=lmax).collect();
        let ka = C64::new(k, 0.0);
        let ords = orders.clone();
        let data = move |alpha: f64, p: [f64; 2]| -> Result<Vec<C64>> {
            Ok(ords
                .iter()
                .map(|&l| {
                    let b = beta_complex(l, C64::new(alpha, 0.0), ka);
                    -(I * (l as f64 * p[0] - b * p[1])).exp()
                })
                .collect())
        };
        let slices = dirichlet_slices(ops, k, rule, order, &data)?;
        Ok(Self {
            ops: ops.clone(),
            k,
            rule: rule.clone(),
            orders,
            slices,
        })
    }

    /// Scattered part of G(x; z) at the given points; orders whose plane wave
    /// has decayed below 1e−16 at the cell are dropped.
    /// Weighted plane-wave amplitudes of Φ_α(· − z) per (α-node, order);
    /// amplitudes below 1e−16 are zeroed.
    pub fn coefficients(&self, z: [f64; 2]) -> Vec<Vec<C64>> {
        let ka = C64::new(self.k, 0.0);
        self.rule
            .nodes
            .iter()
            .zip(&self.rule.weights)
            .map(|(&alpha, &w)| {
                self.orders
                    .iter()
                    .map(|&l| {
                        let b = beta_complex(l, C64::new(alpha, 0.0), ka);
                        if b.norm() < 1e-14 {
                            return C64::new(0.0, 0.0);
                        }
                        let c = I / (4.0 * PI * b)
                            * (I * (-(alpha + l as f64) * z[0] + b * z[1])).exp()
                            * w;
                        if c.norm() < 1e-16 {
                            C64::new(0.0, 0.0)
                        } else {
                            c
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Scattered part at x = (cell node) + 2πm, given x₁ and the coefficients.
    pub fn scattered_at_node(&self, coeffs: &[Vec<C64>], node: usize, x1: f64) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for ((fields, cs), &alpha) in self.slices.iter().zip(coeffs).zip(&self.rule.nodes) {
            let mut t = C64::new(0.0, 0.0);
            for (f, c) in fields.iter().zip(cs) {
                if c.norm_sqr() > 0.0 {
                    t += f.values[node] * c;
                }
            }
            s += t * C64::from_polar(1.0, alpha * x1);
        }
        s
    }

    pub fn scattered(&self, z: [f64; 2], points: &[[f64; 2]]) -> Result<Vec<C64>> {
        let top = points
            .iter()
            .map(|p| p[1])
            .fold(f64::NEG_INFINITY, f64::max);
        if !(z[1] > top) {
            return Err(Error::InvalidParameter(
                "far source must lie above the evaluation points".into(),
            ));
        }
        let coeffs = self.coefficients(z);
        let mut out = vec![C64::new(0.0, 0.0); points.len()];
        for (fields, cs) in self.slices.iter().zip(&coeffs) {
            for (f, c) in fields.iter().zip(cs) {
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                for (o, p) in out.iter_mut().zip(points) {
                    *o += f.evaluate_point(*p)? * c;
                }
            }
        }
        Ok(out)
    }

    pub fn eval(&self, z: [f64; 2], points: &[[f64; 2]]) -> Result<Vec<C64>> {
        let s = self.scattered(z, points)?;
        Ok(points
            .iter()
            .zip(s)
            .map(|(p, v)| fundamental(*p, z, self.k) + v)
            .collect())
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy)]
pub struct LimitRow {
    pub t: f64,
    /// ‖√t e^{−ikt} G(·; z_t)/γ − v‖ / ‖v‖ over the cell nodes (lumped L²).
    pub deviation: f64,
}

/// √t e^{−ikt} G(x; z_t)/γ against the plane-wave total field v(x; θ) with
/// z_t = −t(sin θ, −cos θ), for each t.
pub fn point_source_limit(
    ops: &Arc<CellOperators>,
    k: f64,
    theta: f64,
    t_list: &[f64],
    dtn_order: Option<usize>,
    rule: &QuadratureRule,
) -> Result<Vec<LimitRow>> {
    let h = ops.mesh.h;
    if t_list.iter().any(|t| !(t * theta.cos() > 2.0 * h)) {
        return Err(Error::InvalidParameter(
            "need t cos(theta) > 2h for every t".into(),
        ));
    }
    let wave = WaveParams::new(k, theta)?;
    let v = crate::qpsolver::solve_plane_wave(ops, &wave, dtn_order)?;
    let vu = v.u_values();
    let pts: Vec<[f64; 2]> = ops.mesh.mesh.nodes.clone();
    let lumped = &ops.forms.lumped;
    let vn = vu
        .iter()
        .zip(lumped)
        .map(|(a, m)| a.norm_sqr() * m)
        .sum::<f64>()
        .sqrt();
    let far = FarSourceGreen::new(ops, k, rule, dtn_order)?;
    let gamma = gamma_far(k);
    t_list
        .iter()
        .map(|&t| {
            let z = [-t * theta.sin(), t * theta.cos()];
            let g = far.eval(z, &pts)?;
            let scale = C64::from_polar(t.sqrt(), -k * t) / gamma;
            let d = g
                .iter()
                .zip(&vu)
                .zip(lumped)
                .map(|((g, v), m)| (g * scale - v).norm_sqr() * m)
                .sum::<f64>()
                .sqrt();
            Ok(LimitRow {
                t,
                deviation: d / vn,
            })
        })
        .collect()
}

/// Fitted exponent p of |f(x₁)| ~ |x₁|^p from samples (x₁, f).
pub fn fit_power(samples: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = samples.iter().map(|s| s.0.abs().ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.max(1e-300).ln()).collect();
    crate::lap::fit_slope(&xs, &ys)
}

/// |G_rad(2πm + x₀, x₂)| for the given m, from one synthesis.
pub fn lateral_samples(
    g: &PointSourceGreen,
    x0: f64,
    x2: f64,
    ms: &[i64],
) -> Result<Vec<(f64, f64)>> {
    ms.iter()
        .map(|&m| {
            let x1 = x0 + PERIOD * m as f64;
            Ok((x1 - g.source[0], g.eval([x1, x2])?.norm()))
        })
        .collect()
}

/// Symmetry defect max |G(x; y) − G(y; x)| / max |G| over point pairs.
pub fn symmetry_defect(
    ops: &Arc<CellOperators>,
    k: f64,
    rule: &QuadratureRule,
    pairs: &[([f64; 2], [f64; 2])],
    dtn_order: Option<usize>,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (x, y) in pairs {
        let gy = PointSourceGreen::new(ops, *y, k, rule, dtn_order)?;
        let gx = PointSourceGreen::new(ops, *x, k, rule, dtn_order)?;
        let a = gy.eval(*x)?;
        let b = gx.eval(*y)?;
        worst = worst.max((a - b).norm());
        scale = scale.max(a.norm()).max(b.norm());
    }
    Ok(worst / scale.max(f64::MIN_POSITIVE))
}

/// Discrete Helmholtz residual of a nodal field: |K u − k² M u| at interior
/// free nodes relative to |K u|.
pub fn helmholtz_residual(ops: &CellOperators, u: &[C64], k: f64) -> f64 {
    let ku = ops.forms.k.apply(u);
    let mu = ops.forms.mass.apply(u);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, (a, b)) in ku.iter().zip(&mu).enumerate() {
        if ops.mesh.mesh.node_tags[i] != 0 {
            continue;
        }
        num += (a - k * k * b).norm_sqr();
        den += a.norm_sqr();
    }
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cell_mesh;
    use crate::profile::PeriodicProfile;

    #[test]
    fn rules_sum_to_one_with_positive_weights() {
        for r in [
            QuadratureRule::gauss(4, 8),
            QuadratureRule::graded(1.7, 6, 8),
            QuadratureRule::sqrt_mapped(1.7, 20.0, 8),
        ] {
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            assert!(r.weights.iter().all(|w| *w > 0.0));
            for c in &r.cutoff_values {
                assert!(r.nodes.iter().all(|a| (a - c).abs() > 1e-12));
            }
        }
    }

    #[test]
    fn mapped_rule_integrates_inverse_sqrt() {
        // ∫ |α − 0.3|^{-1/2} over [−1/2, 1/2] = 2(√0.8 + √0.2)
        let r = QuadratureRule::sqrt_mapped(1.7, 4.0, 12);
        let q = r
            .integrate(&|a| C64::new((a - 0.3).abs().powf(-0.5), 0.0))
            .re;
        let exact = 2.0 * (0.8f64.sqrt() + 0.2f64.sqrt());
        // The singularity at −0.3 is also a breakpoint but the integrand is smooth there.
        assert!((q - exact).abs() < 1e-10, "{q} {exact}");
        let g = QuadratureRule::graded(1.7, 6, 8);
        let qg = g
            .integrate(&|a| C64::new((a - 0.3).abs().powf(-0.5), 0.0))
            .re;
        assert!((qg - exact).abs() < 5e-2, "{qg}");
    }

    #[test]
    fn qp_series_converges() {
        let x = [0.4, 1.0];
        let y = [1.3, 0.0];
        let a = qp_fundamental(x, y, 0.3, 1.0, 40).unwrap();
        let b = qp_fundamental(x, y, 0.3, 1.0, 80).unwrap();
        assert!((a.value - b.value).norm() < 1e-12);
        assert!(a.tail_bound < 1e-12);
    }

    #[test]
    fn qp_symmetry_under_alpha_reversal() {
        let x = [0.4, 1.0];
        let y = [2.1, 0.3];
        let a = qp_fundamental(x, y, 0.27, 1.3, 60).unwrap().value;
        let b = qp_fundamental(y, x, -0.27, 1.3, 60).unwrap().value;
        assert!((a - b).norm() < 1e-13);
    }

    #[test]
    fn qp_cutoff_divergence() {
        assert!(matches!(
            qp_fundamental([0.0, 1.0], [0.0, 0.0], 0.0, 2.0, 10),
            Err(Error::CutoffDivergence { order: -2, .. })
        ));
    }

    #[test]
    fn fb_inverse_of_qp_recovers_fundamental() {
        let (x, y, k) = ([0.3, 0.9], [1.0, 0.2], 1.3);
        let rule = QuadratureRule::sqrt_mapped(k, 40.0, 16);
        let inv = rule.integrate(&|a| qp_fundamental(x, y, a, k, 200).unwrap().value);
        let direct = fundamental(x, y, k);
        assert!(
            (inv - direct).norm() < 1e-6 * direct.norm(),
            "{inv} {direct}"
        );
    }

    #[test]
    fn fb_transform_cases() {
        // single-period support
        let g = vec![
            vec![C64::new(0.0, 0.0)],
            vec![C64::new(2.0, 1.0)],
            vec![C64::new(0.0, 0.0)],
        ];
        for a in [-0.3, 0.1, 0.45] {
            let f = fb_transform(&g, a);
            assert!((f[0] - C64::new(2.0, 1.0)).norm() < 1e-15);
        }
        // inverse on a decaying sequence
        let samples: Vec<Vec<C64>> = (-6..=6)
            .map(|n: i64| vec![C64::new((-(n.abs() as f64)).exp(), n as f64 * 0.1)])
            .collect();
        let rule = QuadratureRule::gauss(16, 12);
        let tr: Vec<Vec<C64>> = rule
            .nodes
            .iter()
            .map(|a| fb_transform(&samples, *a))
            .collect();
        for m in -3..=3i64 {
            let back = inverse_fb(&tr, &rule, m);
            assert!((back[0] - samples[(m + 6) as usize][0]).norm() < 1e-12);
        }
        // periodic g concentrates at α = 0
        let per: Vec<Vec<C64>> = (0..21).map(|_| vec![C64::new(1.0, 0.0)]).collect();
        assert!((fb_transform(&per, 0.0)[0].norm() - 21.0).abs() < 1e-12);
        assert!(fb_transform(&per, 0.25)[0].norm() < 1.5);
    }

    #[test]
    fn cutoff_functions() {
        let c = CutoffPair::for_radius(3.0);
        assert!((c.sigma - (PERIOD + 1.5)).abs() < 1e-15);
        for x in [-20.0, -7.0, 0.0, 6.0, 7.5, 20.0] {
            assert!(c.plus(x) * c.minus(x) == 0.0);
        }
        assert_eq!(c.plus(c.sigma), 1.0);
        assert_eq!(c.plus(c.sigma - 1.0), 0.0);
    }

    #[test]
    fn flat_line_matches_image_green() {
        let m = build_cell_mesh(&PeriodicProfile::flat(), 2.0, 0.1).unwrap();
        let ops = CellOperators::new(&m);
        let k = 1.3;
        let y = [2.0, 0.8];
        let rule = QuadratureRule::sqrt_mapped(k, 6.0, 10);
        let g = PointSourceGreen::new(&ops, y, k, &rule, None).unwrap();
        let pts = [
            [0.5, 0.3],
            [3.0, 1.5],
            [5.5, 0.6],
            [2.0 + PERIOD, 1.0],
            [2.0 - 2.0 * PERIOD, 0.4],
        ];
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for p in pts {
            let a = g.eval(p).unwrap();
            let b = image_green(p, y, k).0;
            worst = worst.max((a - b).norm());
            scale = scale.max(b.norm());
        }
        assert!(worst / scale < 1e-2, "{}", worst / scale);
        assert!(g.gamma_residual().unwrap() < 1e-2 * scale);
    }

    #[test]
    fn representation_with_image_oracle() {
        let k = 1.5;
        let y0 = [0.4, 0.7];
        let u = |p: [f64; 2]| {
            let v = image_green(p, y0, k).0;
            // gradient in the first argument
            let a = fundamental_grad(p, y0, k);
            let b = fundamental_grad(p, [y0[0], -y0[1]], k);
            (v, [a[0] - b[0], a[1] - b[1]])
        };
        let g = |x: [f64; 2], y: [f64; 2]| image_green(x, y, k);
        let tests = [[4.0, 1.0], [-3.5, 2.0], [0.5, 4.0]];
        let r8 = check_representation(&u, &g, [0.0, 0.0], 2.0, 8, &tests);
        let r16 = check_representation(&u, &g, [0.0, 0.0], 2.0, 16, &tests);
        let r32 = check_representation(&u, &g, [0.0, 0.0], 2.0, 32, &tests);
        assert!(r32 < 5e-2, "{r8} {r16} {r32}");
        assert!(
            r16 <= 0.5 * r8 && r32 <= 0.5 * r16.max(1e-13),
            "{r8} {r16} {r32}"
        );
        let zero = |_: [f64; 2]| (C64::new(0.0, 0.0), [C64::new(0.0, 0.0); 2]);
        assert_eq!(
            check_representation(&zero, &g, [0.0, 0.0], 2.0, 8, &tests),
            0.0
        );
    }

    #[test]
    fn gamma_value() {
        assert!((gamma_far(2.0).norm() - 1.0 / (16.0 * PI).sqrt()).abs() < 1e-15);
        assert!((gamma_far(2.0).norm() - 0.14105).abs() < 1e-5);
    }
}
