//! Locally perturbed gratings on a supercell with lateral absorbing layers.
//!
//! The total field is written as u = u_inc + χ s_ref + v, where s_ref is the
//! unperturbed response tiled from the cell, χ vanishes on a block around the
//! defect and v is outgoing. The equation for v has the commutator source
//! −[A, χ] s_ref, supported where χ jumps, so v can be truncated by complex
//! stretching next to the outer walls.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{DofMap, NodeForms, TopTrace};
use crate::field::{ComplexField, Representation};
use crate::green::{FarSourceGreen, PointSourceGreen};
use crate::lap::fit_slope;
use crate::linalg::{smallest_singulars, Factorization, SpMat, Triplets};
use crate::mesh::{tag, SupercellMesh};
use crate::qpsolver::{beta_complex, check_dtn_order, solve_refined};
use crate::special::fundamental;
use crate::wave::{gamma_far, PERIOD};
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Incident wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Incident {
    PlaneWave { k: f64, theta: f64 },
    PointSource { k: f64, y: [f64; 2] },
}

impl Incident {
    pub fn k(&self) -> f64 {
        match *self {
            Incident::PlaneWave { k, .. } | Incident::PointSource { k, .. } => k,
        }
    }

    /// Quasi-momentum of the supercell DtN orders.
    pub fn alpha(&self) -> f64 {
        match *self {
            Incident::PlaneWave { k, theta } => k * theta.sin(),
            Incident::PointSource { .. } => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let k = self.k();
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "k must be positive, got {k}"
            )));
        }
        if let Incident::PlaneWave { theta, .. } = *self {
            if !(theta.abs() < 0.5 * PI) {
                return Err(Error::InvalidParameter(format!(
                    "|theta| must be below pi/2, got {theta}"
                )));
            }
        }
        Ok(())
    }
}

/// Absorption profile σ(x₁): zero in the window, σ₀ d² at normalized depth d
/// inside a layer, with σ₀ = 3 ln(10⁶)/width so a lateral plane wave is
/// damped by 10⁻⁶ across the layer.
pub fn pml_sigma(sc: &SupercellMesh, x1: f64) -> f64 {
    let (a, b) = sc.window();
    let w = sc.pml_width;
    let s0 = 3.0 * 1e6f64.ln() / w;
    let d = if x1 < a {
        (a - x1) / w
    } else if x1 > b {
        (x1 - b) / w
    } else {
        0.0
    };
    s0 * d.min(1.0).powi(2)
}

/// Stretching factor s = 1 + iσ/k.
pub fn stretch_factor(sc: &SupercellMesh, k: f64, x1: f64) -> C64 {
    C64::new(1.0, pml_sigma(sc, x1) / k)
}

/// Supercell forms at one wavenumber.
#[derive(Debug, Clone)]
pub struct SupercellOperators {
    pub sc: Arc<SupercellMesh>,
    pub k: f64,
    /// Unstretched K − k²M in node numbering.
    pub physical: Triplets,
    /// Stretched forms (1/s)∂₁∂₁ + s∂₂∂₂ and s·mass.
    pub stretched: NodeForms,
    pub dofs: DofMap,
    pub top: TopTrace,
}

impl SupercellOperators {
    pub fn new(sc: &Arc<SupercellMesh>, k: f64) -> Arc<Self> {
        let mesh = &sc.mesh;
        let plain = NodeForms::new(mesh);
        let mut physical = plain.k.clone();
        physical.add_scaled(&plain.mass, C64::new(-k * k, 0.0));
        let stretched = NodeForms::weighted(mesh, &|t| {
            if !sc.pml_tags[t] {
                return None;
            }
            let cx = mesh.triangles[t]
                .iter()
                .map(|&i| mesh.nodes[i][0])
                .sum::<f64>()
                / 3.0;
            let s = stretch_factor(sc, k, cx);
            Some([1.0 / s, s, s])
        });
        let dofs = DofMap::new(mesh, &[], tag::GAMMA | tag::LEFT | tag::RIGHT);
        let top = TopTrace::new(mesh, sc.width());
        Arc::new(Self {
            sc: sc.clone(),
            k,
            physical,
            stretched,
            dofs,
            top,
        })
    }

    pub fn n_free(&self) -> usize {
        self.dofs.n_free
    }
}

/// Assembled and factored supercell operator for one quasi-momentum.
#[derive(Clone)]
pub struct SupercellSystem {
    pub ops: Arc<SupercellOperators>,
    pub alpha: f64,
    /// Cell-level DtN order; the supercell uses ξ = α + n/N, |n| ≤ N·order.
    pub dtn_order: usize,
    pub matrix: SpMat,
    pub dirichlet_block: Triplets,
    pub fact: Arc<Factorization>,
    pub sigma_min_rel: f64,
}

/// Dense DtN block over the top nodes, Σ_n L·(−iβ_n) t_n[j] conj(t_n[i]).
fn supercell_dtn(ops: &SupercellOperators, alpha: f64, dtn_order: usize) -> Triplets {
    let sc = &ops.sc;
    let n_per = sc.n_periods as i64;
    let nmax = n_per * dtn_order as i64;
    let k = C64::new(ops.k, 0.0);
    let top_nodes = &ops.top.nodes;
    let idx: std::collections::HashMap<usize, usize> =
        top_nodes.iter().enumerate().map(|(a, &n)| (n, a)).collect();
    let nt = top_nodes.len();
    let blocks: Vec<Vec<C64>> = (-nmax..=nmax)
        .collect::<Vec<_>>()
        .par_chunks(16)
        .map(|chunk| {
            let mut dense = vec![ZERO; nt * nt];
            for &n in chunk {
                let xi = alpha + n as f64 / n_per as f64;
                let beta = beta_complex(0, C64::new(xi, 0.0), k);
                let s = C64::new(0.0, ops.top.period) * (-beta);
                let t: Vec<(usize, C64)> = ops
                    .top
                    .moments(xi)
                    .into_iter()
                    .map(|(j, v)| (idx[&j], v))
                    .collect();
                for &(i, ti) in &t {
                    let row = &mut dense[i * nt..(i + 1) * nt];
                    let sti = s * ti.conj();
                    for &(j, tj) in &t {
                        row[j] += sti * tj;
                    }
                }
            }
            dense
        })
        .collect();
    let mut total = vec![ZERO; nt * nt];
    for b in blocks {
        for (t, v) in total.iter_mut().zip(b) {
            *t += v;
        }
    }
    let n = sc.mesh.nodes.len();
    let mut out = Triplets::new(n, n);
    for i in 0..nt {
        for j in 0..nt {
            let v = total[i * nt + j];
            if v != ZERO {
                out.push(top_nodes[i], top_nodes[j], v);
            }
        }
    }
    out
}

pub fn assemble_supercell(
    ops: &Arc<SupercellOperators>,
    alpha: f64,
    dtn_order: usize,
) -> Result<SupercellSystem> {
    check_dtn_order(ops.k, alpha, dtn_order)?;
    let mut node = ops.stretched.k.clone();
    node.add_scaled(&ops.stretched.mass, C64::new(-ops.k * ops.k, 0.0));
    node.add_scaled(&supercell_dtn(ops, alpha, dtn_order), C64::new(1.0, 0.0));
    let (ff, fd) = ops.dofs.split(&node);
    let matrix = ff.build()?;
    let fact = Factorization::new(matrix.clone())?;
    let scale: Vec<f64> = {
        let mut l = vec![0.0; ops.n_free()];
        for (i, d) in ops.dofs.node_dof.iter().enumerate() {
            if let Some(d) = d {
                l[*d] += ops.stretched.lumped[i];
            }
        }
        l.iter().map(|v| v.sqrt()).collect()
    };
    let sigma_min_rel = smallest_singulars(&fact, &scale, 1, 3, 0x5EED).relative();
    if sigma_min_rel < 1e-10 {
        return Err(Error::SingularSystem {
            sigma_rel: sigma_min_rel,
            detail: format!(
                "supercell operator at k = {}, alpha = {alpha} (possible bound state)",
                ops.k
            ),
        });
    }
    Ok(SupercellSystem {
        ops: ops.clone(),
        alpha,
        dtn_order,
        matrix,
        dirichlet_block: fd,
        fact: Arc::new(fact),
        sigma_min_rel,
    })
}

/// Unperturbed reference tiled over the supercell.
#[derive(Debug, Clone)]
pub enum Reference {
    /// Quasi-periodic total field on the supercell's cell (plane waves,
    /// including a constrained solution at a propagative α̂).
    Cell(ComplexField),
    /// G(·; y) = Φ(· − y) + scattered part.
    Point(Arc<PointSourceGreen>),
    /// G(·; z) for a source far above the cell.
    Far(Arc<FarSourceGreen>, [f64; 2]),
}

impl Reference {
    /// Analytic incident part and the scattered (or total, for `Cell`)
    /// reference at the supercell nodes, None where it is undefined.
    fn values(&self, sc: &SupercellMesh) -> (Vec<C64>, Vec<Option<C64>>) {
        let nodes = &sc.mesh.nodes;
        match self {
            Reference::Cell(f) => {
                let u = f.u_values();
                let alpha = f.alpha;
                let s = nodes
                    .par_iter()
                    .zip(&sc.node_origin)
                    .map(|(p, o)| match o {
                        Some((m, i)) => Some(u[*i] * (I * alpha * (PERIOD * *m as f64)).exp()),
                        None => f.evaluate_point(*p).ok(),
                    })
                    .collect();
                (vec![ZERO; nodes.len()], s)
            }
            Reference::Point(g) => {
                let inc = nodes
                    .par_iter()
                    .map(|p| fundamental(*p, g.source, g.k))
                    .collect();
                let s = nodes
                    .par_iter()
                    .zip(&sc.node_origin)
                    .map(|(p, o)| match o {
                        Some((_, i)) => Some(g.scattered_at_node(*i, p[0])),
                        None => g.scattered(*p).ok(),
                    })
                    .collect();
                (inc, s)
            }
            Reference::Far(g, z) => {
                let coeffs = g.coefficients(*z);
                let inc = nodes.par_iter().map(|p| fundamental(*p, *z, g.k)).collect();
                let s = nodes
                    .par_iter()
                    .zip(&sc.node_origin)
                    .map(|(p, o)| match o {
                        Some((_, i)) => Some(g.scattered_at_node(&coeffs, *i, p[0])),
                        None => g.scattered(*z, &[*p]).ok().map(|v| v[0]),
                    })
                    .collect();
                (inc, s)
            }
        }
    }
}

/// χ = 0 on the block 0 ≤ x₁ ≤ 2π, x₂ < z_cut around the defect, 1 elsewhere.
pub fn defect_block_height(sc: &SupercellMesh) -> f64 {
    let ts = sc.target_size;
    let top = match &sc.perturbation {
        Some(d) => d.bounding_disc.center[1] + d.bounding_disc.radius,
        None => sc.cell.curve.height_max(),
    };
    (top + 2.0 * ts).min(sc.h - 2.0 * ts)
}

fn chi(sc: &SupercellMesh) -> Vec<f64> {
    let zc = defect_block_height(sc);
    sc.mesh
        .nodes
        .iter()
        .map(|p| {
            if p[0] > -1e-9 && p[0] < PERIOD + 1e-9 && p[1] < zc {
                0.0
            } else {
                1.0
            }
        })
        .collect()
}

/// Solution of a perturbed problem.
#[derive(Debug, Clone)]
pub struct PerturbedSolution {
    pub incident: Incident,
    /// Total field on the supercell (values are u).
    pub total: ComplexField,
    /// Unperturbed total field at the supercell nodes where defined.
    pub reference: Vec<Option<C64>>,
    /// total − reference where the reference is defined.
    pub pert_part: Vec<Option<C64>>,
    /// Unabsorbed window (x₁ range) where the decomposition is reported.
    pub window: (f64, f64),
    /// Lumped L² norm of pert_part per period index inside the window.
    pub period_norms: Vec<(i64, f64)>,
    /// Largest ratio outermost/next period norm on either side.
    pub leak_ratio: f64,
    pub sigma_min_rel: f64,
}

impl PerturbedSolution {
    /// pert_part as a field (zero where undefined).
    pub fn pert_field(&self) -> ComplexField {
        let mut f = self.total.clone();
        f.values = self.pert_part.iter().map(|v| v.unwrap_or(ZERO)).collect();
        f
    }

    pub fn pert_norm(&self) -> f64 {
        self.period_norms
            .iter()
            .map(|(_, n)| n * n)
            .sum::<f64>()
            .sqrt()
    }
}

/// Reference for an incident wave on the supercell's cell.
pub fn default_reference(
    sc: &Arc<SupercellMesh>,
    incident: &Incident,
    dtn_order: Option<usize>,
    rule: Option<&crate::green::QuadratureRule>,
) -> Result<Reference> {
    let cell_ops = crate::qpsolver::CellOperators::new(&sc.cell);
    match *incident {
        Incident::PlaneWave { k, theta } => {
            let w = crate::wave::WaveParams::new(k, theta)?;
            Ok(Reference::Cell(crate::qpsolver::solve_plane_wave(
                &cell_ops, &w, dtn_order,
            )?))
        }
        Incident::PointSource { k, y } => {
            let default_rule;
            let r = match rule {
                Some(r) => r,
                None => {
                    default_rule =
                        crate::green::QuadratureRule::sqrt_mapped(k, 3.0 * sc.n_periods as f64, 10);
                    &default_rule
                }
            };
            Ok(Reference::Point(Arc::new(PointSourceGreen::new(
                &cell_ops, y, k, r, dtn_order,
            )?)))
        }
    }
}

/// Solves the perturbed problem for the given reference.
pub fn solve_perturbed_with(
    sys: &SupercellSystem,
    incident: Incident,
    reference: &Reference,
) -> Result<PerturbedSolution> {
    incident.validate()?;
    let ops = &sys.ops;
    let sc = &ops.sc;
    if (incident.k() - ops.k).abs() > 1e-12 {
        return Err(Error::InvalidParameter(
            "incident k differs from the assembled k".into(),
        ));
    }
    if let Incident::PointSource { y, .. } = incident {
        let top = match &sc.perturbation {
            Some(d) => {
                crate::mesh::CopyCurve::Perturbed(sc.profile.clone(), d.clone()).height_max()
            }
            None => sc.cell.curve.height_max(),
        };
        if !(y[1] > top) {
            return Err(Error::InvalidParameter(
                "point source must lie above the perturbed profile".into(),
            ));
        }
    }
    let (inc, sref) = reference.values(sc);
    let chi = chi(sc);
    let n = sc.mesh.nodes.len();
    // Commutator source on free rows.
    let mut f = vec![ZERO; n];
    for &(i, j, a) in &ops.physical.entries {
        if chi[i] != chi[j] {
            let sj = sref[j].ok_or_else(|| {
                Error::AssemblyFailure(format!(
                    "reference undefined at node {j} next to the defect block"
                ))
            })?;
            f[i] -= a * (chi[j] - chi[i]) * sj;
        }
    }
    let rhs_free: Vec<C64> = ops.dofs.rep.iter().map(|&i| f[i]).collect();
    // v = −u_inc − χ s_ref on Γ̃, zero on the walls.
    let dir: Vec<C64> = ops
        .dofs
        .dirichlet
        .iter()
        .map(|&i| {
            if sc.mesh.has_tag(i, tag::GAMMA) {
                -inc[i] - chi[i] * sref[i].unwrap_or(ZERO)
            } else {
                ZERO
            }
        })
        .collect();
    let mut b = rhs_free;
    for (bi, v) in b.iter_mut().zip(sys.dirichlet_block.apply(&dir)) {
        *bi -= v;
    }
    let x = solve_refined(&sys.fact, &b)?;
    let v = ops.dofs.expand(&x, Some(&dir));
    let values: Vec<C64> = (0..n)
        .map(|i| inc[i] + chi[i] * sref[i].unwrap_or(ZERO) + v[i])
        .collect();
    let reference_total: Vec<Option<C64>> = (0..n).map(|i| sref[i].map(|s| inc[i] + s)).collect();
    let pert_part: Vec<Option<C64>> = (0..n)
        .map(|i| reference_total[i].map(|r| values[i] - r))
        .collect();
    let total = ComplexField {
        mesh: sc.mesh.clone(),
        values,
        alpha: C64::new(incident.alpha(), 0.0),
        representation: Representation::QuasiPeriodic,
        h: sc.h,
        period: None,
        above: None,
    };
    let window = sc.window();
    let period_norms = period_norms(sc, &pert_part, &ops.stretched.lumped);
    let leak_ratio = leak_ratio(&period_norms);
    let sol = PerturbedSolution {
        incident,
        total,
        reference: reference_total,
        pert_part,
        window,
        period_norms,
        leak_ratio,
        sigma_min_rel: sys.sigma_min_rel,
    };
    check_leak(sc, &sol, &ops.stretched.lumped)?;
    Ok(sol)
}

/// Assembles, builds the default reference and solves.
pub fn solve_perturbed(
    sc: &Arc<SupercellMesh>,
    incident: Incident,
    dtn_order: Option<usize>,
) -> Result<PerturbedSolution> {
    let ops = SupercellOperators::new(sc, incident.k());
    let order =
        dtn_order.unwrap_or_else(|| crate::qpsolver::default_order(incident.k(), incident.alpha()));
    let sys = assemble_supercell(&ops, incident.alpha(), order)?;
    let reference = default_reference(sc, &incident, Some(order), None)?;
    solve_perturbed_with(&sys, incident, &reference)
}

fn window_periods(sc: &SupercellMesh) -> (i64, i64) {
    let (a, b) = sc.window();
    (
        (a / PERIOD - 1e-9).ceil() as i64,
        (b / PERIOD + 1e-9).floor() as i64 - 1,
    )
}

fn period_norms(sc: &SupercellMesh, pert: &[Option<C64>], lumped: &[f64]) -> Vec<(i64, f64)> {
    let (lo, hi) = window_periods(sc);
    (lo..=hi)
        .map(|m| {
            let (a, b) = (PERIOD * m as f64, PERIOD * (m + 1) as f64);
            let s: f64 = sc
                .mesh
                .nodes
                .iter()
                .zip(pert)
                .zip(lumped)
                .filter(|((p, _), _)| p[0] >= a && p[0] < b)
                .map(|((_, v), w)| v.map_or(0.0, |v| v.norm_sqr()) * w)
                .sum();
            (m, s.sqrt())
        })
        .collect()
}

fn leak_ratio(norms: &[(i64, f64)]) -> f64 {
    if norms.len() < 2 {
        return 0.0;
    }
    let r = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let n = norms.len();
    r(norms[0].1, norms[1].1).max(r(norms[n - 1].1, norms[n - 2].1))
}

/// AbsorberLeak when pert_part does not decrease toward the layers while it
/// is above 1% of the reference level in the outer periods.
fn check_leak(sc: &SupercellMesh, sol: &PerturbedSolution, lumped: &[f64]) -> Result<()> {
    if sol.leak_ratio < 1.0 {
        return Ok(());
    }
    let refs: Vec<Option<C64>> = sol.reference.clone();
    let ref_norms = period_norms(sc, &refs, lumped);
    let n = sol.period_norms.len();
    let outer = sol.period_norms[0].1.max(sol.period_norms[n - 1].1);
    let level = ref_norms[0].1.max(ref_norms[n - 1].1);
    if outer > 1e-2 * level {
        return Err(Error::AbsorberLeak {
            ratio: sol.leak_ratio,
        });
    }
    Ok(())
}

/// Field above the top line of the supercell from its trace, by the half-plane
/// Fourier integral u(x) = (1/2π)∫ û(ξ) e^{iξx₁ + iβ(ξ)(x₂ − h)} dξ with û the
/// transform of the trace (zero outside the supercell).
#[derive(Debug, Clone)]
pub struct UpwardPropagator {
    pub h: f64,
    xi: Vec<f64>,
    beta: Vec<C64>,
    weighted: Vec<C64>,
}

impl UpwardPropagator {
    /// `extent` bounds |x| of the evaluation points and `min_gap` their
    /// height above the top line; both fix the quadrature.
    pub fn new(
        top: &TopTrace,
        values: &[C64],
        h: f64,
        k: f64,
        extent: f64,
        min_gap: f64,
    ) -> Result<Self> {
        if !(min_gap > 0.0) {
            return Err(Error::InvalidParameter(
                "evaluation points must lie above the top line".into(),
            ));
        }
        let (gx, gw) = crate::quadrature::gauss_legendre(16);
        let mut xi = Vec::new();
        let mut beta = Vec::new();
        let mut w = Vec::new();
        // propagating: ξ = k sin ψ
        let np = (k * extent).ceil() as usize + 4;
        for p in 0..np {
            let (a, b) = (
                -0.5 * PI + PI * p as f64 / np as f64,
                -0.5 * PI + PI * (p + 1) as f64 / np as f64,
            );
            for (x, wt) in gx.iter().zip(&gw) {
                let psi = 0.5 * (a + b) + 0.5 * (b - a) * x;
                xi.push(k * psi.sin());
                beta.push(C64::new(k * psi.cos(), 0.0));
                w.push(0.5 * (b - a) * wt * k * psi.cos());
            }
        }
        // evanescent: ξ = ±k cosh τ
        let tmax = (40.0 / (k * min_gap)).asinh();
        let ne = ((k * tmax.cosh() - k) * extent / PI).ceil() as usize + 4;
        for sign in [-1.0, 1.0] {
            for p in 0..ne {
                let (a, b) = (
                    tmax * p as f64 / ne as f64,
                    tmax * (p + 1) as f64 / ne as f64,
                );
                for (x, wt) in gx.iter().zip(&gw) {
                    let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
                    xi.push(sign * k * t.cosh());
                    beta.push(C64::new(0.0, k * t.sinh()));
                    w.push(0.5 * (b - a) * wt * k * t.sinh());
                }
            }
        }
        let weighted: Vec<C64> = xi
            .par_iter()
            .zip(&w)
            .map(|(&x, &wt)| top.coefficient(values, x) * top.period * wt / (2.0 * PI))
            .collect();
        Ok(Self {
            h,
            xi,
            beta,
            weighted,
        })
    }

    pub fn eval(&self, x: [f64; 2]) -> C64 {
        let d = x[1] - self.h;
        self.xi
            .iter()
            .zip(&self.beta)
            .zip(&self.weighted)
            .map(|((xi, b), w)| w * (I * (xi * x[0] + b * d)).exp())
            .sum()
    }
}

/// √r e^{−ikr} u(c + r d) for d = (sin φ, cos φ), extrapolated to r = ∞ by a
/// least-squares line in 1/r; NoConvergence when dropping the smallest radius
/// moves the limit by more than 10%.
pub fn far_field_of(
    u: &dyn Fn([f64; 2]) -> Result<C64>,
    center: [f64; 2],
    k: f64,
    angles: &[f64],
    radii: &[f64],
) -> Result<Vec<C64>> {
    if radii.len() < 3 || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "need three or more increasing radii".into(),
        ));
    }
    angles
        .iter()
        .map(|&phi| {
            if !(phi.abs() < 0.5 * PI) {
                return Err(Error::InvalidParameter(format!(
                    "direction angle {phi} not in the upper half plane"
                )));
            }
            let vals: Vec<C64> = radii
                .iter()
                .map(|&r| {
                    let p = [center[0] + r * phi.sin(), center[1] + r * phi.cos()];
                    Ok(u(p)? * C64::from_polar(r.sqrt(), -k * r))
                })
                .collect::<Result<_>>()?;
            let inv: Vec<f64> = radii.iter().map(|r| 1.0 / r).collect();
            let a = line_intercept(&inv, &vals);
            let b = line_intercept(&inv[1..], &vals[1..]);
            if (a - b).norm() > 0.1 * a.norm().max(b.norm()) && (a - b).norm() > 1e-12 {
                return Err(Error::NoConvergence(format!(
                    "far field at angle {phi}: {a} vs {b}"
                )));
            }
            Ok(a)
        })
        .collect()
}

fn line_intercept(x: &[f64], y: &[C64]) -> C64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my: C64 = y.iter().sum::<C64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: C64 = x.iter().zip(y).map(|(a, b)| (b - my) * (a - mx)).sum();
    my - sxy / sxx * mx
}

/// Far field of pert_part about the origin, from its trace on the top line.
pub fn far_field(
    sol: &PerturbedSolution,
    top: &TopTrace,
    angles: &[f64],
    radii: &[f64],
) -> Result<Vec<C64>> {
    let k = sol.incident.k();
    let pf = sol.pert_field();
    let rmax = radii.iter().copied().fold(0.0, f64::max);
    let rmin_gap = angles
        .iter()
        .map(|a| radii[0] * a.cos() - sol.total.h)
        .fold(f64::INFINITY, f64::min);
    if !(rmin_gap > 0.0) {
        return Err(Error::InvalidParameter(
            "smallest radius does not reach above the top line".into(),
        ));
    }
    let prop = UpwardPropagator::new(top, &pf.values, sol.total.h, k, rmax, rmin_gap)?;
    far_field_of(&|x| Ok(prop.eval(x)), [0.0, 0.0], k, angles, radii)
}

/// Uniform samples of the total field on x₂ = h over (a, b).
#[derive(Debug, Clone)]
pub struct NearFieldData {
    pub h: f64,
    pub x1: Vec<f64>,
    pub values: Vec<C64>,
    pub incident: Incident,
}

pub fn near_field_record(
    sol: &PerturbedSolution,
    h: f64,
    a: f64,
    b: f64,
    n_samples: usize,
) -> Result<NearFieldData> {
    if !(a < b) || n_samples < 2 {
        return Err(Error::InvalidParameter(
            "need a < b and two or more samples".into(),
        ));
    }
    if a < sol.window.0 || b > sol.window.1 {
        return Err(Error::InvalidParameter(format!(
            "({a}, {b}) leaves the window {:?}",
            sol.window
        )));
    }
    if h > sol.total.h + 1e-12 {
        return Err(Error::InvalidParameter(
            "record height above the supercell top".into(),
        ));
    }
    let x1: Vec<f64> = (0..n_samples)
        .map(|i| a + (b - a) * i as f64 / (n_samples - 1) as f64)
        .collect();
    let values = x1
        .iter()
        .map(|&x| sol.total.evaluate_point([x, h]))
        .collect::<Result<_>>()?;
    Ok(NearFieldData {
        h,
        x1,
        values,
        incident: sol.incident,
    })
}

/// max |d − e| over two records on the same grid.
pub fn record_difference(d: &NearFieldData, e: &NearFieldData) -> f64 {
    d.values
        .iter()
        .zip(&e.values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

/// One row of the mixed-reciprocity table.
#[derive(Debug, Clone, Copy)]
pub struct ReciprocityRow {
    pub t: f64,
    /// max_x |√t e^{−ikt} u(x; z_t) − γ w(x; θ)| / max_x |γ w(x; θ)|.
    pub deviation: f64,
}

/// Point source at z_t = t(−sin θ, cos θ) against the plane wave with
/// incidence angle θ on the same perturbed supercell, at the points `xs`.
pub fn mixed_reciprocity_check(
    sc: &Arc<SupercellMesh>,
    xs: &[[f64; 2]],
    k: f64,
    theta: f64,
    t_list: &[f64],
    dtn_order: Option<usize>,
    rule: &crate::green::QuadratureRule,
) -> Result<Vec<ReciprocityRow>> {
    let (a, b) = sc.window();
    if xs.iter().any(|x| x[0] < a || x[0] > b || x[1] > sc.h) {
        return Err(Error::InvalidParameter(
            "evaluation points must lie in the unabsorbed window".into(),
        ));
    }
    let ops = SupercellOperators::new(sc, k);
    let pw = Incident::PlaneWave { k, theta };
    let order = dtn_order.unwrap_or_else(|| crate::qpsolver::default_order(k, pw.alpha()));
    let sys_pw = assemble_supercell(&ops, pw.alpha(), order)?;
    let w = solve_perturbed_with(&sys_pw, pw, &default_reference(sc, &pw, Some(order), None)?)?;
    let gamma = gamma_far(k);
    let wx: Vec<C64> = xs
        .iter()
        .map(|x| w.total.evaluate_point(*x).map(|v| v * gamma))
        .collect::<Result<_>>()?;
    let scale = wx.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let sys_ps = assemble_supercell(&ops, 0.0, crate::qpsolver::default_order(k, 0.0))?;
    let cell_ops = crate::qpsolver::CellOperators::new(&sc.cell);
    let far = Arc::new(FarSourceGreen::new(&cell_ops, k, rule, dtn_order)?);
    t_list
        .iter()
        .map(|&t| {
            let z = [-t * theta.sin(), t * theta.cos()];
            let inc = Incident::PointSource { k, y: z };
            let u = solve_perturbed_with(&sys_ps, inc, &Reference::Far(far.clone(), z))?;
            let s = C64::from_polar(t.sqrt(), -k * t);
            let mut worst: f64 = 0.0;
            for (x, g) in xs.iter().zip(&wx) {
                worst = worst.max((u.total.evaluate_point(*x)? * s - g).norm());
            }
            Ok(ReciprocityRow {
                t,
                deviation: worst / scale,
            })
        })
        .collect()
}

/// Fitted exponent of deviation ~ t^p.
pub fn reciprocity_rate(rows: &[ReciprocityRow]) -> f64 {
    let xs: Vec<f64> = rows.iter().map(|r| r.t.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.deviation.max(1e-300).ln()).collect();
    fit_slope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::image_green;
    use crate::mesh::build_supercell_mesh;
    use crate::profile::{LocalPerturbation, PeriodicProfile};

    fn flat_sc(pert: Option<&LocalPerturbation>, target: f64) -> Arc<SupercellMesh> {
        Arc::new(
            build_supercell_mesh(&PeriodicProfile::flat(), pert, 1.5, 7, PERIOD, target).unwrap(),
        )
    }

    #[test]
    fn pml_profile() {
        let sc = flat_sc(None, 0.4);
        let (a, b) = sc.window();
        assert_eq!(pml_sigma(&sc, 0.5 * (a + b)), 0.0);
        // ∫σ over a layer = ln 10⁶
        let q: f64 = crate::quadrature::gauss_on(b, b + sc.pml_width, 12)
            .iter()
            .map(|(x, w)| pml_sigma(&sc, *x) * w)
            .sum();
        assert!((q - 1e6f64.ln()).abs() < 1e-9, "{q}");
    }

    #[test]
    fn trivial_perturbation_plane_wave_has_small_pert_part() {
        let sc = flat_sc(None, 0.2);
        let inc = Incident::PlaneWave { k: 1.3, theta: 0.3 };
        let s = solve_perturbed(&sc, inc, None).unwrap();
        let (k, th) = (1.3f64, 0.3f64);
        let exact = |x: [f64; 2]| {
            C64::from_polar(1.0, k * (x[0] * th.sin() - x[1] * th.cos()))
                - C64::from_polar(1.0, k * (x[0] * th.sin() + x[1] * th.cos()))
        };
        let lumped = crate::fem::NodeForms::new(&s.total.mesh).lumped;
        let (a, b) = s.window;
        let (mut rn, mut en) = (0.0, 0.0);
        for ((p, r), w) in s.total.mesh.nodes.iter().zip(&s.reference).zip(&lumped) {
            if p[0] >= a && p[0] < b {
                rn += r.unwrap().norm_sqr() * w;
                en += (r.unwrap() - exact(*p)).norm_sqr() * w;
            }
        }
        let disc = (en / rn).sqrt();
        assert!(
            s.pert_norm() / rn.sqrt() < 10.0 * disc,
            "{} {disc}",
            s.pert_norm() / rn.sqrt()
        );
        // total vanishes on Γ̃ exactly
        for i in s.total.mesh.nodes_with(tag::GAMMA) {
            assert!(s.total.values[i].norm() < 1e-14);
        }
        for x in [[0.7, 0.4], [-3.0, 1.1], [9.0, 0.9]] {
            assert!((s.total.evaluate_point(x).unwrap() - exact(x)).norm() < 2e-2);
        }
    }

    #[test]
    fn notch_pert_part_decays_and_mirror_symmetry() {
        let p = PeriodicProfile::flat();
        let notch = LocalPerturbation::notch(&p, 1.0, 0.6).unwrap();
        let sc = flat_sc(Some(&notch), 0.15);
        let k = 1.4;
        let s1 = solve_perturbed(
            &sc,
            Incident::PointSource {
                k,
                y: [PI - 0.8, 0.9],
            },
            None,
        )
        .unwrap();
        let s2 = solve_perturbed(
            &sc,
            Incident::PointSource {
                k,
                y: [PI + 0.8, 0.9],
            },
            None,
        )
        .unwrap();
        assert!(s1.leak_ratio < 1.0, "{:?}", s1.period_norms);
        // mirror about x₁ = π
        let mut worst: f64 = 0.0;
        for x in [[PI - 2.0, 0.5], [PI + 0.3, 1.2], [PI - 4.0, 0.2]] {
            let a = s1.total.evaluate_point(x).unwrap();
            let b = s2.total.evaluate_point([2.0 * PI - x[0], x[1]]).unwrap();
            worst = worst.max((a - b).norm() / a.norm());
        }
        assert!(worst < 2e-2, "{worst}");
    }

    #[test]
    fn reciprocity_of_perturbed_point_sources() {
        let p = PeriodicProfile::flat();
        let bump = LocalPerturbation::bump(&p, 1.2, 0.5).unwrap();
        let sc = flat_sc(Some(&bump), 0.15);
        let k = 1.4;
        let (x, y) = ([PI - 1.5, 0.8], [PI + 2.0, 1.1]);
        let a = solve_perturbed(&sc, Incident::PointSource { k, y }, None)
            .unwrap()
            .total
            .evaluate_point(x)
            .unwrap();
        let b = solve_perturbed(&sc, Incident::PointSource { k, y: x }, None)
            .unwrap()
            .total
            .evaluate_point(y)
            .unwrap();
        assert!((a - b).norm() < 2e-2 * a.norm().max(b.norm()), "{a} {b}");
    }

    #[test]
    fn point_source_far_field_matches_image_form() {
        let sc = flat_sc(None, 0.2);
        let k = 1.5;
        let y = [PI, 0.6];
        let s = solve_perturbed(&sc, Incident::PointSource { k, y }, None).unwrap();
        let ops = SupercellOperators::new(&sc, k);
        let angles = [-0.6, 0.0, 0.4];
        let radii = [40.0, 80.0, 160.0, 320.0];
        let prop = UpwardPropagator::new(&ops.top, &s.total.values, sc.h, k, 320.0, 35.0).unwrap();
        let ff = far_field_of(&|x| Ok(prop.eval(x)), [0.0, 0.0], k, &angles, &radii).unwrap();
        let g = gamma_far(k);
        for (phi, v) in angles.iter().zip(&ff) {
            let d = [phi.sin(), phi.cos()];
            let exact = g
                * (C64::from_polar(1.0, -k * (d[0] * y[0] + d[1] * y[1]))
                    - C64::from_polar(1.0, -k * (d[0] * y[0] - d[1] * y[1])));
            assert!(
                (v - exact).norm() < 3e-2 * exact.norm(),
                "{phi}: {v} {exact}"
            );
        }
        // zero pert_part gives a zero far field
        let z = far_field(&s, &ops.top, &angles, &radii).unwrap();
        assert!(
            z.iter().all(|v| v.norm() < 1e-3 * gamma_far(k).norm()),
            "{z:?}"
        );
    }

    #[test]
    fn near_field_record_flat_closed_form() {
        let sc = flat_sc(None, 0.2);
        let (k, th) = (1.1f64, -0.2f64);
        let s = solve_perturbed(&sc, Incident::PlaneWave { k, theta: th }, None).unwrap();
        let d = near_field_record(&s, 1.2, -2.0, 8.0, 21).unwrap();
        let (al, b0) = (k * th.sin(), k * th.cos());
        for (x, v) in d.x1.iter().zip(&d.values) {
            let exact = C64::from_polar(1.0, al * x)
                * (C64::from_polar(1.0, -b0 * 1.2) - C64::from_polar(1.0, b0 * 1.2));
            assert!((v - exact).norm() < 2e-2, "{x} {v} {exact}");
        }
        assert!(near_field_record(&s, 1.2, -20.0, 8.0, 21).is_err());
    }

    #[test]
    fn image_oracle_for_point_source_total() {
        let sc = flat_sc(None, 0.15);
        let k = 1.2;
        let y = [1.0, 0.7];
        let s = solve_perturbed(&sc, Incident::PointSource { k, y }, None).unwrap();
        for x in [[3.0, 0.4], [-4.0, 1.0], [7.0, 1.3]] {
            let exact = image_green(x, y, k).0;
            assert!(
                (s.total.evaluate_point(x).unwrap() - exact).norm() < 2e-2 * exact.norm().max(0.05),
                "{x:?}"
            );
        }
    }
}
