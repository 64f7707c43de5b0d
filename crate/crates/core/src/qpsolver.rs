//! Quasi-periodic cell problem with the Rayleigh DtN condition on x₂ = h.
//!
//! Unknown is the periodic factor v = e^{−iαx₁}u. The discrete operator is
//! M = K − 2iαC − (k² − α²)Mass − DtN with C_ij = ∫∂₁φ_j φ_i and
//! DtN_ij = 2π Σ_{|n|≤N} iβ_n t_n[j] conj(t_n[i]), t_n[j] = (1/2π)∫φ_j e^{−inx₁}.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{DofMap, NodeForms, TopTrace};
use crate::field::{ComplexField, RayleighExpansion, Representation};
use crate::linalg::{matvec, smallest_singulars, Factorization, SpMat, Triplets};
use crate::mesh::{tag, CellMesh};
use crate::wave::{branch_sqrt, WaveParams, CUTOFF_REL_TOL, PERIOD};
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Relative σ_min below which a system is reported singular.
pub const SINGULAR_TOL: f64 = 1e-10;

/// Mesh-dependent, parameter-free pieces of the cell operator.
#[derive(Debug)]
pub struct CellOperators {
    pub mesh: Arc<CellMesh>,
    pub forms: NodeForms,
    pub dofs: DofMap,
    pub top: TopTrace,
    k_ff: Triplets,
    k_fd: Triplets,
    m_ff: Triplets,
    m_fd: Triplets,
    c_ff: Triplets,
    c_fd: Triplets,
    /// sqrt of the lumped mass per free index (σ_min scaling).
    pub scale: Vec<f64>,
}

impl CellOperators {
    pub fn new(mesh: &CellMesh) -> Arc<Self> {
        let mesh = Arc::new(mesh.clone());
        let forms = NodeForms::new(&mesh.mesh);
        let dofs = DofMap::new(&mesh.mesh, &mesh.periodic_pairs, tag::GAMMA);
        let top = TopTrace::new(&mesh.mesh, PERIOD);
        let (k_ff, k_fd) = dofs.split(&forms.k);
        let (m_ff, m_fd) = dofs.split(&forms.mass);
        let (c_ff, c_fd) = dofs.split(&forms.c);
        let mut lumped = vec![0.0; dofs.n_free];
        for (i, d) in dofs.node_dof.iter().enumerate() {
            if let Some(d) = d {
                lumped[*d] += forms.lumped[i];
            }
        }
        let scale = lumped.iter().map(|v| v.sqrt()).collect();
        Arc::new(Self {
            mesh,
            forms,
            dofs,
            top,
            k_ff,
            k_fd,
            m_ff,
            m_fd,
            c_ff,
            c_fd,
            scale,
        })
    }

    pub fn n_free(&self) -> usize {
        self.dofs.n_free
    }

    /// Free×free triplets of K − 2iαC − (k² − α²)Mass.
    fn volume(&self, k: C64, alpha: C64) -> (Triplets, Triplets) {
        let mut ff = self.k_ff.clone();
        ff.add_scaled(&self.c_ff, -2.0 * I * alpha);
        ff.add_scaled(&self.m_ff, -(k * k - alpha * alpha));
        let mut fd = self.k_fd.clone();
        fd.add_scaled(&self.c_fd, -2.0 * I * alpha);
        fd.add_scaled(&self.m_fd, -(k * k - alpha * alpha));
        (ff, fd)
    }

    /// Free-index DtN triplets for the given (ξ_n, coefficient) list.
    pub fn dtn_triplets(&self, orders: &[(f64, C64)]) -> Triplets {
        self.dofs
            .split(&self.top.dtn(self.mesh.mesh.nodes.len(), orders))
            .0
    }

    /// Free-index C (∂₁) and mass triplets, for derivative forms.
    pub fn c_free(&self) -> &Triplets {
        &self.c_ff
    }

    pub fn mass_free(&self) -> &Triplets {
        &self.m_ff
    }

    /// Moments (1/2π)∫φ_j e^{−inx₁} per free index.
    pub fn free_moments(&self, n: i64) -> Vec<C64> {
        let mut t = vec![C64::new(0.0, 0.0); self.dofs.n_free];
        for (j, v) in self.top.moments(n as f64) {
            if let Some(d) = self.dofs.node_dof[j] {
                t[d] += v;
            }
        }
        t
    }
}

/// β_n for complex k and α.
pub fn beta_complex(n: i64, alpha: C64, k: C64) -> C64 {
    let x = alpha + n as f64;
    branch_sqrt(k * k - x * x)
}

/// Assembled cell operator at fixed (k, α).
#[derive(Debug)]
pub struct AssembledSystem {
    pub ops: Arc<CellOperators>,
    pub k: C64,
    pub alpha: C64,
    pub dtn_order: usize,
    pub matrix: SpMat,
    pub triplets: Triplets,
    pub dirichlet_block: Triplets,
}

/// Checks that the truncation keeps every propagating order plus two.
pub fn check_dtn_order(k: f64, alpha: f64, dtn_order: usize) -> Result<()> {
    let propagating = crate::wave::propagating_orders(alpha, k, CUTOFF_REL_TOL * k)
        .iter()
        .filter(|o| o.kind == crate::wave::OrderKind::Propagating)
        .count();
    let max_n = crate::wave::max_propagating_index(alpha, k);
    if dtn_order < propagating + 2 || (dtn_order as i64) < max_n {
        return Err(Error::InvalidParameter(format!(
            "dtn_order {dtn_order} is below the number of propagating orders ({propagating}) + 2"
        )));
    }
    Ok(())
}

pub fn assemble(mesh: &CellMesh, k: f64, alpha: f64, dtn_order: usize) -> Result<AssembledSystem> {
    assemble_with(
        &CellOperators::new(mesh),
        C64::new(k, 0.0),
        C64::new(alpha, 0.0),
        dtn_order,
    )
}

/// Assembly for possibly complex (k, α), e.g. k + iε with α = (k + iε) sin θ.
pub fn assemble_with(
    ops: &Arc<CellOperators>,
    k: C64,
    alpha: C64,
    dtn_order: usize,
) -> Result<AssembledSystem> {
    if !(k.re > 0.0) || !k.is_finite() || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bad wave parameters k = {k}, alpha = {alpha}"
        )));
    }
    check_dtn_order(k.re, alpha.re, dtn_order)?;
    let (mut ff, fd) = ops.volume(k, alpha);
    let n = dtn_order as i64;
    let orders: Vec<(f64, C64)> = (-n..=n)
        .map(|m| (m as f64, -beta_complex(m, alpha, k)))
        .collect();
    ff.add_scaled(&ops.dtn_triplets(&orders), C64::new(1.0, 0.0));
    let matrix = ff.build()?;
    Ok(AssembledSystem {
        ops: ops.clone(),
        k,
        alpha,
        dtn_order,
        matrix,
        triplets: ff,
        dirichlet_block: fd,
    })
}

impl AssembledSystem {
    pub fn factor(&self) -> Result<Factorization> {
        Factorization::new(self.matrix.clone())
    }

    /// Relative σ_min of the mass-scaled operator by `iterations` steps of
    /// inverse iteration.
    pub fn sigma_min_rel(&self, fact: &Factorization, iterations: usize) -> f64 {
        smallest_singulars(fact, &self.ops.scale, 1, iterations, 0x5EED).relative()
    }

    /// Field from free values (and Dirichlet data), with the upward expansion
    /// of the whole trace.
    pub fn field(&self, x: &[C64], dir: Option<&[C64]>) -> ComplexField {
        let values = self.ops.dofs.expand(x, dir);
        let mut f = ComplexField {
            mesh: self.ops.mesh.mesh.clone(),
            values,
            alpha: self.alpha,
            representation: Representation::Periodic,
            h: self.ops.mesh.h,
            period: Some(PERIOD),
            above: None,
        };
        f.above = Some(trace_expansion(
            &self.ops,
            &f,
            self.k,
            self.dtn_order as i64,
        ));
        f
    }
}

/// Upward expansion of the trace of a periodic-factor field on x₂ = h.
pub fn trace_expansion(
    ops: &CellOperators,
    f: &ComplexField,
    k: C64,
    n_max: i64,
) -> RayleighExpansion {
    let v = f.to_periodic().values;
    let coeffs = (-n_max..=n_max)
        .map(|n| ops.top.coefficient(&v, n as f64))
        .collect();
    RayleighExpansion {
        alpha: f.alpha,
        k,
        spacing: 1.0,
        reference_height: ops.mesh.h,
        n_max,
        coeffs,
        incident: None,
    }
}

/// Load vector −2iβ₀e^{−iβ₀h}∫_{Γ_h}φ_i for the incident plane wave
/// e^{iαx₁ − iβ₀x₂}, β₀ = k cos θ.
pub fn rhs_plane_wave(mesh: &CellMesh, k: f64, theta: f64, h: f64) -> Result<Vec<C64>> {
    if (h - mesh.h).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "h = {h} differs from the mesh height {}",
            mesh.h
        )));
    }
    let ops = CellOperators::new(mesh);
    Ok(rhs_plane_wave_with(&ops, C64::new(k * theta.cos(), 0.0)))
}

pub fn rhs_plane_wave_with(ops: &CellOperators, beta0: C64) -> Vec<C64> {
    let h = ops.mesh.h;
    let pre = -2.0 * I * beta0 * (-I * beta0 * h).exp() * PERIOD;
    ops.free_moments(0).iter().map(|t| pre * t).collect()
}

/// Solves with the quick singularity check and residual control.
pub fn solve(system: &AssembledSystem, rhs: &[C64]) -> Result<ComplexField> {
    let fact = system.factor()?;
    solve_factored(system, &fact, rhs, None, true)
}

/// Solves M x = rhs − M_fd g for Dirichlet data g given per Dirichlet node.
pub fn solve_factored(
    system: &AssembledSystem,
    fact: &Factorization,
    rhs: &[C64],
    dirichlet: Option<&[C64]>,
    check: bool,
) -> Result<ComplexField> {
    if check {
        let s = system.sigma_min_rel(fact, 3);
        if s < SINGULAR_TOL {
            return Err(Error::SingularSystem {
                sigma_rel: s,
                detail: format!("k = {}, alpha = {}", system.k, system.alpha),
            });
        }
    }
    let mut b = rhs.to_vec();
    if let Some(g) = dirichlet {
        for (bi, v) in b.iter_mut().zip(system.dirichlet_block.apply(g)) {
            *bi -= v;
        }
    }
    let x = solve_refined(fact, &b)?;
    Ok(system.field(&x, dirichlet))
}

/// Direct solve plus up to two steps of iterative refinement.
pub fn solve_refined(fact: &Factorization, b: &[C64]) -> Result<Vec<C64>> {
    let mut x = fact.solve(b);
    if crate::linalg::norm2(b) == 0.0 {
        return Ok(x);
    }
    for _ in 0..2 {
        let res = fact.relative_residual(&x, b);
        if res < 1e-12 {
            break;
        }
        let ax = matvec(&fact.matrix, &x);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = fact.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    let res = fact.relative_residual(&x, b);
    if res > 1e-10 {
        return Err(Error::SingularSystem {
            sigma_rel: f64::NAN,
            detail: format!("residual {res:.3e} after refinement"),
        });
    }
    Ok(x)
}

/// Default DtN order: largest propagating index + 8.
pub fn default_order(k: f64, alpha: f64) -> usize {
    crate::wave::default_dtn_order(alpha, k)
}

/// Total field for the incident plane wave; the expansion above h holds the
/// scattered coefficients and the incident term.
pub fn solve_plane_wave(
    ops: &Arc<CellOperators>,
    wave: &WaveParams,
    dtn_order: Option<usize>,
) -> Result<ComplexField> {
    let order = dtn_order.unwrap_or_else(|| default_order(wave.k, wave.alpha()));
    let sys = assemble_with(
        ops,
        C64::new(wave.k, 0.0),
        C64::new(wave.alpha(), 0.0),
        order,
    )?;
    let rhs = rhs_plane_wave_with(ops, C64::new(wave.beta0(), 0.0));
    let mut f = solve(&sys, &rhs)?;
    f.above = Some(rayleigh_coefficients(&f, Some(C64::new(wave.beta0(), 0.0))));
    Ok(f)
}

/// Fourier coefficients of the trace on x₂ = h, minus the incident plane wave
/// when `incident_beta0` is given. Reference height is h. An expansion that
/// already carries its incident term is returned unchanged.
pub fn rayleigh_coefficients(
    field: &ComplexField,
    incident_beta0: Option<C64>,
) -> RayleighExpansion {
    let base = field
        .above
        .clone()
        .expect("cell field carries its trace expansion");
    if base.incident.is_some() {
        return base;
    }
    let mut e = base;
    e.incident = None;
    if let Some(b0) = incident_beta0 {
        let idx = e.n_max as usize;
        e.coeffs[idx] -= (-I * b0 * e.reference_height).exp();
        e.incident = Some(b0);
    }
    e
}

/// iβ_n f_n for n = −N..N.
pub fn dtn_apply(coeffs: &[C64], alpha: f64, k: f64) -> Vec<C64> {
    let n_max = (coeffs.len() as i64 - 1) / 2;
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| I * crate::wave::beta(i as i64 - n_max, alpha, k) * c)
        .collect()
}

/// |Σ_{propagating} β_n|u_n|²/β₀ − 1| for the scattered expansion.
pub fn energy_balance(expansion: &RayleighExpansion, theta: f64, k: f64) -> f64 {
    let beta0 = k * theta.cos();
    let flux: f64 = expansion
        .orders()
        .filter_map(|n| {
            let b = expansion.beta(n);
            (b.im.abs() < 1e-12 && b.re > 0.0).then(|| b.re * expansion.coefficient(n).norm_sqr())
        })
        .sum();
    (flux / beta0 - 1.0).abs()
}

/// Reflection efficiencies β_n|u_n|²/β₀ of the propagating orders.
pub fn efficiencies(expansion: &RayleighExpansion, beta0: f64) -> Vec<(i64, f64)> {
    expansion
        .orders()
        .filter_map(|n| {
            let b = expansion.beta(n);
            (b.im.abs() < 1e-12 && b.re > 0.0)
                .then(|| (n, b.re * expansion.coefficient(n).norm_sqr() / beta0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cell_mesh;
    use crate::profile::PeriodicProfile;
    use std::f64::consts::PI;

    fn flat(target: f64) -> Arc<CellOperators> {
        CellOperators::new(&build_cell_mesh(&PeriodicProfile::flat(), 1.0, target).unwrap())
    }

    #[test]
    fn flat_line_reflects_with_minus_one() {
        let ops = flat(0.1);
        let w = WaveParams::new(2.0, 0.0).unwrap();
        let f = solve_plane_wave(&ops, &w, Some(6)).unwrap();
        let e = f.above.as_ref().unwrap();
        assert!(
            (e.coefficient_at(0, 0.0) + 1.0).norm() < 1e-2,
            "{}",
            e.coefficient_at(0, 0.0)
        );
        assert_eq!(f.max_on_gamma(), 0.0);
        // Above h the expansion reproduces e^{−2ix₂} − e^{2ix₂} to discretisation accuracy.
        let p = [1.0, 1.7];
        let exact = (C64::new(0.0, -2.0 * p[1])).exp() - (C64::new(0.0, 2.0 * p[1])).exp();
        assert!((f.evaluate_point(p).unwrap() - exact).norm() < 2e-2);
        assert!(energy_balance(e, 0.0, 2.0) < 2e-2);
    }

    #[test]
    fn transpose_identity() {
        let ops = CellOperators::new(
            &build_cell_mesh(&PeriodicProfile::sine(0.3).unwrap(), 1.2, 0.4).unwrap(),
        );
        let a = assemble_with(&ops, C64::new(1.5, 0.0), C64::new(0.3, 0.0), 8).unwrap();
        let b = assemble_with(&ops, C64::new(1.5, 0.0), C64::new(-0.3, 0.0), 8).unwrap();
        let n = ops.n_free();
        let mut max: f64 = 0.0;
        let mut diff: f64 = 0.0;
        for j in (0..n).step_by(7) {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            let col_a = a.triplets.apply(&e);
            let row_b = crate::linalg::matvec_adjoint(&b.matrix, &e);
            for (x, y) in col_a.iter().zip(&row_b) {
                max = max.max(x.norm());
                diff = diff.max((x - y.conj()).norm());
            }
        }
        assert!(diff < 1e-12 * max, "{diff} vs {max}");
    }

    #[test]
    fn dtn_examples() {
        let mut c = vec![C64::new(0.0, 0.0); 7];
        c[4] = C64::new(1.0, 0.0);
        c[5] = C64::new(1.0, 0.0);
        c[6] = C64::new(1.0, 0.0);
        let d = dtn_apply(&c, 0.0, 2.0);
        assert!((d[4] - C64::new(0.0, 3f64.sqrt())).norm() < 1e-15);
        assert_eq!(d[5], C64::new(0.0, 0.0));
        assert!((d[6] + 5f64.sqrt()).norm() < 1e-15);
    }

    #[test]
    fn rhs_has_only_mode_zero() {
        let m = build_cell_mesh(&PeriodicProfile::flat(), 1.0, 0.25).unwrap();
        let ops = CellOperators::new(&m);
        let f = rhs_plane_wave(&m, 2.0, 0.0, 1.0).unwrap();
        // Σ_i f_i conj(t_n[i]) picks the trace mode n of the load.
        for n in -3i64..=3 {
            let t = ops.free_moments(n);
            let s: C64 = f.iter().zip(&t).map(|(a, b)| a * b.conj()).sum();
            let t0 = ops.free_moments(0);
            let norm: f64 = t0.iter().map(|v| v.norm_sqr()).sum();
            let want = if n == 0 {
                -4.0 * I * (C64::new(0.0, -2.0)).exp() * PERIOD * norm
            } else {
                C64::new(0.0, 0.0)
            };
            assert!((s - want).norm() < 1e-12, "n = {n}: {s} vs {want}");
        }
        assert!(rhs_plane_wave(&m, 2.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn zero_rhs_gives_zero_field() {
        let ops = flat(0.4);
        let sys = assemble_with(&ops, C64::new(1.3, 0.0), C64::new(0.1, 0.0), 8).unwrap();
        let f = solve(&sys, &vec![C64::new(0.0, 0.0); ops.n_free()]).unwrap();
        assert!(f.values.iter().all(|v| *v == C64::new(0.0, 0.0)));
    }

    #[test]
    fn dtn_order_increase_is_inactive_on_flat_line() {
        let ops = flat(0.3);
        let w = WaveParams::new(2.0, 0.0).unwrap();
        let a = solve_plane_wave(&ops, &w, Some(6)).unwrap();
        let b = solve_plane_wave(&ops, &w, Some(12)).unwrap();
        let d = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(d < 1e-12, "{d}");
        assert!(check_dtn_order(2.0, 0.0, 3).is_err());
        let _ = PI;
    }
}
