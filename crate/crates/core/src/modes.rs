//! Detection of propagative wave numbers (guided modes) by smallest singular
//! values of the cell operator, mode extraction, and the Hermitian
//! group-velocity eigenproblem B φ̂ = λ (φ̂, ·).

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ComplexField, RayleighExpansion, Representation};
use crate::linalg::{dot, generalized_hermitian, smallest_singulars, Dense};
use crate::qpsolver::{assemble_with, trace_expansion, CellOperators};
use crate::wave::{is_cutoff, PERIOD};
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Inner product on the mode space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerProduct {
    L2Cell,
    H1Cell,
}

/// Scaled σ_min (lumped-mass scaling) and its ratio to the norm bound.
#[derive(Debug, Clone, Copy)]
pub struct SigmaMin {
    pub sigma: f64,
    pub relative: f64,
}

/// σ_min of the cell operator at (α, k) by inverse iteration through the LU.
pub fn smallest_singular(
    alpha: f64,
    k: f64,
    ops: &Arc<CellOperators>,
    dtn_order: usize,
) -> Result<SigmaMin> {
    smallest_singular_c(C64::new(alpha, 0.0), C64::new(k, 0.0), ops, dtn_order, 8)
}

pub fn smallest_singular_c(
    alpha: C64,
    k: C64,
    ops: &Arc<CellOperators>,
    dtn_order: usize,
    iterations: usize,
) -> Result<SigmaMin> {
    let sys = assemble_with(ops, k, alpha, dtn_order)?;
    let fact = sys.factor()?;
    let e = smallest_singulars(&fact, &ops.scale, 1, iterations, 0x5EED);
    Ok(SigmaMin {
        sigma: e.sigma[0],
        relative: e.relative(),
    })
}

/// Near-null vectors at (α, k): the `count` smallest singular values and
/// right singular vectors as periodic-factor fields.
pub fn null_space(
    alpha: f64,
    k: f64,
    ops: &Arc<CellOperators>,
    dtn_order: usize,
    count: usize,
) -> Result<(Vec<f64>, f64, Vec<ComplexField>)> {
    let sys = assemble_with(ops, C64::new(k, 0.0), C64::new(alpha, 0.0), dtn_order)?;
    let fact = sys.factor()?;
    let e = smallest_singulars(&fact, &ops.scale, count, 40, 0x5EED);
    let fields = e
        .vectors
        .iter()
        .map(|v| mode_field(ops, &sys_field_values(ops, v), alpha, k, dtn_order))
        .collect();
    Ok((e.sigma.clone(), e.sigma_max_bound, fields))
}

fn sys_field_values(ops: &CellOperators, x: &[C64]) -> Vec<C64> {
    ops.dofs.expand(x, None)
}

/// Periodic-factor field with its upward expansion.
pub fn mode_field(
    ops: &CellOperators,
    values: &[C64],
    alpha: f64,
    k: f64,
    dtn_order: usize,
) -> ComplexField {
    let mut f = ComplexField {
        mesh: ops.mesh.mesh.clone(),
        values: values.to_vec(),
        alpha: C64::new(alpha, 0.0),
        representation: Representation::Periodic,
        h: ops.mesh.h,
        period: Some(PERIOD),
        above: None,
    };
    f.above = Some(trace_expansion(ops, &f, C64::new(k, 0.0), dtn_order as i64));
    f
}

/// Mode at −α: the complex conjugate of u.
pub fn conjugate_mode(ops: &CellOperators, f: &ComplexField, k: f64) -> ComplexField {
    let p = f.to_periodic();
    let vals: Vec<C64> = p.values.iter().map(|v| v.conj()).collect();
    let n = p.above.as_ref().map_or(8, |e| e.n_max as usize);
    mode_field(ops, &vals, -p.alpha.re, k, n)
}

/// Norm of the propagating Rayleigh coefficients relative to all coefficients.
pub fn propagating_content(e: &RayleighExpansion) -> f64 {
    let (mut prop, mut all) = (0.0, 0.0);
    for n in e.orders() {
        let c = e.coefficient(n).norm_sqr();
        all += c;
        if e.beta(n).im <= 1e-12 * e.k.norm() {
            prop += c;
        }
    }
    if all == 0.0 {
        0.0
    } else {
        (prop / all).sqrt()
    }
}

/// Fitted exponential decay rate of sup_x |u(x₁, x₂)| for x₂ in the upper
/// half of [h0, h1], from the upward expansion.
pub fn decay_test(mode: &ComplexField, h0: f64, h1: f64) -> f64 {
    let Some(e) = &mode.above else { return 0.0 };
    let heights: Vec<f64> = (0..=16)
        .map(|i| 0.5 * (h0 + h1) + 0.5 * (h1 - h0) * i as f64 / 16.0)
        .collect();
    let logs: Vec<f64> = heights
        .iter()
        .map(|&y| {
            let s = (0..64)
                .map(|j| e.evaluate([PERIOD * j as f64 / 64.0, y]).norm())
                .fold(0.0, f64::max);
            s.max(1e-300).ln()
        })
        .collect();
    let n = heights.len() as f64;
    let my = heights.iter().sum::<f64>() / n;
    let ml = logs.iter().sum::<f64>() / n;
    let sxy: f64 = heights
        .iter()
        .zip(&logs)
        .map(|(y, l)| (y - my) * (l - ml))
        .sum();
    let sxx: f64 = heights.iter().map(|y| (y - my).powi(2)).sum();
    -sxy / sxx
}

fn u_pair(f: &ComplexField) -> (Vec<C64>, C64) {
    (f.to_periodic().values, f.alpha)
}

fn tail_check(f: &ComplexField) -> Result<&RayleighExpansion> {
    let e = f
        .above
        .as_ref()
        .ok_or(Error::NonDecaying { content: f64::NAN })?;
    let rate = decay_test(f, f.h, f.h + 4.0);
    if !(rate > 0.0) {
        return Err(Error::NonDecaying {
            content: propagating_content(e),
        });
    }
    Ok(e)
}

/// Σ over evanescent orders of w_n φ_n conj(ψ_n) · 2π/(2|β_n|).
fn tail_sum(a: &RayleighExpansion, b: &RayleighExpansion, w: &dyn Fn(i64, f64) -> f64) -> C64 {
    a.orders()
        .filter_map(|n| {
            let beta = a.beta(n);
            (beta.im > 1e-12).then(|| {
                let d = beta.im;
                a.coefficient(n) * b.coefficient(n).conj() * (PERIOD / (2.0 * d)) * w(n, d)
            })
        })
        .sum()
}

/// B(φ, ψ) = −2i ∫_{Q_∞} ∂₁φ conj(ψ): cell quadrature plus the closed-form
/// evanescent tail above h.
pub fn b_form(ops: &CellOperators, phi: &ComplexField, psi: &ComplexField) -> Result<C64> {
    let ea = tail_check(phi)?;
    let eb = tail_check(psi)?;
    Ok(b_form_unchecked(ops, phi, psi, ea, eb))
}

fn b_form_unchecked(
    ops: &CellOperators,
    phi: &ComplexField,
    psi: &ComplexField,
    ea: &RayleighExpansion,
    eb: &RayleighExpansion,
) -> C64 {
    let (vp, alpha) = u_pair(phi);
    let (vq, _) = u_pair(psi);
    let cv = ops.forms.c.apply(&vp);
    let mv = ops.forms.mass.apply(&vp);
    let d1: Vec<C64> = cv.iter().zip(&mv).map(|(c, m)| c + I * alpha * m).collect();
    let cell = dot(&vq, &d1);
    let tail = tail_sum(ea, eb, &|n, _| n as f64 + alpha.re);
    // ∂₁φ = i(n+α)φ_n per order above h
    -2.0 * I * cell + 2.0 * tail
}

/// ∫_{Q_∞} φ conj(ψ) (L²) or ∫ ∇φ·∇ψ̄ + φψ̄ (H¹), with closed-form tails.
pub fn inner(
    ops: &CellOperators,
    phi: &ComplexField,
    psi: &ComplexField,
    kind: InnerProduct,
) -> C64 {
    let (vp, alpha) = u_pair(phi);
    let (vq, _) = u_pair(psi);
    let mut cell = dot(&vq, &ops.forms.mass.apply(&vp));
    if kind == InnerProduct::H1Cell {
        let a = alpha;
        let kv = ops.forms.k.apply(&vp);
        let cv = ops.forms.c.apply(&vp);
        let mv = ops.forms.mass.apply(&vp);
        // ∫ v_φ ∂₁conj(v_ψ) = conj(v_ψ)ᵀ Cᵀ v_φ = (C conj(v_ψ))ᵀ v_φ
        let cq = ops
            .forms
            .c
            .apply(&vq.iter().map(|v| v.conj()).collect::<Vec<_>>());
        let ct: C64 = cq.iter().zip(&vp).map(|(x, y)| x * y).sum();
        cell += dot(&vq, &kv) - I * a * dot(&vq, &cv) + I * a * ct + a * a * dot(&vq, &mv);
    }
    let tail = match (&phi.above, &psi.above) {
        (Some(ea), Some(eb)) => match kind {
            InnerProduct::L2Cell => tail_sum(ea, eb, &|_, _| 1.0),
            InnerProduct::H1Cell => {
                tail_sum(ea, eb, &|n, d| 1.0 + (n as f64 + alpha.re).powi(2) + d * d)
            }
        },
        _ => C64::new(0.0, 0.0),
    };
    cell + tail
}

/// Outcome of the mode eigenproblem without the Assumption 2 verdict applied.
#[derive(Debug, Clone)]
pub struct ModePencil {
    /// Eigenvalues, descending.
    pub lambdas: Vec<f64>,
    pub modes: Vec<ComplexField>,
    /// max_ℓ 2‖∂₁φ̂_ℓ‖‖φ̂_ℓ‖, the Cauchy–Schwarz bound of |B| on the basis.
    pub scale: f64,
    /// Largest |B_ij − conj(B_ji)| relative to max |B_ij|.
    pub hermitian_defect: f64,
}

impl ModePencil {
    /// Assumption 2 holds when every |λ| exceeds `tol` times the scale.
    pub fn nondegenerate(&self, tol: f64) -> bool {
        self.lambdas.iter().all(|l| l.abs() >= tol * self.scale)
    }
}

/// Generalized Hermitian eigenproblem on the span of `raw_basis` without the
/// decay check or degeneracy verdict.
pub fn mode_pencil(
    ops: &CellOperators,
    raw_basis: &[ComplexField],
    kind: InnerProduct,
) -> Result<ModePencil> {
    let m = raw_basis.len();
    if m == 0 {
        return Ok(ModePencil {
            lambdas: Vec::new(),
            modes: Vec::new(),
            scale: 0.0,
            hermitian_defect: 0.0,
        });
    }
    let zero = RayleighExpansion {
        alpha: raw_basis[0].alpha,
        k: C64::new(1.0, 0.0),
        spacing: 1.0,
        reference_height: raw_basis[0].h,
        n_max: 0,
        coeffs: vec![C64::new(0.0, 0.0)],
        incident: None,
    };
    let exp: Vec<&RayleighExpansion> = raw_basis
        .iter()
        .map(|f| f.above.as_ref().unwrap_or(&zero))
        .collect();
    // b[i][j] = B(φ_j, φ_i), g[i][j] = (φ_j, φ_i)
    let b: Dense = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| b_form_unchecked(ops, &raw_basis[j], &raw_basis[i], exp[j], exp[i]))
                .collect()
        })
        .collect();
    let g: Dense = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| inner(ops, &raw_basis[j], &raw_basis[i], kind))
                .collect()
        })
        .collect();
    let bmax = b.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
    let defect = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| (b[i][j] - b[j][i].conj()).norm())
        .fold(0.0, f64::max);
    let (vals, vecs) = generalized_hermitian(&b, &g)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&p, &q| vals[q].total_cmp(&vals[p]));
    let mut lambdas = Vec::new();
    let mut modes = Vec::new();
    let mut scale: f64 = 0.0;
    for idx in order {
        let x = &vecs[idx];
        let mut f = raw_basis[0].to_periodic();
        for v in f.values.iter_mut() {
            *v = C64::new(0.0, 0.0);
        }
        let mut coeffs = exp[0]
            .coeffs
            .iter()
            .map(|_| C64::new(0.0, 0.0))
            .collect::<Vec<_>>();
        for (c, phi) in x.iter().zip(raw_basis) {
            let p = phi.to_periodic();
            for (a, b) in f.values.iter_mut().zip(&p.values) {
                *a += c * b;
            }
            if let Some(e) = &phi.above {
                for (a, b) in coeffs.iter_mut().zip(&e.coeffs) {
                    *a += c * b;
                }
            }
        }
        if let Some(e) = f.above.as_mut() {
            e.coeffs = coeffs;
        }
        let vp = f.values.clone();
        let d1: Vec<C64> = ops
            .forms
            .c
            .apply(&vp)
            .iter()
            .zip(ops.forms.mass.apply(&vp))
            .map(|(c, m)| c + I * f.alpha * m)
            .collect();
        let lm = lumped_norm_sq(ops, &d1);
        let nrm = inner(ops, &f, &f, InnerProduct::L2Cell).re.max(0.0);
        scale = scale.max(2.0 * lm.sqrt() * nrm.sqrt());
        lambdas.push(vals[idx]);
        modes.push(f);
    }
    Ok(ModePencil {
        lambdas,
        modes,
        scale,
        hermitian_defect: if bmax > 0.0 { defect / bmax } else { 0.0 },
    })
}

/// ‖w‖² where w holds the load-vector moments ∫ g φ_i of a function g:
/// approximated with the lumped mass, ∫|g|² ≈ Σ |w_i|²/m_i.
fn lumped_norm_sq(ops: &CellOperators, w: &[C64]) -> f64 {
    w.iter()
        .zip(&ops.forms.lumped)
        .map(|(v, m)| if *m > 0.0 { v.norm_sqr() / m } else { 0.0 })
        .sum()
}

/// Mode eigenproblem with the decay check; errors with DegenerateForm when
/// some |λ| falls below `tol` times the Cauchy–Schwarz scale.
pub fn mode_eigenproblem(
    ops: &CellOperators,
    raw_basis: &[ComplexField],
    kind: InnerProduct,
    tol: f64,
) -> Result<(Vec<f64>, Vec<ComplexField>)> {
    for f in raw_basis {
        tail_check(f)?;
    }
    let p = mode_pencil(ops, raw_basis, kind)?;
    if let Some(l) = p.lambdas.iter().find(|l| l.abs() < tol * p.scale) {
        return Err(Error::DegenerateForm { lambda: *l });
    }
    Ok((p.lambdas, p.modes))
}

/// One detected propagative wave number.
#[derive(Debug, Clone)]
pub struct PropagativeWavenumber {
    pub alpha_hat: f64,
    pub multiplicity: usize,
    pub modes: Vec<ComplexField>,
    pub lambdas: Vec<f64>,
    /// (α, σ_min) samples around the dip, including the refinement.
    pub sigma_min_history: Vec<(f64, f64)>,
    /// Relative residuals σ/σ_max of the extracted vectors.
    pub residuals: Vec<f64>,
    pub decay_rates: Vec<f64>,
    pub propagating_content: Vec<f64>,
    /// Assumption 2 (all λ nonzero).
    pub nondegenerate: bool,
}

#[derive(Debug, Clone)]
pub struct PropagativeSet {
    pub entries: Vec<PropagativeWavenumber>,
    pub k: f64,
    pub symmetric: bool,
}

/// A dip that failed certification.
#[derive(Debug, Clone)]
pub struct RejectedCandidate {
    pub alpha: f64,
    pub sigma_rel: f64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub table: Vec<(f64, f64)>,
    pub set: PropagativeSet,
    pub rejected: Vec<RejectedCandidate>,
}

/// Certificate thresholds for a scan.
#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub residual_tol: f64,
    pub content_tol: f64,
    pub degeneracy_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-8,
            content_tol: 1e-8,
            degeneracy_tol: 1e-8,
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Golden-section minimisation of f on [a, b] down to `width`.
pub fn golden_section(
    f: &dyn Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    width: f64,
    history: &mut Vec<(f64, f64)>,
) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    history.push((c, fc));
    history.push((d, fd));
    while b - a > width {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
            history.push((c, fc));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
            history.push((d, fd));
        }
    }
    0.5 * (a + b)
}

/// Scans α ∈ [−1/2, 1/2] for dips of σ_min, refines, extracts and certifies modes.
pub fn scan_propagative(
    k: f64,
    ops: &Arc<CellOperators>,
    grid_size: usize,
    dip_factor: f64,
    dtn_order: usize,
) -> Result<ScanResult> {
    scan_propagative_with(
        k,
        ops,
        grid_size,
        dip_factor,
        dtn_order,
        ScanOptions::default(),
    )
}

pub fn scan_propagative_with(
    k: f64,
    ops: &Arc<CellOperators>,
    grid_size: usize,
    dip_factor: f64,
    dtn_order: usize,
    opts: ScanOptions,
) -> Result<ScanResult> {
    if grid_size < 64 {
        return Err(Error::InvalidParameter(
            "grid_size must be at least 64".into(),
        ));
    }
    if !(dip_factor > 1.0) {
        return Err(Error::InvalidParameter("dip_factor must exceed 1".into()));
    }
    let alphas: Vec<f64> = (0..grid_size)
        .map(|i| -0.5 + i as f64 / (grid_size - 1) as f64)
        .collect();
    let sig: Vec<Result<f64>> = alphas
        .par_iter()
        .map(|&a| smallest_singular(a, k, ops, dtn_order).map(|s| s.relative))
        .collect();
    let sig: Vec<f64> = sig.into_iter().collect::<Result<_>>()?;
    let table: Vec<(f64, f64)> = alphas.iter().copied().zip(sig.iter().copied()).collect();

    let w = 4usize;
    let mut candidates = Vec::new();
    for i in 0..grid_size {
        let lo = i.saturating_sub(w);
        let hi = (i + w + 1).min(grid_size);
        let is_min = (lo..hi).all(|j| sig[j] >= sig[i]);
        let mut window: Vec<f64> = (lo..hi).map(|j| sig[j]).collect();
        let med = median(&mut window);
        if is_min && sig[i] * dip_factor < med {
            candidates.push((i, med));
        }
    }

    let mut entries: Vec<PropagativeWavenumber> = Vec::new();
    let mut rejected = Vec::new();
    for (i, med) in candidates {
        let a = alphas[i.saturating_sub(1)];
        let b = alphas[(i + 1).min(grid_size - 1)];
        let mut history: Vec<(f64, f64)> = (i.saturating_sub(w)..(i + w + 1).min(grid_size))
            .map(|j| (alphas[j], sig[j]))
            .collect();
        let f = |al: f64| {
            smallest_singular(al, k, ops, dtn_order)
                .map(|s| s.relative)
                .unwrap_or(f64::INFINITY)
        };
        let ahat = golden_section(&f, a, b, 1e-10, &mut history);
        if is_cutoff(ahat, k, 1e-6 * k) {
            return Err(Error::CutoffCollision { alpha: ahat });
        }
        if entries.iter().any(|e| (e.alpha_hat - ahat).abs() < 1e-6) {
            continue;
        }
        let (sigma, smax, fields) = null_space(ahat, k, ops, dtn_order, 3)?;
        let rel: Vec<f64> = sigma.iter().map(|s| s / smax).collect();
        let m = rel.iter().filter(|s| **s * dip_factor < med).count().max(1);
        let fields: Vec<ComplexField> = fields.into_iter().take(m).collect();
        let residuals: Vec<f64> = rel.iter().take(m).copied().collect();
        let content: Vec<f64> = fields
            .iter()
            .map(|f| propagating_content(f.above.as_ref().unwrap()))
            .collect();
        let rates: Vec<f64> = fields
            .iter()
            .map(|f| decay_test(f, ops.mesh.h, ops.mesh.h + 4.0))
            .collect();
        if residuals.iter().any(|r| *r > opts.residual_tol) {
            rejected.push(RejectedCandidate {
                alpha: ahat,
                sigma_rel: rel[0],
                reason: format!("residual {:.3e}", residuals[0]),
            });
            continue;
        }
        if content.iter().any(|c| *c > opts.content_tol) || rates.iter().any(|r| !(*r > 0.0)) {
            rejected.push(RejectedCandidate {
                alpha: ahat,
                sigma_rel: rel[0],
                reason: format!("not evanescent (propagating content {:.3e})", content[0]),
            });
            continue;
        }
        let p = mode_pencil(ops, &fields, InnerProduct::L2Cell)?;
        entries.push(PropagativeWavenumber {
            alpha_hat: ahat,
            multiplicity: m,
            nondegenerate: p.nondegenerate(opts.degeneracy_tol),
            modes: p.modes,
            lambdas: p.lambdas,
            sigma_min_history: history,
            residuals,
            decay_rates: rates,
            propagating_content: content,
        });
    }
    // Enforce ±α pairing with conjugated modes.
    let mut paired: Vec<PropagativeWavenumber> = Vec::new();
    for e in entries {
        if paired
            .iter()
            .any(|p| (p.alpha_hat - e.alpha_hat).abs() < 1e-6)
        {
            continue;
        }
        let mirror = if e.alpha_hat.abs() > 1e-9 {
            let modes: Vec<ComplexField> =
                e.modes.iter().map(|f| conjugate_mode(ops, f, k)).collect();
            let p = mode_pencil(ops, &modes, InnerProduct::L2Cell)?;
            Some(PropagativeWavenumber {
                alpha_hat: -e.alpha_hat,
                multiplicity: e.multiplicity,
                nondegenerate: e.nondegenerate,
                modes: p.modes,
                lambdas: p.lambdas,
                sigma_min_history: e.sigma_min_history.iter().map(|(a, s)| (-a, *s)).collect(),
                residuals: e.residuals.clone(),
                decay_rates: e.decay_rates.clone(),
                propagating_content: e.propagating_content.clone(),
            })
        } else {
            None
        };
        paired.push(e);
        if let Some(m) = mirror {
            paired.retain(|p| (p.alpha_hat - m.alpha_hat).abs() >= 1e-6);
            paired.push(m);
        }
    }
    paired.sort_by(|a, b| a.alpha_hat.total_cmp(&b.alpha_hat));
    Ok(ScanResult {
        table,
        set: PropagativeSet {
            entries: paired,
            k,
            symmetric: true,
        },
        rejected,
    })
}

/// Sum of two evanescent orders as a field above h (for decay checks).
pub fn expansion_field(ops: &CellOperators, e: RayleighExpansion) -> ComplexField {
    ComplexField {
        mesh: ops.mesh.mesh.clone(),
        values: vec![C64::new(0.0, 0.0); ops.mesh.mesh.nodes.len()],
        alpha: e.alpha,
        representation: Representation::Periodic,
        h: ops.mesh.h,
        period: Some(PERIOD),
        above: Some(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cell_mesh;
    use crate::profile::PeriodicProfile;

    fn ops() -> Arc<CellOperators> {
        CellOperators::new(&build_cell_mesh(&PeriodicProfile::flat(), 1.0, 0.4).unwrap())
    }

    fn single(
        ops: &CellOperators,
        n: i64,
        alpha: f64,
        k: f64,
        coeffs: &[(i64, f64)],
    ) -> ComplexField {
        let n_max = n;
        let mut c = vec![C64::new(0.0, 0.0); (2 * n_max + 1) as usize];
        for &(m, v) in coeffs {
            c[(m + n_max) as usize] = C64::new(v, 0.0);
        }
        expansion_field(
            ops,
            RayleighExpansion {
                alpha: C64::new(alpha, 0.0),
                k: C64::new(k, 0.0),
                spacing: 1.0,
                reference_height: 1.0,
                n_max,
                coeffs: c,
                incident: None,
            },
        )
    }

    #[test]
    fn decay_rates() {
        let o = ops();
        let f = single(&o, 4, 0.0, 1.5, &[(3, 1.0)]);
        assert!((decay_test(&f, 1.0, 5.0) - (9.0f64 - 2.25).sqrt()).abs() < 1e-10);
        let g = single(&o, 4, 0.0, 1.5, &[(0, 1.0)]);
        assert!(decay_test(&g, 1.0, 5.0) <= 1e-12);
        // two evanescent orders: the slower one dominates
        let two = single(&o, 4, 0.0, 1.5, &[(2, 1.0), (4, 1.0)]);
        let r = decay_test(&two, 1.0, 21.0);
        assert!((r - (4.0f64 - 2.25).sqrt()).abs() < 1e-6, "{r}");
    }

    #[test]
    fn flat_line_has_no_dips() {
        let o = ops();
        let r = scan_propagative(1.3, &o, 64, 100.0, 9).unwrap();
        assert!(r.set.entries.is_empty());
        let s = r.table.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        assert!(s > 1e-4, "{s}");
    }

    #[test]
    fn sigma_symmetric_in_alpha() {
        let o = CellOperators::new(
            &build_cell_mesh(&PeriodicProfile::sine(0.5).unwrap(), 1.2, 0.4).unwrap(),
        );
        let a = smallest_singular(0.21, 1.7, &o, 9).unwrap().sigma;
        let b = smallest_singular(-0.21, 1.7, &o, 9).unwrap().sigma;
        assert!((a - b).abs() < 1e-8 * a.max(1e-12), "{a} {b}");
    }

    #[test]
    fn golden_section_finds_minimum() {
        let mut h = Vec::new();
        let x = golden_section(&|x: f64| (x - 0.123).powi(2), -0.5, 0.5, 1e-10, &mut h);
        assert!((x - 0.123).abs() < 1e-9);
    }
}
