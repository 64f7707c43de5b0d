//! Limiting absorption (k → k + iε) and the orthogonality-constraint system
//! that selects the physical solution at a propagative wave number.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Representation};
use crate::linalg::{condition_number, dense_solve, dot, norm2, Dense};
use crate::modes::{inner, InnerProduct, PropagativeWavenumber};
use crate::qpsolver::{
    assemble_with, beta_complex, rayleigh_coefficients, rhs_plane_wave_with, solve_factored,
    trace_expansion, CellOperators,
};
use crate::wave::{is_cutoff, CUTOFF_REL_TOL, PERIOD};
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// (k + iε, (k + iε) sin θ, (k + iε) cos θ).
pub fn absorbing_params(k: f64, eps: f64, theta: f64) -> (C64, C64, C64) {
    let ke = C64::new(k, eps);
    (ke, ke * theta.sin(), ke * theta.cos())
}

/// Total field of the plane-wave problem at the complex wavenumber k + iε.
pub fn solve_absorbing(
    ops: &Arc<CellOperators>,
    k: f64,
    eps: f64,
    theta: f64,
    dtn_order: usize,
) -> Result<ComplexField> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {eps}"
        )));
    }
    let (ke, ae, b0) = absorbing_params(k, eps, theta);
    let sys = assemble_with(ops, ke, ae, dtn_order)?;
    let fact = sys.factor()?;
    let rhs = rhs_plane_wave_with(ops, b0);
    let mut f = solve_factored(&sys, &fact, &rhs, None, false)?;
    f.above = Some(rayleigh_coefficients(&f, Some(b0)));
    Ok(f)
}

/// ε_m = 0.1·2^{−m}, m = 0..10.
pub fn default_schedule() -> Vec<f64> {
    (0..=10).map(|m| 0.1 * 0.5f64.powi(m)).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct LapOptions {
    /// Polynomial degree of the extrapolation in ε (1 = two-point Richardson).
    pub degree: usize,
    /// Largest accepted relative change between the last two extrapolants.
    pub tol: f64,
}

impl Default for LapOptions {
    fn default() -> Self {
        Self {
            degree: 1,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LapResult {
    pub field: ComplexField,
    pub eps: Vec<f64>,
    /// Lumped L² norm of each absorbing solution.
    pub norms: Vec<f64>,
    /// Relative distance of each absorbing solution to the limit.
    pub distances: Vec<f64>,
    /// Relative change between the last two extrapolants.
    pub diagnostic: f64,
    /// Fitted exponent p in distance ~ ε^p over the schedule's tail.
    pub rate: f64,
}

fn lagrange_at_zero(eps: &[f64]) -> Vec<f64> {
    (0..eps.len())
        .map(|i| {
            (0..eps.len())
                .filter(|&j| j != i)
                .map(|j| eps[j] / (eps[j] - eps[i]))
                .product()
        })
        .collect()
}

fn combine(vals: &[&Vec<C64>], w: &[f64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); vals[0].len()];
    for (v, wi) in vals.iter().zip(w) {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += x * wi;
        }
    }
    out
}

fn lumped_norm(ops: &CellOperators, v: &[C64]) -> f64 {
    v.iter()
        .zip(&ops.forms.lumped)
        .map(|(x, m)| x.norm_sqr() * m)
        .sum::<f64>()
        .sqrt()
}

pub fn lap_limit(
    ops: &Arc<CellOperators>,
    k: f64,
    theta: f64,
    schedule: &[f64],
    dtn_order: usize,
) -> Result<LapResult> {
    lap_limit_with(ops, k, theta, schedule, dtn_order, LapOptions::default())
}

/// Extrapolates the absorbing solutions along the schedule to ε = 0.
pub fn lap_limit_with(
    ops: &Arc<CellOperators>,
    k: f64,
    theta: f64,
    schedule: &[f64],
    dtn_order: usize,
    opts: LapOptions,
) -> Result<LapResult> {
    if schedule.is_empty()
        || schedule.windows(2).any(|w| !(w[1] < w[0]))
        || schedule.iter().any(|e| !(*e > 0.0))
    {
        return Err(Error::InvalidParameter(
            "schedule must be positive and strictly decreasing".into(),
        ));
    }
    let alpha = k * theta.sin();
    if is_cutoff(alpha, k, CUTOFF_REL_TOL * k) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} is a cut-off value"
        )));
    }
    let sols: Vec<Result<ComplexField>> = schedule
        .par_iter()
        .map(|&e| solve_absorbing(ops, k, e, theta, dtn_order))
        .collect();
    let sols: Vec<ComplexField> = sols.into_iter().collect::<Result<_>>()?;
    // Periodic factors at complex α; the phase e^{−iα_ε x₁} tends to e^{−iαx₁}.
    let vals: Vec<Vec<C64>> = sols.iter().map(|f| f.to_periodic().values).collect();
    let n = schedule.len();
    let d = opts.degree.min(n - 1);
    let extrap = |end: usize| -> Vec<C64> {
        let lo = end + 1 - (d + 1);
        let w = lagrange_at_zero(&schedule[lo..=end]);
        let refs: Vec<&Vec<C64>> = vals[lo..=end].iter().collect();
        combine(&refs, &w)
    };
    let limit = extrap(n - 1);
    let lnorm = lumped_norm(ops, &limit).max(f64::MIN_POSITIVE);
    let diagnostic = if n > d + 1 {
        let prev = extrap(n - 2);
        let diff: Vec<C64> = limit.iter().zip(&prev).map(|(a, b)| a - b).collect();
        lumped_norm(ops, &diff) / lnorm
    } else {
        0.0
    };
    let distances: Vec<f64> = vals
        .iter()
        .map(|v| {
            let diff: Vec<C64> = v.iter().zip(&limit).map(|(a, b)| a - b).collect();
            lumped_norm(ops, &diff) / lnorm
        })
        .collect();
    let rate = if n >= 3 {
        let tail = n.saturating_sub(5).min(n - 3);
        let xs: Vec<f64> = schedule[tail..n - 1].iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = distances[tail..n - 1]
            .iter()
            .map(|d| d.max(1e-300).ln())
            .collect();
        fit_slope(&xs, &ys)
    } else {
        f64::NAN
    };
    if diagnostic > opts.tol {
        return Err(Error::NoConvergence(format!(
            "successive extrapolants differ by {diagnostic:.3e} (possible cut-off collision)"
        )));
    }
    let mut field = ComplexField {
        mesh: ops.mesh.mesh.clone(),
        values: limit,
        alpha: C64::new(alpha, 0.0),
        representation: Representation::Periodic,
        h: ops.mesh.h,
        period: Some(PERIOD),
        above: None,
    };
    field.above = Some(trace_expansion(
        ops,
        &field,
        C64::new(k, 0.0),
        dtn_order as i64,
    ));
    field.above = Some(rayleigh_coefficients(
        &field,
        Some(C64::new(k * theta.cos(), 0.0)),
    ));
    let norms = vals.iter().map(|v| lumped_norm(ops, v)).collect();
    Ok(LapResult {
        field,
        eps: schedule.to_vec(),
        norms,
        distances,
        diagnostic,
        rate,
    })
}

/// Least-squares slope.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn same_alpha(u: &ComplexField, phi: &ComplexField) -> Result<()> {
    if (u.alpha - phi.alpha).norm() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "field quasi-momentum {} differs from the mode's {}",
            u.alpha, phi.alpha
        )));
    }
    Ok(())
}

/// ∫_{Q_∞} (sin θ ∂₁u − iku) conj(φ): cell quadrature plus the closed-form
/// tail over the evanescent orders of φ.
pub fn oc_moment(
    ops: &CellOperators,
    u: &ComplexField,
    phi: &ComplexField,
    theta: f64,
    k: f64,
) -> Result<C64> {
    same_alpha(u, phi)?;
    let vu = u.to_periodic().values;
    let vp = phi.to_periodic().values;
    let alpha = u.alpha;
    let cu = ops.forms.c.apply(&vu);
    let mu = ops.forms.mass.apply(&vu);
    let s = theta.sin();
    let w: Vec<C64> = cu
        .iter()
        .zip(&mu)
        .map(|(c, m)| s * (c + I * alpha * m) - I * k * m)
        .collect();
    let mut total = dot(&vp, &w);
    if let (Some(eu), Some(ep)) = (&u.above, &phi.above) {
        for n in ep.orders() {
            let beta = ep.beta(n);
            if beta.im > 1e-12 {
                let xi = alpha.re + n as f64;
                let weight = s * I * xi - I * k;
                total += weight
                    * eu.coefficient(n)
                    * ep.coefficient(n).conj()
                    * (PERIOD / (2.0 * beta.im));
            }
        }
    }
    Ok(total)
}

/// A, Bm, Y and the coefficients C of the orthogonality constraint.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    /// Diagonal of A: (i/2) sin θ λ_ℓ.
    pub a: Vec<C64>,
    /// b_{ℓℓ'} = ik ∫ φ̂_{ℓ'} conj(φ̂_ℓ).
    pub bm: Dense,
    /// y_ℓ = ∫ (sin θ ∂₁u₀ − iku₀) conj(φ̂_ℓ).
    pub y: Vec<C64>,
    /// Solution of (A − Bm) C = −Y.
    pub c: Vec<C64>,
    pub condition: f64,
    pub residual: f64,
}

impl ConstraintSystem {
    pub fn matrix(&self) -> Dense {
        let m = self.a.len();
        (0..m).map(|i| (0..m).map(|j| if i == j { self.a[i] } else { C64::new(0.0, 0.0) } - self.bm[i][j]).collect()).collect()
    }
}

/// Assembles and solves the constraint system for the particular solution u0.
///
/// Orthogonality of u0 + Σ c_ℓ φ̂_ℓ reads Y + (A − Bm) C = 0, which fixes the
/// sign of the right-hand side.
pub fn constraint_matrix(
    ops: &CellOperators,
    u0: &ComplexField,
    modes: &PropagativeWavenumber,
    theta: f64,
    k: f64,
) -> Result<ConstraintSystem> {
    let m = modes.modes.len();
    let s = theta.sin();
    let a: Vec<C64> = modes.lambdas.iter().map(|l| 0.5 * I * s * l).collect();
    let bm: Dense = (0..m)
        .map(|l| {
            (0..m)
                .map(|lp| {
                    I * k * inner(ops, &modes.modes[lp], &modes.modes[l], InnerProduct::L2Cell)
                })
                .collect()
        })
        .collect();
    let y: Vec<C64> = modes
        .modes
        .iter()
        .map(|phi| oc_moment(ops, u0, phi, theta, k))
        .collect::<Result<_>>()?;
    let mut sys = ConstraintSystem {
        a,
        bm,
        y,
        c: Vec::new(),
        condition: 1.0,
        residual: 0.0,
    };
    if m == 0 {
        return Ok(sys);
    }
    let mat = sys.matrix();
    let cond = condition_number(&mat);
    if !(cond < 1e12) {
        return Err(Error::SingularConstraint { cond });
    }
    let rhs: Vec<C64> = sys.y.iter().map(|v| -v).collect();
    let c = dense_solve(&mat, &rhs);
    let r: Vec<C64> = (0..m)
        .map(|i| (0..m).map(|j| mat[i][j] * c[j]).sum::<C64>() - rhs[i])
        .collect();
    sys.residual = norm2(&r) / norm2(&rhs).max(f64::MIN_POSITIVE);
    sys.c = c;
    sys.condition = cond;
    Ok(sys)
}

/// u0 + Σ c_ℓ φ̂_ℓ, including the upward expansions.
pub fn constrained_field(u0: &ComplexField, modes: &[ComplexField], c: &[C64]) -> ComplexField {
    let mut out = u0.to_periodic();
    for (phi, cl) in modes.iter().zip(c) {
        let p = phi.to_periodic();
        for (a, b) in out.values.iter_mut().zip(&p.values) {
            *a += cl * b;
        }
        if let (Some(eo), Some(ep)) = (out.above.as_mut(), &p.above) {
            for n in ep.orders() {
                if n.abs() <= eo.n_max {
                    eo.coeffs[(n + eo.n_max) as usize] += cl * ep.coefficient(n);
                }
            }
        }
    }
    out
}

/// max_ℓ |∫(sin θ ∂₁u − iku) conj(φ̂_ℓ)| / (‖u‖_{Q_h} ‖φ̂_ℓ‖); 0 for an empty mode set.
pub fn check_oc(
    ops: &CellOperators,
    u: &ComplexField,
    modes: &[ComplexField],
    theta: f64,
    k: f64,
) -> Result<f64> {
    let vu = u.to_periodic().values;
    let un = dot(&vu, &ops.forms.mass.apply(&vu)).re.max(0.0).sqrt();
    let mut worst: f64 = 0.0;
    for phi in modes {
        let pn = inner(ops, phi, phi, InnerProduct::L2Cell)
            .re
            .max(0.0)
            .sqrt();
        let v = oc_moment(ops, u, phi, theta, k)?;
        worst = worst.max(v.norm() / (un * pn).max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Particular solution at a (near-)singular α̂: direct solve followed by
/// removal of the mode components, so u0 is the minimum-norm representative.
/// Returns the field and its relative residual.
pub fn particular_solution(
    ops: &Arc<CellOperators>,
    k: f64,
    theta: f64,
    modes: &[ComplexField],
    dtn_order: usize,
) -> Result<(ComplexField, f64)> {
    let alpha = k * theta.sin();
    let sys = assemble_with(ops, C64::new(k, 0.0), C64::new(alpha, 0.0), dtn_order)?;
    let fact = sys.factor()?;
    let b0 = C64::new(k * theta.cos(), 0.0);
    let rhs = rhs_plane_wave_with(ops, b0);
    // Project the load onto the numerical range: remove its component along
    // the left near-null vectors w_ℓ = M v_ℓ/‖M v_ℓ‖.
    let basis: Vec<Vec<C64>> = modes
        .iter()
        .map(|m| ops.dofs.gather(&m.to_periodic().values))
        .collect();
    let mut left: Vec<Vec<C64>> = basis
        .iter()
        .map(|v| crate::linalg::matvec(&fact.matrix, v))
        .collect();
    crate::linalg::orthonormalize(&mut left);
    let mut b = rhs.clone();
    for w in &left {
        let c = dot(w, &b);
        for (bi, wi) in b.iter_mut().zip(w) {
            *bi -= c * wi;
        }
    }
    let mut x = fact.solve(&b);
    let mut right = basis.clone();
    crate::linalg::orthonormalize(&mut right);
    for z in &right {
        let c = dot(z, &x);
        for (xi, zi) in x.iter_mut().zip(z) {
            *xi -= c * zi;
        }
    }
    let residual = fact.relative_residual(&x, &rhs);
    let mut f = sys.field(&x, None);
    f.above = Some(rayleigh_coefficients(&f, Some(b0)));
    Ok((f, residual))
}

/// The mode-basis matrix of the ε-derivative of the cell operator at ε = 0,
/// P_{ℓℓ'} = φ̂_ℓᴴ M'(0) φ̂_{ℓ'} with
/// M'(0) = 2 sin θ C − 2ik cos²θ Mass − DtN'(0).
pub fn derivative_form(
    ops: &CellOperators,
    modes: &[ComplexField],
    theta: f64,
    k: f64,
    dtn_order: usize,
) -> Dense {
    let alpha = modes
        .first()
        .map_or(C64::new(k * theta.sin(), 0.0), |m| m.alpha);
    let s = theta.sin();
    let kc = C64::new(k, 0.0);
    let n = dtn_order as i64;
    let orders: Vec<(f64, C64)> = (-n..=n)
        .filter_map(|m| {
            let b = beta_complex(m, alpha, kc);
            (b.norm() > 1e-10).then(|| {
                let xi = alpha + m as f64;
                (m as f64, -(I * (kc - xi * s) / b))
            })
        })
        .collect();
    let dtn = ops.top.dtn(ops.mesh.mesh.nodes.len(), &orders);
    let vals: Vec<Vec<C64>> = modes.iter().map(|m| m.to_periodic().values).collect();
    let apply = |v: &Vec<C64>| -> Vec<C64> {
        let c = ops.forms.c.apply(v);
        let m = ops.forms.mass.apply(v);
        let d = dtn.apply(v);
        c.iter()
            .zip(&m)
            .zip(&d)
            .map(|((c, m), d)| 2.0 * s * c - 2.0 * I * kc * theta.cos().powi(2) * m + d)
            .collect()
    };
    let mv: Vec<Vec<C64>> = vals.iter().map(apply).collect();
    (0..vals.len())
        .map(|l| (0..vals.len()).map(|lp| dot(&vals[l], &mv[lp])).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cell_mesh;
    use crate::modes::{mode_pencil, null_space};
    use crate::profile::PeriodicProfile;
    use crate::qpsolver::solve_plane_wave;
    use crate::wave::WaveParams;

    fn flat_ops() -> Arc<CellOperators> {
        CellOperators::new(&build_cell_mesh(&PeriodicProfile::flat(), 1.0, 0.3).unwrap())
    }

    #[test]
    fn absorbing_betas_have_positive_imaginary_part() {
        for &eps in &[1e-4, 1e-2, 0.1] {
            let (ke, ae, _) = absorbing_params(1.7, eps, 0.3);
            for n in -20..=20 {
                assert!(beta_complex(n, ae, ke).im > 0.0);
            }
        }
    }

    #[test]
    fn flat_absorbing_field_decays_faster() {
        let ops = flat_ops();
        let f = solve_absorbing(&ops, 2.0, 0.1, 0.0, 6).unwrap();
        let e = f.above.as_ref().unwrap();
        let d0 = e.coefficient_at(0, 5.0).norm() / e.coefficient_at(0, 1.0).norm();
        assert!(d0 < 1.0 - 1e-3, "{d0}");
        let g = solve_plane_wave(&ops, &WaveParams::new(2.0, 0.0).unwrap(), Some(6)).unwrap();
        let e0 = g.above.as_ref().unwrap();
        assert!(
            (e0.coefficient_at(0, 5.0).norm() - e0.coefficient_at(0, 1.0).norm()).abs() < 1e-12
        );
    }

    #[test]
    fn single_point_schedule_is_plain_solve() {
        let ops = flat_ops();
        let r = lap_limit(&ops, 1.3, 0.2, &[0.01], 6).unwrap();
        let f = solve_absorbing(&ops, 1.3, 0.01, 0.2, 6).unwrap();
        assert_eq!(r.diagnostic, 0.0);
        for (a, b) in r.field.values.iter().zip(&f.to_periodic().values) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn limit_matches_direct_solve() {
        let ops = CellOperators::new(
            &build_cell_mesh(&PeriodicProfile::sine(0.3).unwrap(), 1.0, 0.3).unwrap(),
        );
        let (k, theta) = (1.5, 0.2);
        let r = lap_limit(&ops, k, theta, &default_schedule(), 9).unwrap();
        let d = solve_plane_wave(&ops, &WaveParams::new(k, theta).unwrap(), Some(9)).unwrap();
        let diff: Vec<C64> = r
            .field
            .values
            .iter()
            .zip(&d.values)
            .map(|(a, b)| a - b)
            .collect();
        let rel = lumped_norm(&ops, &diff) / lumped_norm(&ops, &d.values);
        assert!(rel < 1e-6, "{rel}");
        assert!((r.rate - 1.0).abs() < 0.2, "rate {}", r.rate);
    }

    #[test]
    fn bad_schedule_rejected() {
        let ops = flat_ops();
        assert!(lap_limit(&ops, 1.3, 0.2, &[0.01, 0.02], 6).is_err());
        assert!(lap_limit(&ops, 1.3, 0.2, &[], 6).is_err());
    }

    /// A two-vector basis at an ordinary α: the algebraic identities of the
    /// constraint system hold for any basis.
    fn synthetic(k: f64, theta: f64) -> (Arc<CellOperators>, PropagativeWavenumber, ComplexField) {
        let ops = CellOperators::new(
            &build_cell_mesh(&PeriodicProfile::sine(0.4).unwrap(), 1.2, 0.35).unwrap(),
        );
        let alpha = k * theta.sin();
        let (_, _, raw) = null_space(alpha, k, &ops, 9, 2).unwrap();
        let p = mode_pencil(&ops, &raw, InnerProduct::L2Cell).unwrap();
        let pw = PropagativeWavenumber {
            alpha_hat: alpha,
            multiplicity: p.modes.len(),
            modes: p.modes,
            lambdas: p.lambdas,
            sigma_min_history: Vec::new(),
            residuals: Vec::new(),
            decay_rates: Vec::new(),
            propagating_content: Vec::new(),
            nondegenerate: true,
        };
        let u0 = solve_plane_wave(&ops, &WaveParams::new(k, theta).unwrap(), Some(9)).unwrap();
        (ops, pw, u0)
    }

    #[test]
    fn constraint_algebra() {
        let (k, theta) = (1.4, 0.35);
        let (ops, pw, u0) = synthetic(k, theta);
        let cs = constraint_matrix(&ops, &u0, &pw, theta, k).unwrap();
        assert!(cs.residual < 1e-10);
        // Bm/(ik) is the Gram matrix of an orthonormal basis.
        for i in 0..2 {
            for j in 0..2 {
                let g = cs.bm[i][j] / (I * k);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).norm() < 1e-10, "{g}");
            }
        }
        let u = constrained_field(&u0, &pw.modes, &cs.c);
        assert!(check_oc(&ops, &u, &pw.modes, theta, k).unwrap() < 1e-8);
        // Shifting u0 by φ̂₁ leaves the corrected field unchanged.
        let shifted = constrained_field(&u0, &pw.modes[..1], &[C64::new(1.0, 0.0)]);
        let cs2 = constraint_matrix(&ops, &shifted, &pw, theta, k).unwrap();
        assert!((cs2.c[0] - (cs.c[0] - 1.0)).norm() < 1e-8);
        assert!((cs2.c[1] - cs.c[1]).norm() < 1e-8);
        let u2 = constrained_field(&shifted, &pw.modes, &cs2.c);
        let d: f64 = u
            .values
            .iter()
            .zip(&u2.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn one_mode_closed_form_and_misadjusted_residual() {
        let (k, theta) = (1.4, 0.35);
        let (ops, mut pw, u0) = synthetic(k, theta);
        pw.modes.truncate(1);
        pw.lambdas.truncate(1);
        let cs = constraint_matrix(&ops, &u0, &pw, theta, k).unwrap();
        let nrm = inner(&ops, &pw.modes[0], &pw.modes[0], InnerProduct::L2Cell).re;
        let want = -cs.y[0] / (0.5 * I * theta.sin() * pw.lambdas[0] - I * k * nrm);
        assert!((cs.c[0] - want).norm() < 1e-10 * want.norm().max(1.0));
        // Misadjusting c by one leaves exactly the 1×1 matrix as residual.
        let u = constrained_field(&u0, &pw.modes, &[cs.c[0] + 1.0]);
        let m = oc_moment(&ops, &u, &pw.modes[0], theta, k).unwrap();
        assert!((m - (cs.a[0] - cs.bm[0][0])).norm() < 1e-9 * m.norm());
        // An already orthogonal u0 gives C = 0.
        let u_ok = constrained_field(&u0, &pw.modes, &cs.c);
        let cs0 = constraint_matrix(&ops, &u_ok, &pw, theta, k).unwrap();
        assert!(cs0.c[0].norm() < 1e-9);
        assert_eq!(check_oc(&ops, &u0, &[], theta, k).unwrap(), 0.0);
    }

    #[test]
    fn lagrange_weights_reproduce_polynomials() {
        let e = [0.1, 0.05, 0.025];
        let w = lagrange_at_zero(&e);
        let p = |x: f64| 3.0 - 2.0 * x + 5.0 * x * x;
        let v: f64 = e.iter().zip(&w).map(|(x, w)| w * p(*x)).sum();
        assert!((v - 3.0).abs() < 1e-12);
    }
}
