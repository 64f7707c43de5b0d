//! Uniqueness harnesses for the inverse problem: Gram certificates of linear
//! independence, modal averaging, the echelle counterexample, counting of the
//! Dirichlet eigenvalues of the rectangle and two-geometry discrimination.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::linalg::{hermitian_eigen, Dense};
use crate::mesh::{build_cell_mesh, build_supercell_mesh};
use crate::perturbed::{
    near_field_record, record_difference, solve_perturbed, Incident, NearFieldData,
};
use crate::profile::{LocalPerturbation, PeriodicProfile};
use crate::qpsolver::{rayleigh_coefficients, solve_plane_wave, CellOperators};
use crate::wave::WaveParams;
use crate::C64;

/// Axis-aligned rectangle [x.0, x.1] × [y.0, y.1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Window {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x.0 && p[0] <= self.x.1 && p[1] >= self.y.0 && p[1] <= self.y.1
    }
}

#[derive(Debug, Clone)]
pub struct Gram {
    pub matrix: Dense,
    pub eigenvalues: Vec<f64>,
    pub smallest: f64,
    pub trace: f64,
}

impl Gram {
    pub fn determinant(&self) -> f64 {
        self.eigenvalues.iter().product()
    }
}

fn gram_from(vectors: &[Vec<C64>], weights: &[f64]) -> Gram {
    let n = vectors.len();
    let matrix: Dense = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    vectors[i]
                        .iter()
                        .zip(&vectors[j])
                        .zip(weights)
                        .map(|((a, b), w)| a.conj() * b * w)
                        .sum()
                })
                .collect()
        })
        .collect();
    let (eigenvalues, _) = hermitian_eigen(&matrix);
    let trace = (0..n).map(|i| matrix[i][i].re).sum();
    let smallest = eigenvalues.first().copied().unwrap_or(0.0);
    Gram {
        matrix,
        eigenvalues,
        smallest,
        trace,
    }
}

/// Discrete L²(window) Gram matrix of fields sharing one mesh, with the
/// lumped mass of the triangles whose centroid lies in the window.
pub fn gram_matrix(fields: &[ComplexField], window: Window) -> Result<Gram> {
    let Some(first) = fields.first() else {
        return Err(Error::InvalidParameter("no fields".into()));
    };
    let mesh = &first.mesh;
    if fields.iter().any(|f| !Arc::ptr_eq(&f.mesh, mesh)) {
        return Err(Error::InvalidParameter("fields must share one mesh".into()));
    }
    let mut w = vec![0.0; mesh.nodes.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let c = [0, 1].map(|d| tri.iter().map(|&i| mesh.nodes[i][d]).sum::<f64>() / 3.0);
        if window.contains(c) {
            let a = mesh.area(t) / 3.0;
            for &i in tri {
                w[i] += a;
            }
        }
    }
    if w.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidParameter(
            "window contains no elements".into(),
        ));
    }
    let vectors: Vec<Vec<C64>> = fields.iter().map(|f| f.u_values()).collect();
    Ok(gram_from(&vectors, &w))
}

/// Gram matrix of sampled traces with trapezoid weights on a uniform grid.
pub fn gram_of_records(records: &[NearFieldData]) -> Result<Gram> {
    let Some(first) = records.first() else {
        return Err(Error::InvalidParameter("no records".into()));
    };
    let n = first.x1.len();
    if records.iter().any(|r| r.x1 != first.x1) {
        return Err(Error::InvalidParameter(
            "records must share one grid".into(),
        ));
    }
    let dx = (first.x1[n - 1] - first.x1[0]) / (n - 1) as f64;
    let w: Vec<f64> = (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * dx } else { dx })
        .collect();
    let vectors: Vec<Vec<C64>> = records.iter().map(|r| r.values.clone()).collect();
    Ok(gram_from(&vectors, &w))
}

/// (1/2R) ∫_{−R}^{R} u(x₁) e^{−iα_m x₁} dx₁ for each R, from samples on an
/// increasing grid covering [−R_max, R_max]. The integrand is interpolated
/// linearly between samples.
pub fn extract_mode_average(
    x1: &[f64],
    values: &[C64],
    alpha_m: f64,
    r_list: &[f64],
) -> Result<Vec<C64>> {
    if x1.len() != values.len() || x1.len() < 2 {
        return Err(Error::InvalidParameter(
            "need matching sample arrays of length two or more".into(),
        ));
    }
    if x1.windows(2).any(|w| w[1] <= w[0]) || r_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "samples and widths must be increasing".into(),
        ));
    }
    let r_max = r_list.last().copied().unwrap_or(0.0);
    if r_list.first().is_some_and(|r| *r <= 0.0) || x1[0] > -r_max || x1[x1.len() - 1] < r_max {
        return Err(Error::InvalidParameter(
            "samples must cover [-R, R] for every R > 0".into(),
        ));
    }
    let f: Vec<C64> = x1
        .iter()
        .zip(values)
        .map(|(x, u)| u * C64::from_polar(1.0, -alpha_m * x))
        .collect();
    let integral = |a: f64, b: f64| -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..x1.len() - 1 {
            let (l, r) = (x1[i].max(a), x1[i + 1].min(b));
            if r <= l {
                continue;
            }
            let d = x1[i + 1] - x1[i];
            let at = |x: f64| f[i] + (f[i + 1] - f[i]) * ((x - x1[i]) / d);
            s += 0.5 * (at(l) + at(r)) * (r - l);
        }
        s
    };
    Ok(r_list
        .iter()
        .map(|&r| integral(-r, r) / (2.0 * r))
        .collect())
}

/// Exponent p of |average| ~ R^p.
pub fn average_rate(r_list: &[f64], averages: &[C64]) -> f64 {
    let s: Vec<(f64, f64)> = r_list
        .iter()
        .zip(averages)
        .map(|(r, a)| (*r, a.norm()))
        .collect();
    crate::green::fit_power(&s)
}

/// The echelle counterexample: geometry, incidence and closed-form field.
#[derive(Debug, Clone)]
pub struct CounterexampleCase {
    pub profile: PeriodicProfile,
    pub perturbation: LocalPerturbation,
    pub k: f64,
    pub theta: f64,
}

impl CounterexampleCase {
    /// 2(cos 2x₂ − cos 2x₁) = 4 sin(x₁+x₂) sin(x₁−x₂).
    pub fn field(&self, x: [f64; 2]) -> f64 {
        2.0 * ((2.0 * x[1]).cos() - (2.0 * x[0]).cos())
    }
}

pub fn counterexample_case() -> CounterexampleCase {
    CounterexampleCase {
        profile: PeriodicProfile::echelle(),
        perturbation: LocalPerturbation::echelle_defect(),
        k: 2.0,
        theta: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleOptions {
    /// Cell mesh size for the Rayleigh coefficients.
    pub cell_target: f64,
    /// Supercell mesh size for the near-field comparison.
    pub supercell_target: f64,
    /// Mesh top; must exceed π, the apex of the defect.
    pub h: f64,
    pub record_height: f64,
    pub n_periods: usize,
    pub samples: usize,
}

impl Default for CounterexampleOptions {
    fn default() -> Self {
        Self {
            cell_target: 0.05,
            supercell_target: 0.1,
            h: 4.0,
            record_height: 3.6,
            n_periods: 7,
            samples: 65,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    /// |u₀ − 1|, |u₂ + 1|, |u₋₂ + 1| of the cell solve.
    pub rayleigh_errors: [f64; 3],
    /// sup |u − analytic| of the cell solve on x₂ = record_height.
    pub cell_vs_analytic: f64,
    /// sup |u − analytic| of the unperturbed supercell record.
    pub unperturbed_vs_analytic: f64,
    pub perturbed_vs_analytic: f64,
    /// Identical-pair floor: unperturbed vs. resampled-identity geometry.
    pub floor: f64,
    pub perturbed_vs_unperturbed: f64,
    /// Groove filled flat: off the nodal lines.
    pub control_vs_unperturbed: f64,
}

impl CounterexampleReport {
    pub fn defect_ratio(&self) -> f64 {
        self.perturbed_vs_unperturbed / self.floor
    }

    pub fn control_ratio(&self) -> f64 {
        self.control_vs_unperturbed / self.floor
    }
}

pub fn verify_counterexample(opts: &CounterexampleOptions) -> Result<CounterexampleReport> {
    let case = counterexample_case();
    if opts.h <= PI || opts.record_height <= PI || opts.record_height > opts.h {
        return Err(Error::InvalidParameter(
            "record height must lie in (pi, h]".into(),
        ));
    }
    let cell = build_cell_mesh(&case.profile, opts.h, opts.cell_target)?;
    let ops = CellOperators::new(&cell);
    let w = WaveParams::new(case.k, case.theta)?;
    let u = solve_plane_wave(&ops, &w, None)?;
    let e = rayleigh_coefficients(&u, Some(C64::new(w.beta0(), 0.0)));
    let c = |n| e.coefficient_at(n, 0.0);
    let rayleigh_errors = [
        (c(0) - 1.0).norm(),
        (c(2) + 1.0).norm(),
        (c(-2) + 1.0).norm(),
    ];
    let xs: Vec<f64> = (0..opts.samples)
        .map(|i| 2.0 * PI * i as f64 / (opts.samples - 1) as f64)
        .collect();
    let mut cell_vs_analytic: f64 = 0.0;
    for &x in &xs {
        let p = [x, opts.record_height];
        cell_vs_analytic = cell_vs_analytic.max((u.evaluate_point(p)? - case.field(p)).norm());
    }

    let floor_pert = LocalPerturbation::identity_resampled(&case.profile, 0.5 * PI, 1.5 * PI, 7)?;
    let geoms = [
        None,
        Some(floor_pert),
        Some(case.perturbation.clone()),
        Some(LocalPerturbation::echelle_fill()),
    ];
    let inc = Incident::PlaneWave {
        k: case.k,
        theta: case.theta,
    };
    let records = geoms
        .iter()
        .map(|g| {
            let sc = Arc::new(build_supercell_mesh(
                &case.profile,
                g.as_ref(),
                opts.h,
                opts.n_periods,
                2.0 * PI,
                opts.supercell_target,
            )?);
            let sol = solve_perturbed(&sc, inc, None)?;
            near_field_record(&sol, opts.record_height, 0.0, 2.0 * PI, opts.samples)
        })
        .collect::<Result<Vec<_>>>()?;
    let vs_analytic = |r: &NearFieldData| {
        r.x1.iter()
            .zip(&r.values)
            .map(|(x, v)| (v - case.field([*x, r.h])).norm())
            .fold(0.0, f64::max)
    };
    Ok(CounterexampleReport {
        rayleigh_errors,
        cell_vs_analytic,
        unperturbed_vs_analytic: vs_analytic(&records[0]),
        perturbed_vs_analytic: vs_analytic(&records[2]),
        floor: record_difference(&records[0], &records[1]),
        perturbed_vs_unperturbed: record_difference(&records[0], &records[2]),
        control_vs_unperturbed: record_difference(&records[0], &records[3]),
    })
}

/// Number of lattice points (l, j), l, j ≥ 1, with l²/4 + j²π²/h² < k²:
/// the Dirichlet eigenvalues of (0, 2π) × (0, h) below k², one per point.
pub fn eig_count_below(h: f64, k: f64) -> Result<u64> {
    if !(h > 0.0 && k > 0.0 && h.is_finite() && k.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need h > 0 and k > 0, got h = {h}, k = {k}"
        )));
    }
    let k2 = k * k;
    let mut count = 0u64;
    let mut j = 1u64;
    loop {
        let rem = k2 - (j as f64 * PI / h).powi(2);
        if rem <= 0.0 {
            break;
        }
        // largest l with l²/4 < rem
        let mut l = (2.0 * rem.sqrt()).floor() as u64;
        while l > 0 && (l * l) as f64 / 4.0 >= rem {
            l -= 1;
        }
        while ((l + 1) * (l + 1)) as f64 / 4.0 < rem {
            l += 1;
        }
        count += l;
        j += 1;
    }
    Ok(count)
}

/// Smallest k with a nonzero count: √(1/4 + π²/h²).
pub fn eig_threshold(h: f64) -> f64 {
    (0.25 + PI * PI / (h * h)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Discriminated,
    NotDiscriminated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Discriminated => "discriminated",
            Verdict::NotDiscriminated => "NOT discriminated",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentDiscrepancy {
    pub incident: Incident,
    pub sup: f64,
    pub l2: f64,
    pub floor: f64,
}

#[derive(Debug, Clone)]
pub struct UniquenessReport {
    pub profile: String,
    pub geometry_a: String,
    pub geometry_b: String,
    pub record_height: f64,
    pub interval: (f64, f64),
    pub discrepancies: Vec<IncidentDiscrepancy>,
    /// Gram matrix of geometry A's records over the incident set.
    pub gram: Gram,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl UniquenessReport {
    /// Structured text report followed by a comma-separated table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("profile = {}\n", self.profile));
        s.push_str(&format!(
            "geometry_a = {}\ngeometry_b = {}\n",
            self.geometry_a, self.geometry_b
        ));
        s.push_str(&format!(
            "record_height = {:.6}\ninterval = {:.6},{:.6}\n",
            self.record_height, self.interval.0, self.interval.1
        ));
        s.push_str(&format!(
            "gram_smallest = {:.6e}\ngram_determinant = {:.6e}\n",
            self.gram.smallest,
            self.gram.determinant()
        ));
        s.push_str(&format!("verdict = {}\n", self.verdict));
        for n in &self.notes {
            s.push_str(&format!("note = {n}\n"));
        }
        s.push_str("incident,k,param1,param2,sup,l2,floor\n");
        for d in &self.discrepancies {
            let (kind, k, p1, p2) = match d.incident {
                Incident::PlaneWave { k, theta } => ("plane", k, theta, 0.0),
                Incident::PointSource { k, y } => ("point", k, y[0], y[1]),
            };
            s.push_str(&format!(
                "{kind},{k:.6},{p1:.6},{p2:.6},{:.6e},{:.6e},{:.6e}\n",
                d.sup, d.l2, d.floor
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOptions {
    pub target_size: f64,
    pub n_periods: usize,
    pub pml_width: f64,
    /// Mesh top; defaults to record height + 0.4.
    pub mesh_height: Option<f64>,
    pub samples: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            target_size: 0.1,
            n_periods: 7,
            pml_width: 2.0 * PI,
            mesh_height: None,
            samples: 65,
        }
    }
}

/// Default record height: 1.5 × the largest height of either geometry.
pub fn default_record_height(
    profile: &PeriodicProfile,
    a: Option<&LocalPerturbation>,
    b: Option<&LocalPerturbation>,
) -> f64 {
    let base = profile
        .vertices()
        .iter()
        .map(|v| v[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let top = [a, b]
        .iter()
        .flatten()
        .map(|p| p.height_max())
        .fold(base, f64::max);
    1.5 * top.max(0.5)
}

/// Solves both geometries for every incident and compares near-field
/// records on x₂ = h over (a, b). The floor of each incident is the
/// discrepancy between the unperturbed curve and the same curve with a
/// resampled arc.
pub fn uniqueness_experiment(
    profile: &PeriodicProfile,
    geometry_a: Option<&LocalPerturbation>,
    geometry_b: Option<&LocalPerturbation>,
    incidents: &[Incident],
    h: f64,
    interval: (f64, f64),
    opts: &ExperimentOptions,
) -> Result<UniquenessReport> {
    if incidents.is_empty() {
        return Err(Error::InvalidParameter("no incident waves".into()));
    }
    let tops = [geometry_a, geometry_b]
        .iter()
        .flatten()
        .map(|p| p.height_max())
        .fold(f64::NEG_INFINITY, f64::max);
    if tops >= h {
        return Err(Error::InvalidParameter(format!(
            "perturbations reach {tops:.4}, above the record height {h}"
        )));
    }
    let arc = geometry_a
        .or(geometry_b)
        .map_or((0.5 * PI, 1.5 * PI), |p| p.replaced_arc);
    let identity = LocalPerturbation::identity_resampled(profile, arc.0, arc.1, 7)?;
    let mesh_h = opts.mesh_height.unwrap_or(h + 0.4);
    let mesh = |g: Option<&LocalPerturbation>| -> Result<Arc<crate::mesh::SupercellMesh>> {
        Ok(Arc::new(build_supercell_mesh(
            profile,
            g,
            mesh_h,
            opts.n_periods,
            opts.pml_width,
            opts.target_size,
        )?))
    };
    let meshes = [
        mesh(None)?,
        mesh(Some(&identity))?,
        mesh(geometry_a)?,
        mesh(geometry_b)?,
    ];
    let per_incident = incidents
        .par_iter()
        .map(|inc| {
            let rec = meshes
                .iter()
                .map(|sc| {
                    near_field_record(
                        &solve_perturbed(sc, *inc, None)?,
                        h,
                        interval.0,
                        interval.1,
                        opts.samples,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut discrepancies = Vec::new();
    let mut records_a = Vec::new();
    for (inc, rec) in incidents.iter().zip(per_incident) {
        let n = rec[2].x1.len();
        let dx = (interval.1 - interval.0) / (n - 1) as f64;
        let l2 = rec[2]
            .values
            .iter()
            .zip(&rec[3].values)
            .enumerate()
            .map(|(i, (a, b))| {
                (a - b).norm_sqr() * if i == 0 || i == n - 1 { 0.5 * dx } else { dx }
            })
            .sum::<f64>()
            .sqrt();
        discrepancies.push(IncidentDiscrepancy {
            incident: *inc,
            sup: record_difference(&rec[2], &rec[3]),
            l2,
            floor: record_difference(&rec[0], &rec[1]),
        });
        records_a.push(rec[2].clone());
    }
    let gram = gram_of_records(&records_a)?;
    let verdict = if discrepancies.iter().any(|d| d.sup > 10.0 * d.floor) {
        Verdict::Discriminated
    } else {
        Verdict::NotDiscriminated
    };
    let mut notes = vec![format!(
        "threshold = 10 x floor; mesh target {} with {} periods",
        opts.target_size, opts.n_periods
    )];
    if incidents
        .iter()
        .all(|i| matches!(i, Incident::PlaneWave { .. }))
        && incidents.len() == 1
    {
        notes.push("single plane wave: uniqueness is only expected below the first rectangle eigenvalue threshold".into());
    }
    let spec = |g: Option<&LocalPerturbation>| g.map_or("none".to_string(), |p| p.spec());
    Ok(UniquenessReport {
        profile: profile.spec(),
        geometry_a: spec(geometry_a),
        geometry_b: spec(geometry_b),
        record_height: h,
        interval,
        discrepancies,
        gram,
        verdict,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_count(h: f64, k: f64) -> u64 {
        let lmax = (2.0 * k).ceil() as u64 + 2;
        let jmax = (k * h / PI).ceil() as u64 + 2;
        let mut c = 0;
        for l in 1..=lmax {
            for j in 1..=jmax {
                if (l * l) as f64 / 4.0 + (j as f64 * PI / h).powi(2) < k * k {
                    c += 1;
                }
            }
        }
        c
    }

    #[test]
    fn eig_count_reference() {
        assert_eq!(eig_count_below(PI, 2.0).unwrap(), 3);
        assert_eq!(brute_count(PI, 2.0), 3);
        assert_eq!(eig_count_below(PI, 1.1).unwrap(), 0);
        // h = 2π, k = 3/2: l² + j² < 9 with l, j ≥ 1
        assert_eq!(eig_count_below(2.0 * PI, 1.5).unwrap(), 4);
        assert!(eig_count_below(0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn eig_count_matches_enumeration(h in 0.2f64..12.0, k in 0.05f64..8.0) {
            let c = eig_count_below(h, k).unwrap();
            prop_assert_eq!(c, brute_count(h, k));
            prop_assert!(c as f64 <= h * k * k / 2.0);
            prop_assert_eq!(c == 0, k <= eig_threshold(h));
        }

        #[test]
        fn mode_average_phase_invariant_gram(phase in 0.0f64..std::f64::consts::TAU) {
            let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
            let rec = |f: &dyn Fn(f64) -> C64| NearFieldData {
                h: 1.0,
                x1: x.clone(),
                values: x.iter().map(|t| f(*t)).collect(),
                incident: Incident::PlaneWave { k: 1.0, theta: 0.0 },
            };
            let a = [rec(&|t| C64::new(t.cos(), 0.0)), rec(&|t| C64::new(0.0, t.sin())), rec(&|t| C64::new(1.0, t))];
            let mut b = a.clone();
            for v in &mut b[1].values {
                *v *= C64::from_polar(1.0, phase);
            }
            let (ga, gb) = (gram_of_records(&a).unwrap(), gram_of_records(&b).unwrap());
            prop_assert!((ga.smallest - gb.smallest).abs() < 1e-12 * ga.trace);
        }
    }

    #[test]
    fn gram_basics() {
        let m = build_cell_mesh(&PeriodicProfile::flat(), 1.0, 0.3).unwrap();
        let mk = |f: &dyn Fn([f64; 2]) -> C64| ComplexField {
            mesh: m.mesh.clone(),
            values: m.mesh.nodes.iter().map(|p| f(*p)).collect(),
            alpha: C64::new(0.0, 0.0),
            representation: crate::field::Representation::QuasiPeriodic,
            h: 1.0,
            period: None,
            above: None,
        };
        let u = mk(&|p| C64::new(p[1], p[0]));
        let v = mk(&|p| C64::new(p[0] * p[1], 1.0));
        let win = Window {
            x: (0.0, 2.0 * PI),
            y: (0.0, 1.0),
        };
        let g1 = gram_matrix(std::slice::from_ref(&u), win).unwrap();
        assert!(g1.smallest > 0.0 && (g1.smallest - g1.trace).abs() < 1e-12 * g1.trace);
        let g = gram_matrix(&[u.clone(), v.clone(), u.clone()], win).unwrap();
        assert!(g.smallest.abs() < 1e-12 * g.trace);
        let g = gram_matrix(&[u, v], win).unwrap();
        assert!(g.smallest > 1e-3 * g.trace);
        // ∫∫ x₁² + x₂² over (0,2π)×(0,1) = 8π³/3 + 2π/3, up to the lumped quadrature error
        let exact = 8.0 * PI.powi(3) / 3.0 + 2.0 * PI / 3.0;
        assert!((g.matrix[0][0].re - exact).abs() < 1e-2 * exact);
    }

    #[test]
    fn mode_average_regimes() {
        let x: Vec<f64> = (-20000..=20000).map(|i| i as f64 * 0.05).collect();
        let am = 0.3;
        let same: Vec<C64> = x.iter().map(|t| C64::from_polar(1.0, am * t)).collect();
        let rs = [100.0, 200.0, 400.0, 800.0];
        for a in extract_mode_average(&x, &same, am, &rs).unwrap() {
            assert!((a - 1.0).norm() < 1e-12);
        }
        // e^{iα'x}: average = sin(δR)/(δR); at δR = (j + ½)π the envelope 1/(δR) is attained
        let d = 0.5;
        let other: Vec<C64> = x
            .iter()
            .map(|t| C64::from_polar(1.0, (am + d) * t))
            .collect();
        let peaks: Vec<f64> = [64.5, 128.5, 256.5]
            .iter()
            .map(|j| j * PI / d)
            .filter(|r| *r < 1000.0)
            .collect();
        let av = extract_mode_average(&x, &other, am, &peaks).unwrap();
        for (r, a) in peaks.iter().zip(&av) {
            assert!((a.norm() - 1.0 / (d * r)).abs() < 1e-3 / (d * r));
        }
        assert!((average_rate(&peaks, &av) + 1.0).abs() < 1e-3);
        // 1/√(1+|x|): average ≈ 2√R/(2R)
        let sym: Vec<C64> = x
            .iter()
            .map(|t| C64::new(1.0 / (1.0 + t.abs()).sqrt(), 0.0))
            .collect();
        let av = extract_mode_average(&x, &sym, 0.0, &rs).unwrap();
        assert!((average_rate(&rs, &av) + 0.5).abs() < 0.05);
        assert!(extract_mode_average(&x, &sym, 0.0, &[2000.0]).is_err());
    }

    #[test]
    fn counterexample_closed_form() {
        let c = counterexample_case();
        assert!((c.field([PI / 2.0, 0.0]) - 4.0).abs() < 1e-14);
        for t in [0.1, 0.7, 1.3] {
            assert!(c.field([t, t]).abs() < 1e-14);
            assert!(c.field([t + PI, -t - PI + 2.0 * PI]).abs() < 1e-13);
            let s = 4.0 * (t + 0.4f64).sin() * (t - 0.4f64).sin();
            assert!((c.field([t, 0.4]) - s).abs() < 1e-13);
        }
        // the defect's vertices lie on the nodal lines
        for v in &c.perturbation.replacement {
            assert!(c.field(*v).abs() < 1e-12);
        }
    }
}
