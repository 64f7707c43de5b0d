//! Discrete complex fields and upward Rayleigh expansions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{tag, TriMesh};
use crate::wave::branch_sqrt;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// Stored values are v = e^{−iαx₁}u.
    Periodic,
    /// Stored values are u.
    QuasiPeriodic,
}

/// u(x) = Σ_n c_n e^{iξ_n x₁ + iβ_n (x₂ − h)} with ξ_n = α + n·spacing and
/// β_n = √(k² − ξ_n²), plus an optional downward plane wave e^{iαx₁ − iβ₀x₂}.
#[derive(Debug, Clone, PartialEq)]
pub struct RayleighExpansion {
    pub alpha: C64,
    pub k: C64,
    /// Order spacing: 1 for 2π-periodic cells, 1/N for an N-period supercell.
    pub spacing: f64,
    pub reference_height: f64,
    pub n_max: i64,
    pub coeffs: Vec<C64>,
    /// β₀ of a downward incident plane wave included in the total field.
    pub incident: Option<C64>,
}

impl RayleighExpansion {
    pub fn xi(&self, n: i64) -> C64 {
        self.alpha + n as f64 * self.spacing
    }

    pub fn beta(&self, n: i64) -> C64 {
        let x = self.xi(n);
        branch_sqrt(self.k * self.k - x * x)
    }

    pub fn coefficient(&self, n: i64) -> C64 {
        if n.abs() > self.n_max {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(n + self.n_max) as usize]
        }
    }

    /// Coefficient of order n for the expansion referenced to height y:
    /// c_n e^{iβ_n (y − h)}.
    pub fn coefficient_at(&self, n: i64, y: f64) -> C64 {
        self.coefficient(n)
            * (C64::new(0.0, 1.0) * self.beta(n) * (y - self.reference_height)).exp()
    }

    pub fn orders(&self) -> impl Iterator<Item = i64> {
        -self.n_max..=self.n_max
    }

    pub fn evaluate(&self, x: [f64; 2]) -> C64 {
        let i = C64::new(0.0, 1.0);
        let mut s: C64 = self
            .orders()
            .map(|n| {
                self.coefficient(n)
                    * (i * (self.xi(n) * x[0] + self.beta(n) * (x[1] - self.reference_height)))
                        .exp()
            })
            .sum();
        if let Some(b0) = self.incident {
            s += (i * (self.alpha * x[0] - b0 * x[1])).exp();
        }
        s
    }

    /// Vertical derivative of the scattered part (the incident term excluded).
    pub fn evaluate_dx2_scattered(&self, x: [f64; 2]) -> C64 {
        let i = C64::new(0.0, 1.0);
        self.orders()
            .map(|n| {
                i * self.beta(n)
                    * self.coefficient(n)
                    * (i * (self.xi(n) * x[0] + self.beta(n) * (x[1] - self.reference_height)))
                        .exp()
            })
            .sum()
    }

    /// Coefficients multiplied by iβ_n (the DtN map in the Fourier basis).
    pub fn dtn_apply(&self) -> Vec<C64> {
        self.orders()
            .map(|n| C64::new(0.0, 1.0) * self.beta(n) * self.coefficient(n))
            .collect()
    }
}

/// Nodal values of a piecewise-linear field.
#[derive(Debug, Clone)]
pub struct ComplexField {
    pub mesh: Arc<TriMesh>,
    pub values: Vec<C64>,
    pub alpha: C64,
    pub representation: Representation,
    /// Truncation height (top of the mesh).
    pub h: f64,
    /// Lateral period of the mesh when the field extends quasi-periodically.
    pub period: Option<f64>,
    /// Expansion used above h.
    pub above: Option<RayleighExpansion>,
}

impl ComplexField {
    fn phase(&self, x1: f64, sign: f64) -> C64 {
        (C64::new(0.0, sign) * self.alpha * x1).exp()
    }

    pub fn to_quasi_periodic(&self) -> ComplexField {
        let mut out = self.clone();
        if self.representation == Representation::Periodic {
            for (v, p) in out.values.iter_mut().zip(&self.mesh.nodes) {
                *v *= self.phase(p[0], 1.0);
            }
            out.representation = Representation::QuasiPeriodic;
        }
        out
    }

    pub fn to_periodic(&self) -> ComplexField {
        let mut out = self.clone();
        if self.representation == Representation::QuasiPeriodic {
            for (v, p) in out.values.iter_mut().zip(&self.mesh.nodes) {
                *v *= self.phase(p[0], -1.0);
            }
            out.representation = Representation::Periodic;
        }
        out
    }

    /// u at the nodes.
    pub fn u_values(&self) -> Vec<C64> {
        match self.representation {
            Representation::QuasiPeriodic => self.values.clone(),
            Representation::Periodic => self
                .values
                .iter()
                .zip(&self.mesh.nodes)
                .map(|(v, p)| v * self.phase(p[0], 1.0))
                .collect(),
        }
    }

    pub fn max_on_gamma(&self) -> f64 {
        (0..self.values.len())
            .filter(|&i| self.mesh.has_tag(i, tag::GAMMA))
            .map(|i| self.values[i].norm())
            .fold(0.0, f64::max)
    }

    /// u at a point: linear interpolation inside the mesh, the Rayleigh
    /// expansion above h, quasi-periodic continuation in x₁ for cell fields.
    pub fn evaluate_point(&self, x: [f64; 2]) -> Result<C64> {
        if x[1] > self.h + 1e-12 {
            if let Some(e) = &self.above {
                return Ok(e.evaluate(x));
            }
        }
        let (shift, factor) = match self.period {
            Some(p) => {
                let m = (x[0] / p).floor();
                (m * p, (C64::new(0.0, 1.0) * self.alpha * m * p).exp())
            }
            None => (0.0, C64::new(1.0, 0.0)),
        };
        let xl = match self.period {
            Some(p) => [(x[0] - shift).clamp(0.0, p), x[1]],
            None => [x[0], x[1]],
        };
        let (t, b) = self
            .mesh
            .locate(xl)
            .ok_or(Error::OutOfDomain { x: x[0], y: x[1] })?;
        let tri = self.mesh.triangles[t];
        let v: C64 = (0..3).map(|a| self.values[tri[a]] * b[a]).sum();
        let u = match self.representation {
            Representation::QuasiPeriodic => v,
            Representation::Periodic => v * self.phase(xl[0], 1.0),
        };
        Ok(u * factor)
    }

    pub fn evaluate(&self, points: &[[f64; 2]]) -> Result<Vec<C64>> {
        points.iter().map(|p| self.evaluate_point(*p)).collect()
    }

    /// Discrete L² norm with the lumped mass.
    pub fn l2_norm(&self, lumped: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(lumped)
            .map(|(v, w)| v.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }
}

/// Samples the expansion trace on a uniform grid and returns the fitted
/// coefficients via FFT-free direct summation (used as an independent check).
pub fn trace_coefficients_by_sampling(
    f: &dyn Fn(f64) -> C64,
    alpha: f64,
    n_max: i64,
    samples: usize,
) -> Vec<C64> {
    let dx = 2.0 * std::f64::consts::PI / samples as f64;
    (-n_max..=n_max)
        .map(|n| {
            (0..samples)
                .map(|s| {
                    let x = s as f64 * dx;
                    f(x) * C64::from_polar(1.0, -(n as f64 + alpha) * x)
                })
                .sum::<C64>()
                / samples as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cell_mesh;
    use crate::profile::PeriodicProfile;

    fn field() -> ComplexField {
        let m = build_cell_mesh(&PeriodicProfile::flat(), 1.0, 0.3).unwrap();
        let values = m
            .mesh
            .nodes
            .iter()
            .map(|p| C64::new(p[1], p[0] * p[1]))
            .collect();
        ComplexField {
            mesh: m.mesh.clone(),
            values,
            alpha: C64::new(0.3, 0.0),
            representation: Representation::Periodic,
            h: 1.0,
            period: Some(2.0 * std::f64::consts::PI),
            above: None,
        }
    }

    #[test]
    fn representation_round_trip() {
        let f = field();
        let g = f.to_quasi_periodic().to_periodic();
        for (a, b) in f.values.iter().zip(&g.values) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn node_and_barycentre_values() {
        let f = field();
        let u = f.u_values();
        for i in [0usize, 5, 17] {
            let p = f.mesh.nodes[i];
            if p[0] > 0.0 && p[0] < 6.0 {
                assert!((f.evaluate_point(p).unwrap() - u[i]).norm() < 1e-12);
            }
        }
        let q = f.to_quasi_periodic();
        let t = q.mesh.triangles[3];
        let c = [0, 1].map(|d| t.iter().map(|&i| q.mesh.nodes[i][d]).sum::<f64>() / 3.0);
        let mean = t.iter().map(|&i| q.values[i]).sum::<C64>() / 3.0;
        assert!((q.evaluate_point(c).unwrap() - mean).norm() < 1e-12);
        assert!(matches!(
            q.evaluate_point([1.0, -0.5]),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn expansion_pure_mode() {
        let e = RayleighExpansion {
            alpha: C64::new(0.2, 0.0),
            k: C64::new(2.0, 0.0),
            spacing: 1.0,
            reference_height: 1.0,
            n_max: 3,
            coeffs: (0..7)
                .map(|i| {
                    if i == 4 {
                        C64::new(1.0, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect(),
            incident: None,
        };
        let c = trace_coefficients_by_sampling(&|x| e.evaluate([x, 1.0]), 0.2, 3, 64);
        for (i, v) in c.iter().enumerate() {
            let want = if i == 4 { 1.0 } else { 0.0 };
            assert!((v - want).norm() < 1e-12);
        }
        let d = e.dtn_apply();
        assert!((d[4] - C64::new(0.0, 1.0) * e.beta(1)).norm() < 1e-15);
    }
}
