//! Piecewise-linear finite element forms on triangulations.
//!
//! Forms are assembled in node numbering and mapped afterwards to degrees of
//! freedom, where Dirichlet nodes are split off and periodic partners merged.

use std::collections::HashMap;

use crate::linalg::Triplets;
use crate::mesh::{tag, BoundaryTag, TriMesh};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Area and shape-function gradients of a triangle.
pub fn element_geometry(p: [[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let area = 0.5 * det;
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        g[i] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
    }
    (area, g)
}

/// Node-numbered stiffness, mass and ∂₁ forms.
///
/// `k[i][j] = ∫∇φ_j·∇φ_i`, `mass[i][j] = ∫φ_jφ_i`, `c[i][j] = ∫∂₁φ_j φ_i`.
#[derive(Debug, Clone)]
pub struct NodeForms {
    pub k: Triplets,
    pub mass: Triplets,
    pub c: Triplets,
    /// Row sums of the mass matrix.
    pub lumped: Vec<f64>,
}

impl NodeForms {
    pub fn new(mesh: &TriMesh) -> Self {
        Self::weighted(mesh, &|_| None)
    }

    /// With an optional per-triangle anisotropic weight (w₁₁, w₂₂, w_m):
    /// ∫ w₁₁∂₁φ_j∂₁φ_i + w₂₂∂₂φ_j∂₂φ_i goes into `k`, ∫ w_m φ_jφ_i into `mass`.
    pub fn weighted(mesh: &TriMesh, weight: &dyn Fn(usize) -> Option<[C64; 3]>) -> Self {
        let n = mesh.nodes.len();
        let (mut k, mut mass, mut c) = (
            Triplets::new(n, n),
            Triplets::new(n, n),
            Triplets::new(n, n),
        );
        let mut lumped = vec![0.0; n];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let (area, g) = element_geometry(tri.map(|i| mesh.nodes[i]));
            let w = weight(t).unwrap_or([C64::new(1.0, 0.0); 3]);
            for a in 0..3 {
                lumped[tri[a]] += area / 3.0;
                for b in 0..3 {
                    let kv = w[0] * (g[a][0] * g[b][0]) + w[1] * (g[a][1] * g[b][1]);
                    k.push(tri[a], tri[b], kv * area);
                    let m = if a == b { area / 6.0 } else { area / 12.0 };
                    mass.push(tri[a], tri[b], w[2] * m);
                    c.push(tri[a], tri[b], C64::new(g[b][0] * area / 3.0, 0.0));
                }
            }
        }
        Self { k, mass, c, lumped }
    }
}

/// Degrees of freedom: Dirichlet nodes removed, periodic partners merged.
#[derive(Debug, Clone)]
pub struct DofMap {
    /// Free index of each node (partners share one), or None on Dirichlet nodes.
    pub node_dof: Vec<Option<usize>>,
    /// Dirichlet index of each Dirichlet node.
    pub node_dir: Vec<Option<usize>>,
    pub n_free: usize,
    pub dirichlet: Vec<usize>,
    /// Representative node of each free index.
    pub rep: Vec<usize>,
}

impl DofMap {
    /// Nodes carrying any bit of `dirichlet_bits` are Dirichlet nodes; the
    /// second node of each pair is identified with the first.
    pub fn new(mesh: &TriMesh, pairs: &[(usize, usize)], dirichlet_bits: u8) -> Self {
        let n = mesh.nodes.len();
        let partner: HashMap<usize, usize> = pairs.iter().map(|&(l, r)| (r, l)).collect();
        let mut node_dof = vec![None; n];
        let mut node_dir = vec![None; n];
        let mut dirichlet = Vec::new();
        let mut rep = Vec::new();
        for i in 0..n {
            if mesh.node_tags[i] & dirichlet_bits != 0 {
                node_dir[i] = Some(dirichlet.len());
                dirichlet.push(i);
            } else if !partner.contains_key(&i) {
                node_dof[i] = Some(rep.len());
                rep.push(i);
            }
        }
        for (&r, &l) in &partner {
            if node_dir[r].is_none() {
                node_dof[r] = node_dof[l];
            }
        }
        Self {
            node_dof,
            node_dir,
            n_free: rep.len(),
            dirichlet,
            rep,
        }
    }

    /// Splits a node-numbered matrix into the free×free and free×Dirichlet blocks.
    pub fn split(&self, t: &Triplets) -> (Triplets, Triplets) {
        let mut ff = Triplets::new(self.n_free, self.n_free);
        let mut fd = Triplets::new(self.n_free, self.dirichlet.len());
        for &(i, j, v) in &t.entries {
            if let Some(r) = self.node_dof[i] {
                if let Some(c) = self.node_dof[j] {
                    ff.push(r, c, v);
                } else if let Some(c) = self.node_dir[j] {
                    fd.push(r, c, v);
                }
            }
        }
        (ff, fd)
    }

    /// Sums a node vector into free indices (load vectors).
    pub fn restrict(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.n_free];
        for (i, d) in self.node_dof.iter().enumerate() {
            if let Some(d) = d {
                out[*d] += v[i];
            }
        }
        out
    }

    /// Node values from free values; Dirichlet nodes get `dir` (or zero).
    pub fn expand(&self, x: &[C64], dir: Option<&[C64]>) -> Vec<C64> {
        (0..self.node_dof.len())
            .map(|i| match (self.node_dof[i], self.node_dir[i]) {
                (Some(d), _) => x[d],
                (None, Some(d)) => dir.map_or(ZERO, |g| g[d]),
                (None, None) => ZERO,
            })
            .collect()
    }

    /// Free values from node values (representative nodes).
    pub fn gather(&self, v: &[C64]) -> Vec<C64> {
        self.rep.iter().map(|&i| v[i]).collect()
    }
}

/// ∫₀¹ e^{zt} dt and ∫₀¹ t e^{zt} dt.
fn exp_moments(z: C64) -> (C64, C64) {
    if z.norm() < 0.5 {
        let (mut f0, mut f1) = (ZERO, ZERO);
        let mut term = C64::new(1.0, 0.0); // z^m / m!
        for m in 0..30 {
            f0 += term / (m as f64 + 1.0);
            f1 += term / (m as f64 + 2.0);
            term *= z / (m as f64 + 1.0);
        }
        (f0, f1)
    } else {
        let e = z.exp();
        ((e - 1.0) / z, (e * (z - 1.0) + 1.0) / (z * z))
    }
}

/// Fourier moments of the hat functions on the top line x₂ = h.
#[derive(Debug, Clone)]
pub struct TopTrace {
    /// (left node, right node, x_left, x_right) per top edge.
    pub segments: Vec<(usize, usize, f64, f64)>,
    pub nodes: Vec<usize>,
    pub period: f64,
}

impl TopTrace {
    pub fn new(mesh: &TriMesh, period: f64) -> Self {
        let mut segments: Vec<(usize, usize, f64, f64)> = mesh
            .boundary_edges
            .iter()
            .filter(|(_, t)| *t == BoundaryTag::GammaH)
            .map(|(e, _)| {
                let (a, b) = if mesh.nodes[e[0]][0] < mesh.nodes[e[1]][0] {
                    (e[0], e[1])
                } else {
                    (e[1], e[0])
                };
                (a, b, mesh.nodes[a][0], mesh.nodes[b][0])
            })
            .collect();
        segments.sort_by(|p, q| p.2.total_cmp(&q.2));
        let mut nodes: Vec<usize> = segments.iter().flat_map(|s| [s.0, s.1]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        debug_assert!(mesh.nodes_with(tag::TOP).len() == nodes.len());
        Self {
            segments,
            nodes,
            period,
        }
    }

    /// t[j] = (1/L) ∫ φ_j e^{−iξx₁} dx₁ over the top line, per top node.
    pub fn moments(&self, xi: f64) -> Vec<(usize, C64)> {
        let mut acc: HashMap<usize, C64> = HashMap::new();
        for &(a, b, xa, xb) in &self.segments {
            let len = xb - xa;
            let z = C64::new(0.0, -xi * len);
            let (f0, f1) = exp_moments(z);
            let ph = C64::from_polar(len / self.period, -xi * xa);
            *acc.entry(a).or_insert(ZERO) += ph * (f0 - f1);
            *acc.entry(b).or_insert(ZERO) += ph * f1;
        }
        let mut out: Vec<(usize, C64)> = acc.into_iter().collect();
        out.sort_by_key(|p| p.0);
        out
    }

    /// (1/L) ∫ v e^{−iξx₁} dx₁ of a node vector.
    pub fn coefficient(&self, values: &[C64], xi: f64) -> C64 {
        self.moments(xi).iter().map(|&(j, t)| t * values[j]).sum()
    }

    /// L-periodic DtN form Σ_n L·iβ_n t_n[j] conj(t_n[i]) (node numbering).
    pub fn dtn(&self, n_nodes: usize, orders: &[(f64, C64)]) -> Triplets {
        let mut out = Triplets::new(n_nodes, n_nodes);
        for &(xi, beta) in orders {
            let t = self.moments(xi);
            let s = C64::new(0.0, self.period) * beta;
            for &(i, ti) in &t {
                for &(j, tj) in &t {
                    out.push(i, j, s * tj * ti.conj());
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::mesh::build_cell_mesh;
    use crate::profile::PeriodicProfile;
    use crate::wave::PERIOD;

    #[test]
    fn forms_integrate_known_functions() {
        let m = build_cell_mesh(&PeriodicProfile::sine(0.3).unwrap(), 1.5, 0.3).unwrap();
        let f = NodeForms::new(&m.mesh);
        let one = vec![C64::new(1.0, 0.0); m.mesh.nodes.len()];
        let area = dot(&one, &f.mass.apply(&one)).re;
        // ∫₀^{2π} (1.5 − 0.3 sin x) dx = 3π (up to the polygonal approximation)
        assert!((area - m.mesh.stats().area).abs() < 1e-10);
        assert!((area - 3.0 * std::f64::consts::PI).abs() < 1e-2);
        assert!(f.k.apply(&one).iter().all(|v| v.norm() < 1e-12));
        // ∫ ∂₁x · 1 = area
        let x: Vec<C64> = m.mesh.nodes.iter().map(|p| C64::new(p[0], 0.0)).collect();
        assert!((dot(&one, &f.c.apply(&x)).re - area).abs() < 1e-10);
        assert!((f.lumped.iter().sum::<f64>() - area).abs() < 1e-10);
    }

    #[test]
    fn top_moments_are_exact_for_linear_trace() {
        let m = build_cell_mesh(&PeriodicProfile::flat(), 1.0, 0.4).unwrap();
        let top = TopTrace::new(&m.mesh, PERIOD);
        // The hat expansion of cos(x) is not exact, but that of x is.
        let x: Vec<C64> = m.mesh.nodes.iter().map(|p| C64::new(p[0], 0.0)).collect();
        for n in [1.0f64, 2.0, 5.0] {
            // (1/2π)∫₀^{2π} x e^{−inx} dx = i/n
            let c = top.coefficient(&x, n);
            assert!((c - C64::new(0.0, 1.0 / n)).norm() < 1e-12, "{n}: {c}");
        }
        let c0 = top.coefficient(&x, 0.0);
        assert!((c0.re - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn exp_moment_branches_agree() {
        for z in [
            C64::new(0.0, 0.49),
            C64::new(0.0, 0.51),
            C64::new(0.2, -0.45),
        ] {
            let (a, b) = exp_moments(z);
            let e = z.exp();
            let (c, d) = ((e - 1.0) / z, (e * (z - 1.0) + 1.0) / (z * z));
            assert!((a - c).norm() < 1e-13 && (b - d).norm() < 1e-12);
        }
    }

    #[test]
    fn periodic_dof_map() {
        let m = build_cell_mesh(&PeriodicProfile::flat(), 1.0, 0.5).unwrap();
        let d = DofMap::new(&m.mesh, &m.periodic_pairs, tag::GAMMA);
        let top_side = m.periodic_pairs.len() - 1;
        assert_eq!(d.n_free + top_side + d.dirichlet.len(), m.mesh.nodes.len());
        for &(l, r) in &m.periodic_pairs {
            assert_eq!(d.node_dof[l], d.node_dof[r]);
        }
    }
}
