//! Triangulations of the truncated periodic cell and of perturbed supercells.
//!
//! Graph curves use a structured mapped grid; non-graph curves use a
//! constrained Delaunay triangulation whose boundary nodes follow the same
//! vertical layering, so periodic partners and seams between periods match
//! exactly.

mod cdt;
pub mod io;
mod mapped;

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::profile::{LocalPerturbation, PeriodicProfile};
use crate::wave::PERIOD;

/// Node tag bits.
pub mod tag {
    pub const GAMMA: u8 = 1;
    pub const TOP: u8 = 2;
    pub const LEFT: u8 = 4;
    pub const RIGHT: u8 = 8;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Gamma,
    GammaH,
    Left,
    Right,
}

impl BoundaryTag {
    pub fn bit(self) -> u8 {
        match self {
            BoundaryTag::Gamma => tag::GAMMA,
            BoundaryTag::GammaH => tag::TOP,
            BoundaryTag::Left => tag::LEFT,
            BoundaryTag::Right => tag::RIGHT,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Gamma => "gamma",
            BoundaryTag::GammaH => "top",
            BoundaryTag::Left => "left",
            BoundaryTag::Right => "right",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "gamma" => Some(BoundaryTag::Gamma),
            "top" => Some(BoundaryTag::GammaH),
            "left" => Some(BoundaryTag::Left),
            "right" => Some(BoundaryTag::Right),
            _ => None,
        }
    }
}

/// Raw output of a generator before merging.
pub(crate) struct Piece {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<([usize; 2], BoundaryTag)>,
}

/// The curve of one period, used to generate and to refine meshes.
#[derive(Debug, Clone, PartialEq)]
pub enum CopyCurve {
    Profile(PeriodicProfile),
    Perturbed(PeriodicProfile, LocalPerturbation),
}

impl CopyCurve {
    pub fn is_graph(&self) -> bool {
        match self {
            CopyCurve::Profile(p) => p.is_graph,
            CopyCurve::Perturbed(p, d) => d.is_graph(p),
        }
    }

    /// Height of the curve at local abscissa x ∈ [0, 2π] for graph curves.
    pub fn graph_value(&self, x: f64) -> Option<f64> {
        match self {
            CopyCurve::Profile(p) => p.graph_value(x),
            CopyCurve::Perturbed(p, d) => d.graph_value(p, x),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            CopyCurve::Profile(p) => p.breakpoints(),
            CopyCurve::Perturbed(p, d) => d.breakpoints(p),
        }
    }

    pub fn polyline(&self) -> Vec<[f64; 2]> {
        match self {
            CopyCurve::Profile(p) => p.vertices().to_vec(),
            CopyCurve::Perturbed(p, d) => d.perturbed_polyline(p),
        }
    }

    fn end_height(&self) -> f64 {
        match self {
            CopyCurve::Profile(p) => p.vertices()[0][1],
            CopyCurve::Perturbed(p, _) => p.vertices()[0][1],
        }
    }

    pub fn height_max(&self) -> f64 {
        self.polyline()
            .iter()
            .map(|p| p[1])
            .fold(f64::NEG_INFINITY, f64::max)
            .max(match self {
                CopyCurve::Profile(p) => p.height_max,
                CopyCurve::Perturbed(p, _) => p.height_max,
            })
    }

    /// Layers a structured copy needs (graph) or the side height alone (non-graph).
    fn layers(&self, h: f64, max_len: f64) -> usize {
        match self.graph_value(0.0) {
            Some(_) => {
                let f = |x: f64| self.graph_value(x).unwrap();
                let xs = mapped::columns(&self.breakpoints(), &f, max_len);
                mapped::layers_for(&xs, &f, h, max_len)
            }
            None => (((h - self.end_height()) / max_len).ceil() as usize).max(1),
        }
    }

    /// Meshes the period translated by `dx` with `n2` side layers.
    fn mesh(&self, dx: f64, h: f64, n2: usize, target: f64) -> Result<Piece> {
        let max_len = 0.7 * target;
        if self.is_graph() {
            let f = |x: f64| self.graph_value(x).unwrap();
            let xs = mapped::columns(&self.breakpoints(), &f, max_len);
            let g = |x: f64| self.graph_value(x - dx).unwrap();
            let xs: Vec<f64> = xs.iter().map(|x| x + dx).collect();
            Ok(mapped::build(&xs, &g, h, n2))
        } else {
            let curve: Vec<[f64; 2]> = self.polyline().iter().map(|p| [p[0] + dx, p[1]]).collect();
            let y0 = self.end_height();
            let levels: Vec<f64> = (0..=n2)
                .map(|j| {
                    if j == n2 {
                        h
                    } else {
                        y0 + (h - y0) * j as f64 / n2 as f64
                    }
                })
                .collect();
            cdt::build(&curve, &levels, h, target)
        }
    }
}

/// Bucket grid for point location.
#[derive(Debug, Clone)]
struct Locator {
    lo: [f64; 2],
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<u32>>,
}

/// An oriented triangulation with tagged boundary edges.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    pub node_tags: Vec<u8>,
    locator: OnceLock<Locator>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub nodes: usize,
    pub triangles: usize,
    pub max_edge: f64,
    pub min_area: f64,
    pub area: f64,
}

impl TriMesh {
    pub fn new(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    ) -> Self {
        let mut node_tags = vec![0u8; nodes.len()];
        for (e, t) in &boundary_edges {
            node_tags[e[0]] |= t.bit();
            node_tags[e[1]] |= t.bit();
        }
        Self {
            nodes,
            triangles,
            boundary_edges,
            node_tags,
            locator: OnceLock::new(),
        }
    }

    fn from_pieces(
        pieces: &[Piece],
        keep: &dyn Fn(BoundaryTag, [f64; 2], [f64; 2]) -> bool,
    ) -> Self {
        let mut nodes: Vec<[f64; 2]> = Vec::new();
        let mut map: HashMap<(i64, i64), usize> = HashMap::new();
        let mut triangles = Vec::new();
        let mut edges = Vec::new();
        for piece in pieces {
            let ids: Vec<usize> = piece
                .nodes
                .iter()
                .map(|p| {
                    *map.entry(hash_key(*p)).or_insert_with(|| {
                        nodes.push(*p);
                        nodes.len() - 1
                    })
                })
                .collect();
            for t in &piece.triangles {
                let mut tri = [ids[t[0]], ids[t[1]], ids[t[2]]];
                if signed_area(&nodes, tri) < 0.0 {
                    tri.swap(1, 2);
                }
                triangles.push(tri);
            }
            for (e, tg) in &piece.edges {
                let (a, b) = (ids[e[0]], ids[e[1]]);
                if keep(*tg, nodes[a], nodes[b]) {
                    edges.push(([a, b], *tg));
                }
            }
        }
        Self::new(nodes, triangles, edges)
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.nodes, self.triangles[t])
    }

    pub fn has_tag(&self, node: usize, bit: u8) -> bool {
        self.node_tags[node] & bit != 0
    }

    /// Unique undirected edges, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut e: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|t| [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]])
            .map(|[a, b]| if a < b { [a, b] } else { [b, a] })
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    pub fn max_edge(&self) -> f64 {
        self.edges()
            .iter()
            .map(|&[a, b]| dist(self.nodes[a], self.nodes[b]))
            .fold(0.0, f64::max)
    }

    pub fn stats(&self) -> MeshStats {
        let areas: Vec<f64> = (0..self.triangles.len()).map(|t| self.area(t)).collect();
        MeshStats {
            nodes: self.nodes.len(),
            triangles: self.triangles.len(),
            max_edge: self.max_edge(),
            min_area: areas.iter().copied().fold(f64::INFINITY, f64::min),
            area: areas.iter().sum(),
        }
    }

    /// Area enclosed by the tagged boundary edges (shoelace over the oriented loop).
    pub fn boundary_area(&self) -> f64 {
        0.5 * self
            .boundary_edges
            .iter()
            .map(|(e, _)| {
                let (p, q) = (self.nodes[e[0]], self.nodes[e[1]]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum::<f64>()
    }

    /// Checks orientation, non-degeneracy, Euler characteristic of a disc,
    /// coverage of the boundary polygon and closure of the tagged boundary.
    pub fn validate(&self) -> Result<MeshStats> {
        let st = self.stats();
        let mean = st.area / st.triangles.max(1) as f64;
        if st.min_area <= 1e-14 * mean {
            return Err(Error::MeshFailure(format!(
                "degenerate or inverted triangle (min area {:.3e})",
                st.min_area
            )));
        }
        let v = self.nodes.len() as i64;
        let e = self.edges().len() as i64;
        let f = self.triangles.len() as i64;
        if v - e + f != 1 {
            return Err(Error::MeshFailure(format!(
                "Euler characteristic V-E+F = {} (expected 1)",
                v - e + f
            )));
        }
        // Boundary edges of the triangulation must equal the tagged edges.
        let mut count: HashMap<[usize; 2], i32> = HashMap::new();
        for t in &self.triangles {
            for [a, b] in [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]] {
                *count
                    .entry(if a < b { [a, b] } else { [b, a] })
                    .or_default() += 1;
            }
        }
        let mut border: Vec<[usize; 2]> = count
            .iter()
            .filter(|(_, c)| **c == 1)
            .map(|(k, _)| *k)
            .collect();
        border.sort_unstable();
        let mut tagged: Vec<[usize; 2]> = self
            .boundary_edges
            .iter()
            .map(|(e, _)| if e[0] < e[1] { *e } else { [e[1], e[0]] })
            .collect();
        tagged.sort_unstable();
        if border != tagged {
            return Err(Error::MeshFailure(format!(
                "tagged boundary ({} edges) differs from mesh boundary ({} edges)",
                tagged.len(),
                border.len()
            )));
        }
        if count.values().any(|c| *c > 2) {
            return Err(Error::MeshFailure("non-manifold edge".into()));
        }
        let ba = self.boundary_area();
        if ((ba - st.area) / st.area).abs() > 1e-10 {
            return Err(Error::MeshFailure(format!(
                "area mismatch: triangles {} vs boundary polygon {}",
                st.area, ba
            )));
        }
        Ok(st)
    }

    fn locator(&self) -> &Locator {
        self.locator.get_or_init(|| {
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in &self.nodes {
                for d in 0..2 {
                    lo[d] = lo[d].min(p[d]);
                    hi[d] = hi[d].max(p[d]);
                }
            }
            let area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
            let cell = (2.0 * area / self.triangles.len().max(1) as f64)
                .sqrt()
                .max(1e-9);
            let dims = [
                ((hi[0] - lo[0]) / cell).ceil() as usize + 1,
                ((hi[1] - lo[1]) / cell).ceil() as usize + 1,
            ];
            let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
            for (ti, t) in self.triangles.iter().enumerate() {
                let ps = t.map(|i| self.nodes[i]);
                let bx0 = ((ps.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min) - lo[0]) / cell)
                    .floor() as usize;
                let bx1 = ((ps.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max) - lo[0])
                    / cell)
                    .floor() as usize;
                let by0 = ((ps.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min) - lo[1]) / cell)
                    .floor() as usize;
                let by1 = ((ps.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max) - lo[1])
                    / cell)
                    .floor() as usize;
                for bx in bx0..=bx1.min(dims[0] - 1) {
                    for by in by0..=by1.min(dims[1] - 1) {
                        buckets[bx * dims[1] + by].push(ti as u32);
                    }
                }
            }
            Locator {
                lo,
                cell,
                dims,
                buckets,
            }
        })
    }

    /// Triangle containing `p` and its barycentric coordinates.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let loc = self.locator();
        let bx = ((p[0] - loc.lo[0]) / loc.cell).floor();
        let by = ((p[1] - loc.lo[1]) / loc.cell).floor();
        if bx < 0.0 || by < 0.0 || bx as usize >= loc.dims[0] || by as usize >= loc.dims[1] {
            return None;
        }
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &loc.buckets[bx as usize * loc.dims[1] + by as usize] {
            let b = self.barycentric(t as usize, p);
            let worst = b.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= -1e-12 {
                return Some((t as usize, b));
            }
            if best.is_none_or(|(_, _, w)| worst > w) {
                best = Some((t as usize, b, worst));
            }
        }
        // Points on a boundary edge may fail the test by round-off.
        best.filter(|(_, _, w)| *w > -1e-9).map(|(t, b, _)| (t, b))
    }

    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((b[0] - p[0]) * (c[1] - p[1]) - (c[0] - p[0]) * (b[1] - p[1])) / det;
        let l2 = ((c[0] - p[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (c[1] - p[1])) / det;
        [l1, l2, 1.0 - l1 - l2]
    }

    /// Uniform red refinement; midpoints of Gamma edges are moved onto the
    /// curve by `snap` (x ↦ height) when it returns a value.
    pub fn refine_red(&self, snap: &dyn Fn(f64) -> Option<f64>) -> TriMesh {
        let mut nodes = self.nodes.clone();
        let gamma: std::collections::HashSet<[usize; 2]> = self
            .boundary_edges
            .iter()
            .filter(|(_, t)| *t == BoundaryTag::Gamma)
            .map(|(e, _)| if e[0] < e[1] { *e } else { [e[1], e[0]] })
            .collect();
        let mut mid: HashMap<[usize; 2], usize> = HashMap::new();
        for e in self.edges() {
            let (p, q) = (self.nodes[e[0]], self.nodes[e[1]]);
            let mut m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            if gamma.contains(&e) {
                if let Some(y) = snap(m[0]) {
                    m[1] = y;
                }
            }
            nodes.push(m);
            mid.insert(e, nodes.len() - 1);
        }
        let m = |a: usize, b: usize| mid[&if a < b { [a, b] } else { [b, a] }];
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
            triangles.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        let mut edges = Vec::with_capacity(2 * self.boundary_edges.len());
        for &([a, b], t) in &self.boundary_edges {
            let c = m(a, b);
            edges.push(([a, c], t));
            edges.push(([c, b], t));
        }
        TriMesh::new(nodes, triangles, edges)
    }

    pub fn nodes_with(&self, bit: u8) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.has_tag(i, bit))
            .collect()
    }
}

pub(crate) fn hash_key(p: [f64; 2]) -> (i64, i64) {
    ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64)
}

fn signed_area(nodes: &[[f64; 2]], t: [usize; 3]) -> f64 {
    let [a, b, c] = t.map(|i| nodes[i]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Pairs nodes tagged `a` with nodes tagged `b` at the same height.
fn pair_sides(mesh: &TriMesh, a: u8, b: u8) -> Result<Vec<(usize, usize)>> {
    let mut la: Vec<usize> = mesh.nodes_with(a);
    let mut lb: Vec<usize> = mesh.nodes_with(b);
    la.sort_by(|&i, &j| mesh.nodes[i][1].total_cmp(&mesh.nodes[j][1]));
    lb.sort_by(|&i, &j| mesh.nodes[i][1].total_cmp(&mesh.nodes[j][1]));
    if la.len() != lb.len() {
        return Err(Error::MeshFailure(format!(
            "{} left nodes but {} right nodes",
            la.len(),
            lb.len()
        )));
    }
    for (&i, &j) in la.iter().zip(&lb) {
        if (mesh.nodes[i][1] - mesh.nodes[j][1]).abs() > 1e-12 {
            return Err(Error::MeshFailure(format!(
                "unpaired side node at heights {} / {}",
                mesh.nodes[i][1], mesh.nodes[j][1]
            )));
        }
    }
    Ok(la.into_iter().zip(lb).collect())
}

/// Triangulation of the truncated cell Q_h = {0 < x₁ < 2π, curve < x₂ < h}.
#[derive(Debug, Clone)]
pub struct CellMesh {
    pub mesh: Arc<TriMesh>,
    pub periodic_pairs: Vec<(usize, usize)>,
    pub h: f64,
    pub curve: CopyCurve,
    pub target_size: f64,
    pub refinements: usize,
}

/// Builds the cell mesh for a profile; `target_size` bounds the edge length.
pub fn build_cell_mesh(profile: &PeriodicProfile, h: f64, target_size: f64) -> Result<CellMesh> {
    build_cell_mesh_for(CopyCurve::Profile(profile.clone()), h, target_size, None)
}

pub(crate) fn build_cell_mesh_for(
    curve: CopyCurve,
    h: f64,
    target: f64,
    n2: Option<usize>,
) -> Result<CellMesh> {
    if !(target > 0.0) {
        return Err(Error::InvalidParameter(
            "target_size must be positive".into(),
        ));
    }
    if h <= curve.height_max() {
        return Err(Error::MeshFailure(format!(
            "h = {h} does not exceed the profile maximum {}",
            curve.height_max()
        )));
    }
    let n2 = n2.unwrap_or_else(|| curve.layers(h, 0.7 * target));
    let piece = curve.mesh(0.0, h, n2, target)?;
    let mesh = Arc::new(TriMesh::from_pieces(&[piece], &|_, _, _| true));
    let periodic_pairs = pair_sides(&mesh, tag::LEFT, tag::RIGHT)?;
    let cell = CellMesh {
        mesh,
        periodic_pairs,
        h,
        curve,
        target_size: target,
        refinements: 0,
    };
    cell.validate()?;
    Ok(cell)
}

impl CellMesh {
    pub fn validate(&self) -> Result<MeshStats> {
        let st = self.mesh.validate()?;
        for &(l, r) in &self.periodic_pairs {
            let (p, q) = (self.mesh.nodes[l], self.mesh.nodes[r]);
            if (q[0] - p[0] - PERIOD).abs() > 1e-12 || (q[1] - p[1]).abs() > 1e-12 {
                return Err(Error::MeshFailure(format!(
                    "periodic pair {l}-{r} is not a 2pi translate"
                )));
            }
        }
        Ok(st)
    }

    pub fn snap(&self, x: f64) -> Option<f64> {
        if !(-1e-12..=PERIOD + 1e-12).contains(&x) {
            return None;
        }
        self.curve.graph_value(x.clamp(0.0, PERIOD))
    }

    /// Red refinement with Gamma midpoints moved onto the exact curve.
    pub fn refine(&self) -> Result<CellMesh> {
        let mesh = Arc::new(self.mesh.refine_red(&|x| self.snap(x)));
        let periodic_pairs = pair_sides(&mesh, tag::LEFT, tag::RIGHT)?;
        let out = CellMesh {
            mesh,
            periodic_pairs,
            h: self.h,
            curve: self.curve.clone(),
            target_size: 0.5 * self.target_size,
            refinements: self.refinements + 1,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn refine_times(&self, n: usize) -> Result<CellMesh> {
        let mut m = self.clone();
        for _ in 0..n {
            m = m.refine()?;
        }
        Ok(m)
    }

    /// Number of vertical layers on the periodic sides.
    pub fn side_layers(&self) -> usize {
        self.periodic_pairs.len() - 1
    }
}

/// N periods of the unperturbed curve with the perturbed copy over [0, 2π]
/// and lateral absorbing regions next to the outer walls.
#[derive(Debug, Clone)]
pub struct SupercellMesh {
    pub mesh: Arc<TriMesh>,
    pub h: f64,
    pub n_periods: usize,
    /// Index of the perturbed copy (always 0: the copy over [0, 2π]).
    pub center_offset: i64,
    pub x_left: f64,
    pub x_right: f64,
    pub pml_width: f64,
    pub pml_tags: Vec<bool>,
    pub profile: PeriodicProfile,
    pub perturbation: Option<LocalPerturbation>,
    /// The unperturbed cell whose translates form the other copies.
    pub cell: Arc<CellMesh>,
    /// For nodes that coincide with a translate of a cell node: (copy, cell node).
    pub node_origin: Vec<Option<(i64, usize)>>,
    pub target_size: f64,
}

pub fn build_supercell_mesh(
    profile: &PeriodicProfile,
    perturbation: Option<&LocalPerturbation>,
    h: f64,
    n_periods: usize,
    pml_width: f64,
    target_size: f64,
) -> Result<SupercellMesh> {
    if n_periods < 3 || n_periods.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "n_periods must be odd and >= 3, got {n_periods}"
        )));
    }
    if pml_width < PERIOD - 1e-12 {
        return Err(Error::InvalidParameter(
            "pml_width must be at least one period".into(),
        ));
    }
    let half = (n_periods as i64 - 1) / 2;
    let width = n_periods as f64 * PERIOD;
    if 2.0 * pml_width > width - PERIOD + 1e-9 {
        return Err(Error::InvalidParameter(
            "absorbing layers leave no room for the perturbed period".into(),
        ));
    }
    let max_len = 0.7 * target_size;
    let base = CopyCurve::Profile(profile.clone());
    let pert_curve = perturbation.map(|d| CopyCurve::Perturbed(profile.clone(), d.clone()));
    if let Some(c) = &pert_curve {
        if h <= c.height_max() {
            return Err(Error::MeshFailure(format!(
                "h = {h} does not exceed the perturbed curve maximum"
            )));
        }
    }
    let n2 = base
        .layers(h, max_len)
        .max(pert_curve.as_ref().map_or(0, |c| c.layers(h, max_len)));
    let cell = build_cell_mesh_for(base.clone(), h, target_size, Some(n2))?;

    let mut pieces = Vec::new();
    for m in -half..=half {
        if m == 0 {
            continue;
        }
        pieces.push(base.mesh(m as f64 * PERIOD, h, n2, target_size)?);
    }
    pieces.push(match &pert_curve {
        Some(c) => c.mesh(0.0, h, n2, target_size)?,
        None => base.mesh(0.0, h, n2, target_size)?,
    });
    let x_left = -(half as f64) * PERIOD;
    let x_right = (half + 1) as f64 * PERIOD;
    let keep = |t: BoundaryTag, p: [f64; 2], _q: [f64; 2]| match t {
        BoundaryTag::Left => (p[0] - x_left).abs() < 1e-9,
        BoundaryTag::Right => (p[0] - x_right).abs() < 1e-9,
        _ => true,
    };
    let mesh = TriMesh::from_pieces(&pieces, &keep);
    finish_supercell(
        mesh,
        profile,
        perturbation.cloned(),
        h,
        n_periods,
        pml_width,
        target_size,
        Arc::new(cell),
    )
}

#[allow(clippy::too_many_arguments)]
fn finish_supercell(
    mesh: TriMesh,
    profile: &PeriodicProfile,
    perturbation: Option<LocalPerturbation>,
    h: f64,
    n_periods: usize,
    pml_width: f64,
    target_size: f64,
    cell: Arc<CellMesh>,
) -> Result<SupercellMesh> {
    let half = (n_periods as i64 - 1) / 2;
    let x_left = -(half as f64) * PERIOD;
    let x_right = (half + 1) as f64 * PERIOD;
    let pml_tags = mesh
        .triangles
        .iter()
        .map(|t| {
            let cx = t.iter().map(|&i| mesh.nodes[i][0]).sum::<f64>() / 3.0;
            cx < x_left + pml_width || cx > x_right - pml_width
        })
        .collect();
    if let Some(d) = &perturbation {
        let c = d.bounding_disc;
        if c.center[0] - c.radius < x_left + pml_width
            || c.center[0] + c.radius > x_right - pml_width
        {
            return Err(Error::MeshFailure(
                "bounding disc reaches into the absorbing layers".into(),
            ));
        }
    }
    let lookup: HashMap<(i64, i64), usize> = cell
        .mesh
        .nodes
        .iter()
        .enumerate()
        .map(|(i, p)| (hash_key(*p), i))
        .collect();
    let node_origin = mesh
        .nodes
        .iter()
        .map(|p| {
            let m = (p[0] / PERIOD).floor() as i64;
            for mm in [m, m - 1, m + 1] {
                if mm == 0 && perturbation.is_some() {
                    continue;
                }
                if let Some(&i) = lookup.get(&hash_key([p[0] - mm as f64 * PERIOD, p[1]])) {
                    return Some((mm, i));
                }
            }
            None
        })
        .collect();
    let sc = SupercellMesh {
        mesh: Arc::new(mesh),
        h,
        n_periods,
        center_offset: 0,
        x_left,
        x_right,
        pml_width,
        pml_tags,
        profile: profile.clone(),
        perturbation,
        cell,
        node_origin,
        target_size,
    };
    sc.mesh.validate()?;
    Ok(sc)
}

impl SupercellMesh {
    pub fn width(&self) -> f64 {
        self.x_right - self.x_left
    }

    pub fn curve_of_copy(&self, m: i64) -> CopyCurve {
        match (&self.perturbation, m) {
            (Some(d), 0) => CopyCurve::Perturbed(self.profile.clone(), d.clone()),
            _ => CopyCurve::Profile(self.profile.clone()),
        }
    }

    pub fn snap(&self, x: f64) -> Option<f64> {
        let m = (x / PERIOD).floor() as i64;
        let local = x - m as f64 * PERIOD;
        self.curve_of_copy(m).graph_value(local)
    }

    /// Red refinement of both the supercell and its cell.
    pub fn refine(&self) -> Result<SupercellMesh> {
        let mesh = self.mesh.refine_red(&|x| self.snap(x));
        let cell = self.cell.refine()?;
        finish_supercell(
            mesh,
            &self.profile,
            self.perturbation.clone(),
            self.h,
            self.n_periods,
            self.pml_width,
            0.5 * self.target_size,
            Arc::new(cell),
        )
    }

    /// Inner edge of the absorbing layers: (left, right).
    pub fn window(&self) -> (f64, f64) {
        (self.x_left + self.pml_width, self.x_right - self.pml_width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn flat_cell_basic() {
        let m = build_cell_mesh(&PeriodicProfile::flat(), 1.0, 0.5).unwrap();
        let st = m.validate().unwrap();
        assert!(st.max_edge <= 0.5);
        assert!((st.area - PERIOD).abs() < 1e-12);
        let left = m.mesh.nodes_with(tag::LEFT).len();
        assert_eq!(m.periodic_pairs.len(), left);
    }

    #[test]
    fn echelle_has_corner_nodes() {
        let m = build_cell_mesh(&PeriodicProfile::echelle(), 2.0 * PI, 0.1).unwrap();
        let st = m.validate().unwrap();
        assert!(st.max_edge <= 0.1);
        for c in [[FRAC_PI_2, FRAC_PI_2], [1.5 * PI, FRAC_PI_2]] {
            assert!(m
                .mesh
                .nodes
                .iter()
                .enumerate()
                .any(|(i, p)| m.mesh.has_tag(i, tag::GAMMA) && dist(*p, c) < 1e-12));
        }
        assert!((st.area - (2.0 * PI * 2.0 * PI - PI * PI / 2.0)).abs() < 1e-9);
    }

    #[test]
    fn refinement_counts() {
        let m = build_cell_mesh(&PeriodicProfile::flat(), 1.0, 0.5).unwrap();
        let r = m.refine().unwrap();
        assert_eq!(r.mesh.triangles.len(), 4 * m.mesh.triangles.len());
        assert_eq!(r.periodic_pairs.len(), 2 * m.periodic_pairs.len() - 1);
        let ratio = r.mesh.nodes.len() as f64 / m.mesh.nodes.len() as f64;
        assert!(ratio > 3.0 && ratio < 4.2, "{ratio}");
        let rr = r.refine().unwrap();
        assert!((rr.mesh.max_edge() - 0.25 * m.mesh.max_edge()).abs() < 1e-12);
    }

    #[test]
    fn sine_refinement_snaps_to_curve() {
        let m = build_cell_mesh(&PeriodicProfile::sine(0.3).unwrap(), 1.0, 0.3)
            .unwrap()
            .refine()
            .unwrap();
        for i in m.mesh.nodes_with(tag::GAMMA) {
            let p = m.mesh.nodes[i];
            assert!((p[1] - 0.3 * p[0].sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn resonator_cell() {
        let p = PeriodicProfile::default_resonator().unwrap();
        let m = build_cell_mesh(&p, 1.0, 0.3).unwrap();
        let st = m.validate().unwrap();
        assert!(st.max_edge <= 0.3);
        let exact = PERIOD * 1.0 + 0.4 * 4.0 + 4.0 * 3.0;
        assert!((st.area - exact).abs() < 1e-9, "{} vs {exact}", st.area);
        let again = build_cell_mesh(&p, 1.0, 0.3).unwrap();
        assert_eq!(again.mesh.nodes, m.mesh.nodes);
        assert_eq!(again.mesh.triangles, m.mesh.triangles);
        let r = m.refine().unwrap();
        r.validate().unwrap();
    }

    #[test]
    fn trivial_supercell_is_tiling() {
        let p = PeriodicProfile::flat();
        let s = build_supercell_mesh(&p, None, 1.0, 3, PERIOD, 0.5).unwrap();
        let c = build_cell_mesh(&p, 1.0, 0.5).unwrap();
        assert_eq!(s.mesh.triangles.len(), 3 * c.mesh.triangles.len());
        assert_eq!(
            s.mesh.nodes.len(),
            3 * c.mesh.nodes.len() - 2 * c.periodic_pairs.len()
        );
        assert!(s.node_origin.iter().all(|o| o.is_some()));
    }

    #[test]
    fn echelle_supercell_defect() {
        let p = PeriodicProfile::echelle();
        let d = LocalPerturbation::echelle_defect();
        let s = build_supercell_mesh(&p, Some(&d), 2.0 * PI, 5, PERIOD, 0.2).unwrap();
        assert!(s
            .mesh
            .nodes
            .iter()
            .enumerate()
            .any(|(i, q)| s.mesh.has_tag(i, tag::GAMMA) && dist(*q, [PI, PI]) < 1e-12));
        assert!(s.pml_tags.iter().any(|t| *t) && s.pml_tags.iter().any(|t| !*t));
    }

    #[test]
    fn notch_supercell_gamma_length() {
        let p = PeriodicProfile::flat();
        let d = LocalPerturbation::notch(&p, 1.0, 0.3).unwrap();
        let s = build_supercell_mesh(&p, Some(&d), 1.0, 5, PERIOD, 0.1).unwrap();
        let len: f64 = s
            .mesh
            .boundary_edges
            .iter()
            .filter(|(_, t)| *t == BoundaryTag::Gamma)
            .map(|(e, _)| dist(s.mesh.nodes[e[0]], s.mesh.nodes[e[1]]))
            .sum();
        assert!((len - (5.0 * PERIOD + 0.6)).abs() < 1e-9, "{len}");
        let r = s.refine().unwrap();
        assert_eq!(r.mesh.triangles.len(), 4 * s.mesh.triangles.len());
    }
}
