//! Constrained Delaunay meshing of a single period bounded by a non-graph curve.
//!
//! The boundary polygon is pre-split and its edges are frozen during
//! refinement, so side nodes coincide with the structured layering of the
//! neighbouring periods.

use std::collections::HashMap;

use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation,
};

use super::{BoundaryTag, Piece};
use crate::error::{Error, Result};

fn split_segment(a: [f64; 2], b: [f64; 2], max_len: f64) -> Vec<[f64; 2]> {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let m = (len / max_len).ceil().max(1.0) as usize;
    (0..m)
        .map(|i| {
            let t = i as f64 / m as f64;
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        })
        .collect()
}

/// Meshes the polygon formed by `curve` (left to right), the right side
/// through `levels`, the top line and the left side through `levels`.
pub fn build(curve: &[[f64; 2]], levels: &[f64], h: f64, target: f64) -> Result<Piece> {
    let max_len = 0.7 * target;
    let (xl, xr) = (curve[0][0], curve[curve.len() - 1][0]);
    let mut poly: Vec<[f64; 2]> = Vec::new();
    let mut tags: Vec<BoundaryTag> = Vec::new();
    for w in curve.windows(2) {
        for p in split_segment(w[0], w[1], max_len) {
            poly.push(p);
            tags.push(BoundaryTag::Gamma);
        }
    }
    for &y in &levels[..levels.len() - 1] {
        poly.push([xr, y]);
        tags.push(BoundaryTag::Right);
    }
    for p in split_segment([xr, h], [xl, h], max_len) {
        poly.push(p);
        tags.push(BoundaryTag::GammaH);
    }
    for &y in levels[1..].iter().rev() {
        poly.push([xl, y]);
        tags.push(BoundaryTag::Left);
    }
    let nb = poly.len();

    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &poly {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let pad = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let mut verts: Vec<Point2<f64>> = poly.iter().map(|p| Point2::new(p[0], p[1])).collect();
    for c in [
        [lo[0] - pad, lo[1] - pad],
        [hi[0] + pad, lo[1] - pad],
        [hi[0] + pad, hi[1] + pad],
        [lo[0] - pad, hi[1] + pad],
    ] {
        verts.push(Point2::new(c[0], c[1]));
    }
    let edges: Vec<[usize; 2]> = (0..nb).map(|i| [i, (i + 1) % nb]).collect();

    let mut area = 0.3 * target * target;
    for _attempt in 0..10 {
        let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
            ConstrainedDelaunayTriangulation::bulk_load_cdt(verts.clone(), edges.clone()).map_err(
                |e| Error::MeshFailure(format!("constrained triangulation failed: {e:?}")),
            )?;
        let params = RefinementParameters::<f64>::new()
            .exclude_outer_faces(true)
            .keep_constraint_edges()
            .with_max_allowed_area(area)
            .with_angle_limit(AngleLimit::from_deg(25.0))
            .with_max_additional_vertices(2_000_000);
        let result = cdt.refine(params);
        if !result.refinement_complete {
            return Err(Error::MeshFailure("refinement did not complete".into()));
        }
        let excluded: std::collections::HashSet<usize> =
            result.excluded_faces.iter().map(|f| f.index()).collect();

        let key = |p: Point2<f64>| (p.x.to_bits(), p.y.to_bits());
        let mut index_of: HashMap<(u64, u64), usize> = HashMap::new();
        let mut nodes: Vec<[f64; 2]> = poly.clone();
        for (i, p) in verts.iter().take(nb).enumerate() {
            index_of.insert(key(*p), i);
        }
        let mut triangles = Vec::new();
        for face in cdt.inner_faces() {
            if excluded.contains(&face.fix().index()) {
                continue;
            }
            let pos = face.positions();
            let mut tri = [0usize; 3];
            for (t, p) in tri.iter_mut().zip(pos) {
                *t = *index_of.entry(key(p)).or_insert_with(|| {
                    nodes.push([p.x, p.y]);
                    nodes.len() - 1
                });
            }
            triangles.push(tri);
        }
        let max_edge = triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (nodes[a][0] - nodes[b][0]).hypot(nodes[a][1] - nodes[b][1]))
            .fold(0.0, f64::max);
        if max_edge <= target {
            let edges = (0..nb).map(|i| ([i, (i + 1) % nb], tags[i])).collect();
            return Ok(Piece {
                nodes,
                triangles,
                edges,
            });
        }
        area *= 0.6;
    }
    Err(Error::MeshFailure(
        "could not meet the target edge length".into(),
    ))
}
