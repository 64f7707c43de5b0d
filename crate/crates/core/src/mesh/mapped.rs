//! Structured mapped grid between a graph curve and the line x₂ = h.

use super::{BoundaryTag, Piece};

/// Column abscissae between the breakpoints so that both the column spacing
/// and the curve chord stay below `max_len`.
pub fn columns(breakpoints: &[f64], f: &dyn Fn(f64) -> f64, max_len: f64) -> Vec<f64> {
    let mut xs = vec![breakpoints[0]];
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 1e-12 {
            continue;
        }
        let mut m = ((b - a).hypot(f(b) - f(a)) / max_len).ceil().max(1.0) as usize;
        loop {
            let ok = (0..m).all(|i| {
                let x0 = a + (b - a) * i as f64 / m as f64;
                let x1 = a + (b - a) * (i + 1) as f64 / m as f64;
                (x1 - x0).hypot(f(x1) - f(x0)) <= max_len
            });
            if ok {
                break;
            }
            m += 1;
        }
        for i in 1..m {
            xs.push(a + (b - a) * i as f64 / m as f64);
        }
        xs.push(b);
    }
    xs
}

/// Number of layers needed for the tallest column.
pub fn layers_for(xs: &[f64], f: &dyn Fn(f64) -> f64, h: f64, max_len: f64) -> usize {
    xs.iter()
        .map(|&x| ((h - f(x)) / max_len).ceil() as usize)
        .max()
        .unwrap_or(1)
        .max(1)
}

/// Node (i, j) sits at (x_i, f_i + (h − f_i) j / n2). Quads are split along
/// the shorter diagonal.
pub fn build(xs: &[f64], f: &dyn Fn(f64) -> f64, h: f64, n2: usize) -> Piece {
    let nx = xs.len();
    let id = |i: usize, j: usize| i * (n2 + 1) + j;
    let mut nodes = Vec::with_capacity(nx * (n2 + 1));
    for &x in xs {
        let y0 = f(x);
        for j in 0..=n2 {
            let y = if j == n2 {
                h
            } else {
                y0 + (h - y0) * j as f64 / n2 as f64
            };
            nodes.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * n2);
    let d2 = |a: usize, b: usize, nodes: &[[f64; 2]]| {
        let (p, q) = (nodes[a], nodes[b]);
        (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
    };
    for i in 0..nx - 1 {
        for j in 0..n2 {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if d2(a, c, &nodes) <= d2(b, d, &nodes) * (1.0 + 1e-12) {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    let mut edges = Vec::new();
    for i in 0..nx - 1 {
        edges.push(([id(i, 0), id(i + 1, 0)], BoundaryTag::Gamma));
        edges.push(([id(i + 1, n2), id(i, n2)], BoundaryTag::GammaH));
    }
    for j in 0..n2 {
        edges.push(([id(nx - 1, j), id(nx - 1, j + 1)], BoundaryTag::Right));
        edges.push(([id(0, j + 1), id(0, j)], BoundaryTag::Left));
    }
    Piece {
        nodes,
        triangles,
        edges,
    }
}
