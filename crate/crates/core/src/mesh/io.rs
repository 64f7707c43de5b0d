//! Plain-text mesh format.
//!
//! Records, one per line, whitespace separated:
//!
//! ```text
//! grating-mesh 1
//! h <height>
//! nodes <N>
//! <x1> <x2>                      (N lines)
//! triangles <T>
//! <i> <j> <k>                    (T lines, counter-clockwise)
//! edges <E>
//! <i> <j> <gamma|top|left|right> (E lines)
//! pairs <P>
//! <left> <right>                 (P lines)
//! ```
//!
//! Coordinates are written with 17 significant digits so a round trip is exact.

use std::fmt::Write as _;

use super::{BoundaryTag, TriMesh};
use crate::error::{Error, Result};

pub const MAGIC: &str = "grating-mesh 1";

/// Serializes a triangulation, its truncation height and periodic pairs.
pub fn to_text(mesh: &TriMesh, h: f64, pairs: &[(usize, usize)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "h {h:.17e}");
    let _ = writeln!(s, "nodes {}", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
    }
    let _ = writeln!(s, "triangles {}", mesh.triangles.len());
    for t in &mesh.triangles {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "edges {}", mesh.boundary_edges.len());
    for (e, t) in &mesh.boundary_edges {
        let _ = writeln!(s, "{} {} {}", e[0], e[1], t.name());
    }
    let _ = writeln!(s, "pairs {}", pairs.len());
    for (l, r) in pairs {
        let _ = writeln!(s, "{l} {r}");
    }
    s
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, line) in self.it.by_ref() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if !f.is_empty() {
                return Ok((i + 1, f));
            }
        }
        Err(Error::Parse("unexpected end of mesh file".into()))
    }

    fn header(&mut self, key: &str) -> Result<usize> {
        let (ln, f) = self.next()?;
        match f.as_slice() {
            [k, n] if *k == key => n
                .parse()
                .map_err(|e| Error::Parse(format!("line {ln}: {e}"))),
            _ => Err(Error::Parse(format!("line {ln}: expected '{key} <count>'"))),
        }
    }
}

fn num<T: std::str::FromStr>(s: &str, ln: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse()
        .map_err(|e| Error::Parse(format!("line {ln}: {s:?}: {e}")))
}

/// Mesh, truncation height and periodic node pairs.
pub type MeshRecord = (TriMesh, f64, Vec<(usize, usize)>);

/// Parses the format written by [`to_text`].
pub fn from_text(text: &str) -> Result<MeshRecord> {
    let mut ls = Lines {
        it: text.lines().enumerate(),
    };
    let (ln, f) = ls.next()?;
    if f.join(" ") != MAGIC {
        return Err(Error::Parse(format!("line {ln}: missing '{MAGIC}' header")));
    }
    let (ln, f) = ls.next()?;
    let h = match f.as_slice() {
        ["h", v] => num::<f64>(v, ln)?,
        _ => return Err(Error::Parse(format!("line {ln}: expected 'h <height>'"))),
    };
    let n = ls.header("nodes")?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, f) = ls.next()?;
        match f.as_slice() {
            [x, y] => nodes.push([num(x, ln)?, num(y, ln)?]),
            _ => {
                return Err(Error::Parse(format!(
                    "line {ln}: node needs two coordinates"
                )))
            }
        }
    }
    let check = |i: usize, ln: usize| {
        if i < n {
            Ok(i)
        } else {
            Err(Error::Parse(format!(
                "line {ln}: node index {i} out of range"
            )))
        }
    };
    let t = ls.header("triangles")?;
    let mut triangles = Vec::with_capacity(t);
    for _ in 0..t {
        let (ln, f) = ls.next()?;
        match f.as_slice() {
            [a, b, c] => triangles.push([
                check(num(a, ln)?, ln)?,
                check(num(b, ln)?, ln)?,
                check(num(c, ln)?, ln)?,
            ]),
            _ => {
                return Err(Error::Parse(format!(
                    "line {ln}: triangle needs three indices"
                )))
            }
        }
    }
    let e = ls.header("edges")?;
    let mut edges = Vec::with_capacity(e);
    for _ in 0..e {
        let (ln, f) = ls.next()?;
        match f.as_slice() {
            [a, b, tag] => {
                let tag = BoundaryTag::from_name(tag)
                    .ok_or_else(|| Error::Parse(format!("line {ln}: unknown tag {tag}")))?;
                edges.push(([check(num(a, ln)?, ln)?, check(num(b, ln)?, ln)?], tag));
            }
            _ => {
                return Err(Error::Parse(format!(
                    "line {ln}: edge needs two indices and a tag"
                )))
            }
        }
    }
    let p = ls.header("pairs")?;
    let mut pairs = Vec::with_capacity(p);
    for _ in 0..p {
        let (ln, f) = ls.next()?;
        match f.as_slice() {
            [a, b] => pairs.push((check(num(a, ln)?, ln)?, check(num(b, ln)?, ln)?)),
            _ => return Err(Error::Parse(format!("line {ln}: pair needs two indices"))),
        }
    }
    Ok((TriMesh::new(nodes, triangles, edges), h, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cell_mesh;
    use crate::profile::PeriodicProfile;

    #[test]
    fn round_trip_is_exact() {
        let c = build_cell_mesh(&PeriodicProfile::sine(0.3).unwrap(), 1.0, 0.4).unwrap();
        let s = to_text(&c.mesh, c.h, &c.periodic_pairs);
        let (m, h, pairs) = from_text(&s).unwrap();
        assert_eq!(m.nodes, c.mesh.nodes);
        assert_eq!(m.triangles, c.mesh.triangles);
        assert_eq!(m.boundary_edges, c.mesh.boundary_edges);
        assert_eq!(h, c.h);
        assert_eq!(pairs, c.periodic_pairs);
        assert_eq!(to_text(&m, h, &pairs), s);
    }

    #[test]
    fn rejects_bad_index() {
        let bad = "grating-mesh 1\nh 1\nnodes 1\n0 0\ntriangles 1\n0 1 2\nedges 0\npairs 0\n";
        assert!(from_text(bad).is_err());
    }
}
