//! 2π-periodic Dirichlet curves and local perturbations.
//!
//! Every profile is stored as a polyline over one period, running from
//! `(0, y₀)` to `(2π, y₀)`. Graph profiles additionally expose a height
//! function `f(x₁)`, exact for the analytic sine profile.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::wave::PERIOD;

const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Flat,
    Echelle,
    Sine {
        amplitude: f64,
    },
    Resonator {
        neck_width: f64,
        neck_length: f64,
        cavity_width: f64,
        cavity_depth: f64,
    },
    Polyline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicProfile {
    shape: Shape,
    vertices: Vec<[f64; 2]>,
    pub height_min: f64,
    pub height_max: f64,
    pub is_graph: bool,
}

/// Samples used for the polyline of the sine profile.
pub const SINE_SAMPLES: usize = 256;

impl PeriodicProfile {
    pub fn flat() -> Self {
        Self::build(Shape::Flat, vec![[0.0, 0.0], [PERIOD, 0.0]]).expect("flat profile")
    }

    /// π-periodic triangle wave with peaks (π/2, π/2) and (3π/2, π/2).
    pub fn echelle() -> Self {
        let v = vec![
            [0.0, 0.0],
            [FRAC_PI_2, FRAC_PI_2],
            [PI, 0.0],
            [1.5 * PI, FRAC_PI_2],
            [PERIOD, 0.0],
        ];
        Self::build(Shape::Echelle, v).expect("echelle profile")
    }

    /// x₂ = a·sin x₁.
    pub fn sine(amplitude: f64) -> Result<Self> {
        if !amplitude.is_finite() {
            return Err(Error::InvalidProfile(
                "sine amplitude must be finite".into(),
            ));
        }
        let v = (0..=SINE_SAMPLES)
            .map(|i| {
                let x = PERIOD * i as f64 / SINE_SAMPLES as f64;
                [x, amplitude * x.sin()]
            })
            .collect::<Vec<_>>();
        let mut p = Self::build(Shape::Sine { amplitude }, v)?;
        p.height_min = -amplitude.abs();
        p.height_max = amplitude.abs();
        Ok(p)
    }

    /// Flat surface x₂ = 0 with a bottle-shaped cavity centred at x₁ = π:
    /// a neck of the given width and length opening into a rectangular cavity.
    pub fn resonator(
        neck_width: f64,
        neck_length: f64,
        cavity_width: f64,
        cavity_depth: f64,
    ) -> Result<Self> {
        let ok = [neck_width, neck_length, cavity_width, cavity_depth]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !ok || neck_width >= cavity_width || cavity_width >= PERIOD - 0.2 {
            return Err(Error::InvalidProfile(
                "resonator dimensions out of range".into(),
            ));
        }
        let (n, c) = (0.5 * neck_width, 0.5 * cavity_width);
        let y1 = -neck_length;
        let y2 = -neck_length - cavity_depth;
        let v = vec![
            [0.0, 0.0],
            [PI - n, 0.0],
            [PI - n, y1],
            [PI - c, y1],
            [PI - c, y2],
            [PI + c, y2],
            [PI + c, y1],
            [PI + n, y1],
            [PI + n, 0.0],
            [PERIOD, 0.0],
        ];
        Self::build(
            Shape::Resonator {
                neck_width,
                neck_length,
                cavity_width,
                cavity_depth,
            },
            v,
        )
    }

    /// Arbitrary polyline over one period; first and last vertex must sit at
    /// x₁ = 0 and x₁ = 2π with equal heights.
    pub fn from_vertices(vertices: Vec<[f64; 2]>) -> Result<Self> {
        Self::build(Shape::Polyline, vertices)
    }

    fn build(shape: Shape, vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidProfile("need at least two vertices".into()));
        }
        if vertices
            .iter()
            .any(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::InvalidProfile("non-finite vertex".into()));
        }
        let first = vertices[0];
        let last = *vertices.last().unwrap();
        if first[0].abs() > 1e-9 || (last[0] - PERIOD).abs() > 1e-9 {
            return Err(Error::InvalidProfile(
                "polyline must span x1 in [0, 2pi]".into(),
            ));
        }
        if (first[1] - last[1]).abs() > 1e-9 {
            return Err(Error::InvalidProfile(
                "endpoint heights differ; curve does not close periodically".into(),
            ));
        }
        let mut vertices = vertices;
        vertices[0][0] = 0.0;
        let n = vertices.len();
        vertices[n - 1] = [PERIOD, vertices[0][1]];
        let is_graph = vertices.windows(2).all(|w| w[1][0] > w[0][0] + GEOM_TOL);
        let height_min = vertices.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let height_max = vertices
            .iter()
            .map(|p| p[1])
            .fold(f64::NEG_INFINITY, f64::max);
        if let Some((i, j)) = first_self_intersection(&vertices) {
            return Err(Error::InvalidProfile(format!(
                "polyline self-intersects (segments {i} and {j})"
            )));
        }
        Ok(Self {
            shape,
            vertices,
            height_min,
            height_max,
            is_graph,
        })
    }

    /// Parses "flat", "echelle", "sine:A", "resonator[:w,l,W,D]" or "polyline:x,y;x,y;...".
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, args) = match spec.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (spec, None),
        };
        let nums = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad number {t:?}: {e}")))
                })
                .collect()
        };
        match (head, args) {
            ("flat", None) => Ok(Self::flat()),
            ("echelle", None) => Ok(Self::echelle()),
            ("sine", Some(a)) => {
                let v = nums(a)?;
                if v.len() != 1 {
                    return Err(Error::Parse("sine takes one amplitude".into()));
                }
                Self::sine(v[0])
            }
            ("resonator", None) => Self::default_resonator(),
            ("resonator", Some(a)) => {
                let v = nums(a)?;
                if v.len() != 4 {
                    return Err(Error::Parse(
                        "resonator takes neck_width,neck_length,cavity_width,cavity_depth".into(),
                    ));
                }
                Self::resonator(v[0], v[1], v[2], v[3])
            }
            ("polyline", Some(a)) => {
                let mut pts = Vec::new();
                for pair in a.split(';').filter(|s| !s.trim().is_empty()) {
                    let v = nums(pair)?;
                    if v.len() != 2 {
                        return Err(Error::Parse(format!(
                            "vertex {pair:?} needs two coordinates"
                        )));
                    }
                    pts.push([v[0], v[1]]);
                }
                Self::from_vertices(pts)
            }
            _ => Err(Error::Parse(format!("unknown profile {spec:?}"))),
        }
    }

    /// The bottle resonator used for near-singular experiments.
    pub fn default_resonator() -> Result<Self> {
        Self::resonator(0.4, 4.0, 4.0, 3.0)
    }

    /// Canonical string form; `parse(spec())` reproduces the profile.
    pub fn spec(&self) -> String {
        match &self.shape {
            Shape::Flat => "flat".into(),
            Shape::Echelle => "echelle".into(),
            Shape::Sine { amplitude } => format!("sine:{amplitude}"),
            Shape::Resonator {
                neck_width,
                neck_length,
                cavity_width,
                cavity_depth,
            } => {
                format!("resonator:{neck_width},{neck_length},{cavity_width},{cavity_depth}")
            }
            Shape::Polyline => {
                let parts: Vec<String> = self
                    .vertices
                    .iter()
                    .map(|p| format!("{},{}", p[0], p[1]))
                    .collect();
                format!("polyline:{}", parts.join(";"))
            }
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Height of a graph profile at x₁ (any real x₁, reduced modulo 2π).
    pub fn graph_value(&self, x: f64) -> Option<f64> {
        if !self.is_graph {
            return None;
        }
        let xr = x.rem_euclid(PERIOD);
        Some(match self.shape {
            Shape::Flat => 0.0,
            Shape::Sine { amplitude } => amplitude * xr.sin(),
            _ => interp_polyline(&self.vertices, xr),
        })
    }

    /// Mandatory abscissae of a graph profile in [0, 2π] (polyline corners).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.shape {
            Shape::Sine { .. } | Shape::Flat => vec![0.0, PERIOD],
            _ => self.vertices.iter().map(|p| p[0]).collect(),
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.shape, Shape::Sine { .. })
    }

    /// Default truncation height: 1.25·height_max, lifted to height_max + 1 when that is too close.
    pub fn default_height(&self) -> f64 {
        (1.25 * self.height_max).max(self.height_max + 1.0)
    }
}

fn interp_polyline(v: &[[f64; 2]], x: f64) -> f64 {
    let i = v.partition_point(|p| p[0] <= x).clamp(1, v.len() - 1);
    let (a, b) = (v[i - 1], v[i]);
    let t = if b[0] > a[0] {
        (x - a[0]) / (b[0] - a[0])
    } else {
        0.0
    };
    a[1] + t * (b[1] - a[1])
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) - GEOM_TOL
        && p[0] <= a[0].max(b[0]) + GEOM_TOL
        && p[1] >= a[1].min(b[1]) - GEOM_TOL
        && p[1] <= a[1].max(b[1]) + GEOM_TOL
}

/// Closed-segment intersection test with a scale-aware collinearity tolerance.
pub fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let scale = 1e-12 * (1.0 + p1[0].abs() + p1[1].abs() + p2[0].abs() + p2[1].abs());
    let s = |v: f64| if v.abs() <= scale { 0.0 } else { v.signum() };
    let d1 = s(orient(q1, q2, p1));
    let d2 = s(orient(q1, q2, p2));
    let d3 = s(orient(p1, p2, q1));
    let d4 = s(orient(p1, p2, q2));
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Checks the periodically continued polyline for self-intersections.
/// Returns the first offending pair of global segment indices.
pub fn first_self_intersection(v: &[[f64; 2]]) -> Option<(i64, i64)> {
    let n = v.len() - 1;
    if n == 0 {
        return None;
    }
    let seg = |g: i64| -> ([f64; 2], [f64; 2]) {
        let p = g.div_euclid(n as i64);
        let i = g.rem_euclid(n as i64) as usize;
        let dx = p as f64 * PERIOD;
        ([v[i][0] + dx, v[i][1]], [v[i + 1][0] + dx, v[i + 1][1]])
    };
    for a in 0..n as i64 {
        let (a1, a2) = seg(a);
        if (a2[0] - a1[0]).hypot(a2[1] - a1[1]) <= GEOM_TOL {
            return Some((a, a));
        }
        // Adjacent segments may only share their joint; a fold-back is a crossing.
        let (b1, b2) = seg(a + 1);
        let da = [a2[0] - a1[0], a2[1] - a1[1]];
        let db = [b2[0] - b1[0], b2[1] - b1[1]];
        let cross = da[0] * db[1] - da[1] * db[0];
        let dot = da[0] * db[0] + da[1] * db[1];
        if cross.abs() <= 1e-12 * (da[0].hypot(da[1]) * db[0].hypot(db[1])) && dot < 0.0 {
            return Some((a, a + 1));
        }
        let (lo_x, hi_x) = (a1[0].min(a2[0]), a1[0].max(a2[0]));
        let (lo_y, hi_y) = (a1[1].min(a2[1]), a1[1].max(a2[1]));
        for b in (a + 2)..(a + 2 * n as i64 - 1) {
            let (b1, b2) = seg(b);
            if b1[0].max(b2[0]) < lo_x - GEOM_TOL
                || b1[0].min(b2[0]) > hi_x + GEOM_TOL
                || b1[1].max(b2[1]) < lo_y - GEOM_TOL
                || b1[1].min(b2[1]) > hi_y + GEOM_TOL
            {
                continue;
            }
            if segments_intersect(a1, a2, b1, b2) {
                return Some((a, b));
            }
        }
    }
    None
}

/// A disc in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Disc {
    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        (p[0] - self.center[0]).hypot(p[1] - self.center[1]) <= self.radius + tol
    }
}

fn circle2(a: [f64; 2], b: [f64; 2]) -> Disc {
    let c = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    Disc {
        center: c,
        radius: 0.5 * (a[0] - b[0]).hypot(a[1] - b[1]),
    }
}

fn circle3(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Disc {
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    if d.abs() < 1e-14 {
        let mut best = circle2(a, b);
        for d2 in [circle2(a, c), circle2(b, c)] {
            if d2.radius > best.radius {
                best = d2;
            }
        }
        return best;
    }
    let sa = a[0] * a[0] + a[1] * a[1];
    let sb = b[0] * b[0] + b[1] * b[1];
    let sc = c[0] * c[0] + c[1] * c[1];
    let ux = (sa * (b[1] - c[1]) + sb * (c[1] - a[1]) + sc * (a[1] - b[1])) / d;
    let uy = (sa * (c[0] - b[0]) + sb * (a[0] - c[0]) + sc * (b[0] - a[0])) / d;
    Disc {
        center: [ux, uy],
        radius: (a[0] - ux).hypot(a[1] - uy),
    }
}

/// Smallest disc enclosing a point set (incremental Welzl, exact for small sets).
pub fn min_enclosing_disc(pts: &[[f64; 2]]) -> Disc {
    let tol = 1e-12;
    let mut d = Disc {
        center: pts[0],
        radius: 0.0,
    };
    for i in 1..pts.len() {
        if d.contains(pts[i], tol) {
            continue;
        }
        d = Disc {
            center: pts[i],
            radius: 0.0,
        };
        for j in 0..i {
            if d.contains(pts[j], tol) {
                continue;
            }
            d = circle2(pts[i], pts[j]);
            for k in 0..j {
                if !d.contains(pts[k], tol) {
                    d = circle3(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    d
}

/// Replacement of the arc of a profile over `replaced_arc = (a, b)` by an open
/// polyline joining the curve points at `a` and `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPerturbation {
    pub replaced_arc: (f64, f64),
    pub replacement: Vec<[f64; 2]>,
    pub bounding_disc: Disc,
}

impl LocalPerturbation {
    /// Validates the replacement against `profile` and computes the bounding disc.
    ///
    /// The arc must satisfy 0 < a < b < 2π and the profile must be x-monotone
    /// on it. The disc has to fit in {(x₁−π)² + x₂² ≤ π²}; touching the
    /// boundary is accepted.
    pub fn new(
        profile: &PeriodicProfile,
        a: f64,
        b: f64,
        replacement: Vec<[f64; 2]>,
    ) -> Result<Self> {
        if !(a > 0.0 && b > a && b < PERIOD) {
            return Err(Error::InvalidProfile(format!(
                "replaced arc ({a}, {b}) must lie inside (0, 2pi)"
            )));
        }
        if replacement.len() < 2 {
            return Err(Error::InvalidProfile(
                "replacement needs two or more vertices".into(),
            ));
        }
        let removed = removed_arc(profile, a, b)?;
        let (r0, r1) = (replacement[0], *replacement.last().unwrap());
        let (e0, e1) = (removed[0], *removed.last().unwrap());
        if (r0[0] - e0[0]).hypot(r0[1] - e0[1]) > 1e-9
            || (r1[0] - e1[0]).hypot(r1[1] - e1[1]) > 1e-9
        {
            return Err(Error::InvalidProfile(
                "replacement endpoints must match the curve at the arc ends".into(),
            ));
        }
        let mut pts = removed.clone();
        pts.extend_from_slice(&replacement);
        let disc = min_enclosing_disc(&pts);
        let reach = (disc.center[0] - PI).hypot(disc.center[1]) + disc.radius;
        if reach > PI * (1.0 + 1e-9) {
            return Err(Error::InvalidProfile(format!(
                "bounding disc (centre {:?}, radius {:.4}) leaves the disc of radius pi about (pi, 0)",
                disc.center, disc.radius
            )));
        }
        let pert = Self {
            replaced_arc: (a, b),
            replacement,
            bounding_disc: disc,
        };
        let v = pert.perturbed_polyline(profile);
        if let Some((i, j)) = first_self_intersection(&v) {
            return Err(Error::InvalidProfile(format!(
                "perturbed curve self-intersects (segments {i} and {j})"
            )));
        }
        Ok(pert)
    }

    /// The unidentifiable defect on the echelle: the groove over (π/2, 3π/2)
    /// is replaced by the lines x₂ = x₁ and x₂ = −x₁ + 2π meeting at (π, π).
    pub fn echelle_defect() -> Self {
        let p = PeriodicProfile::echelle();
        Self::new(
            &p,
            FRAC_PI_2,
            1.5 * PI,
            vec![[FRAC_PI_2, FRAC_PI_2], [PI, PI], [1.5 * PI, FRAC_PI_2]],
        )
        .expect("echelle defect")
    }

    /// Echelle groove filled flat at height π/2 (not on the nodal lines).
    pub fn echelle_fill() -> Self {
        let p = PeriodicProfile::echelle();
        Self::new(
            &p,
            FRAC_PI_2,
            1.5 * PI,
            vec![[FRAC_PI_2, FRAC_PI_2], [1.5 * PI, FRAC_PI_2]],
        )
        .expect("echelle fill")
    }

    /// Rectangular notch of the given width and depth centred at x₁ = π.
    pub fn notch(profile: &PeriodicProfile, width: f64, depth: f64) -> Result<Self> {
        let (a, b) = (PI - 0.5 * width, PI + 0.5 * width);
        let fa = curve_height(profile, a)?;
        let fb = curve_height(profile, b)?;
        Self::new(
            profile,
            a,
            b,
            vec![[a, fa], [a, fa - depth], [b, fb - depth], [b, fb]],
        )
    }

    /// Triangular bump of the given base width and height centred at x₁ = π.
    pub fn bump(profile: &PeriodicProfile, width: f64, height: f64) -> Result<Self> {
        let (a, b) = (PI - 0.5 * width, PI + 0.5 * width);
        let fa = curve_height(profile, a)?;
        let fb = curve_height(profile, b)?;
        let fc = curve_height(profile, PI)?;
        Self::new(profile, a, b, vec![[a, fa], [PI, fc + height], [b, fb]])
    }

    /// Same geometry as the profile, but the arc over (a, b) is re-described by
    /// a resampled polyline. Used to mesh an identical curve differently.
    pub fn identity_resampled(
        profile: &PeriodicProfile,
        a: f64,
        b: f64,
        pieces: usize,
    ) -> Result<Self> {
        let removed = removed_arc(profile, a, b)?;
        let mut rep = vec![removed[0]];
        // Irrational offsets move the extra vertices away from existing mesh columns.
        let offs = 0.5 * (5f64.sqrt() - 1.0);
        for i in 0..pieces {
            let t = ((i as f64 + offs) / pieces as f64).clamp(0.0, 1.0);
            let x = a + t * (b - a);
            rep.push([x, curve_height(profile, x)?]);
        }
        rep.push(*removed.last().unwrap());
        rep.dedup_by(|p, q| (p[0] - q[0]).abs() < 1e-12);
        // Keep the original corners so the curve is reproduced exactly.
        for c in removed.iter().skip(1).take(removed.len().saturating_sub(2)) {
            if !rep.iter().any(|p| (p[0] - c[0]).abs() < 1e-12) {
                rep.push(*c);
            }
        }
        rep.sort_by(|p, q| p[0].total_cmp(&q[0]));
        Self::new(profile, a, b, rep)
    }

    /// Parses "none", "echelle-defect", "echelle-fill", "notch:w,d", "bump:w,h",
    /// "identity:a,b,n" or "arc:a,b;x,y;x,y;...". `none` yields `Ok(None)`.
    pub fn parse(spec: &str, profile: &PeriodicProfile) -> Result<Option<Self>> {
        let spec = spec.trim();
        let (head, args) = match spec.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (spec, None),
        };
        let nums = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad number {t:?}: {e}")))
                })
                .collect()
        };
        match (head, args) {
            ("none", None) | ("", None) => Ok(None),
            ("echelle-defect", None) => Ok(Some(Self::echelle_defect())),
            ("echelle-fill", None) => Ok(Some(Self::echelle_fill())),
            ("notch", Some(a)) => match nums(a)?.as_slice() {
                [w, d] => Ok(Some(Self::notch(profile, *w, *d)?)),
                _ => Err(Error::Parse("notch takes width,depth".into())),
            },
            ("bump", Some(a)) => match nums(a)?.as_slice() {
                [w, hgt] => Ok(Some(Self::bump(profile, *w, *hgt)?)),
                _ => Err(Error::Parse("bump takes width,height".into())),
            },
            ("identity", Some(a)) => match nums(a)?.as_slice() {
                [x0, x1, n] if *n >= 1.0 => Ok(Some(Self::identity_resampled(
                    profile,
                    *x0,
                    *x1,
                    *n as usize,
                )?)),
                _ => Err(Error::Parse("identity takes a,b,pieces".into())),
            },
            ("arc", Some(a)) => {
                let mut parts = a.split(';');
                let ab = nums(parts.next().unwrap_or(""))?;
                if ab.len() != 2 {
                    return Err(Error::Parse("arc needs a,b first".into()));
                }
                let mut pts = Vec::new();
                for pair in parts.filter(|s| !s.trim().is_empty()) {
                    match nums(pair)?.as_slice() {
                        [x, y] => pts.push([*x, *y]),
                        _ => {
                            return Err(Error::Parse(format!(
                                "vertex {pair:?} needs two coordinates"
                            )))
                        }
                    }
                }
                Ok(Some(Self::new(profile, ab[0], ab[1], pts)?))
            }
            _ => Err(Error::Parse(format!("unknown perturbation {spec:?}"))),
        }
    }

    /// Canonical string form accepted by `parse`.
    pub fn spec(&self) -> String {
        let pts: Vec<String> = self
            .replacement
            .iter()
            .map(|p| format!("{},{}", p[0], p[1]))
            .collect();
        format!(
            "arc:{},{};{}",
            self.replaced_arc.0,
            self.replaced_arc.1,
            pts.join(";")
        )
    }

    /// Polyline of the perturbed period [0, 2π].
    pub fn perturbed_polyline(&self, profile: &PeriodicProfile) -> Vec<[f64; 2]> {
        let (a, b) = self.replaced_arc;
        let mut out: Vec<[f64; 2]> = profile
            .vertices()
            .iter()
            .copied()
            .filter(|p| p[0] < a - 1e-12)
            .collect();
        out.extend_from_slice(&self.replacement);
        out.extend(
            profile
                .vertices()
                .iter()
                .copied()
                .filter(|p| p[0] > b + 1e-12),
        );
        out
    }

    /// Profile of the perturbed period, treated as its own cell.
    pub fn perturbed_profile(&self, profile: &PeriodicProfile) -> Result<PeriodicProfile> {
        PeriodicProfile::from_vertices(self.perturbed_polyline(profile))
    }

    /// True when the perturbed period is still the graph of a function.
    pub fn is_graph(&self, profile: &PeriodicProfile) -> bool {
        profile.is_graph
            && self
                .replacement
                .windows(2)
                .all(|w| w[1][0] > w[0][0] + GEOM_TOL)
    }

    /// Height of the perturbed graph at x₁ ∈ [0, 2π].
    pub fn graph_value(&self, profile: &PeriodicProfile, x: f64) -> Option<f64> {
        if !self.is_graph(profile) {
            return None;
        }
        let (a, b) = self.replaced_arc;
        if x > a && x < b {
            Some(interp_polyline(&self.replacement, x))
        } else {
            profile.graph_value(x)
        }
    }

    /// Breakpoints of the perturbed graph in [0, 2π].
    pub fn breakpoints(&self, profile: &PeriodicProfile) -> Vec<f64> {
        let (a, b) = self.replaced_arc;
        let mut v: Vec<f64> = profile
            .breakpoints()
            .into_iter()
            .filter(|x| *x < a - 1e-12 || *x > b + 1e-12)
            .collect();
        v.extend(self.replacement.iter().map(|p| p[0]));
        v.sort_by(f64::total_cmp);
        v.dedup_by(|p, q| (*p - *q).abs() < 1e-12);
        v
    }

    /// Arc-length change of the curve caused by the perturbation.
    pub fn length_change(&self, profile: &PeriodicProfile) -> f64 {
        let len = |v: &[[f64; 2]]| {
            v.windows(2)
                .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
                .sum::<f64>()
        };
        let removed =
            removed_arc(profile, self.replaced_arc.0, self.replaced_arc.1).unwrap_or_default();
        len(&self.replacement) - len(&removed)
    }

    /// Highest point of the replacement.
    pub fn height_max(&self) -> f64 {
        self.replacement
            .iter()
            .map(|p| p[1])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn height_min(&self) -> f64 {
        self.replacement
            .iter()
            .map(|p| p[1])
            .fold(f64::INFINITY, f64::min)
    }
}

fn curve_height(profile: &PeriodicProfile, x: f64) -> Result<f64> {
    if let Some(y) = profile.graph_value(x) {
        return Ok(y);
    }
    // Non-graph profile: use the unique crossing of the vertical line if the
    // polyline is x-monotone there.
    let v = profile.vertices();
    let hits: Vec<f64> = v
        .windows(2)
        .filter(|w| (w[0][0] - x) * (w[1][0] - x) <= 0.0 && w[1][0] != w[0][0])
        .map(|w| w[0][1] + (x - w[0][0]) / (w[1][0] - w[0][0]) * (w[1][1] - w[0][1]))
        .collect();
    match hits.as_slice() {
        [y] => Ok(*y),
        [y, z] if (y - z).abs() < 1e-12 => Ok(*y),
        _ => Err(Error::InvalidProfile(format!(
            "profile is not x-monotone at x1 = {x}"
        ))),
    }
}

/// Points of the unperturbed curve over [a, b], including interpolated ends.
fn removed_arc(profile: &PeriodicProfile, a: f64, b: f64) -> Result<Vec<[f64; 2]>> {
    let mut out = vec![[a, curve_height(profile, a)?]];
    if profile.is_analytic() {
        let n = 64;
        for i in 1..n {
            let x = a + (b - a) * i as f64 / n as f64;
            out.push([x, curve_height(profile, x)?]);
        }
    } else {
        let inner: Vec<[f64; 2]> = profile
            .vertices()
            .iter()
            .copied()
            .filter(|p| p[0] > a + 1e-12 && p[0] < b - 1e-12)
            .collect();
        if inner.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::InvalidProfile(
                "profile must be x-monotone over the replaced arc".into(),
            ));
        }
        out.extend(inner);
    }
    out.push([b, curve_height(profile, b)?]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn builtins() {
        let f = PeriodicProfile::flat();
        assert!(f.is_graph);
        assert_eq!((f.height_min, f.height_max), (0.0, 0.0));
        let e = PeriodicProfile::echelle();
        assert!(e.is_graph);
        assert!((e.height_max - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(e.graph_value(PI), Some(0.0));
        assert!((e.graph_value(0.25 * PI).unwrap() - 0.25 * PI).abs() < 1e-15);
        let s = PeriodicProfile::sine(0.3).unwrap();
        assert!((s.graph_value(FRAC_PI_2).unwrap() - 0.3).abs() < 1e-15);
        let r = PeriodicProfile::default_resonator().unwrap();
        assert!(!r.is_graph);
        assert!((r.height_min + 7.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_self_crossing() {
        let bad = vec![
            [0.0, 0.0],
            [4.0, 1.0],
            [2.0, 1.0],
            [3.0, -1.0],
            [PERIOD, 0.0],
        ];
        assert!(PeriodicProfile::from_vertices(bad).is_err());
        // Crossing the neighbouring period only.
        let bad = vec![[0.0, 0.0], [PERIOD + 0.5, 0.5], [1.0, 1.0], [PERIOD, 0.0]];
        assert!(PeriodicProfile::from_vertices(bad).is_err());
        let fold = vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.0], [PERIOD, 0.0]];
        assert!(PeriodicProfile::from_vertices(fold).is_err());
    }

    #[test]
    fn accepts_overhang() {
        let v = vec![
            [0.0, 0.0],
            [3.0, 0.0],
            [3.0, -1.0],
            [2.0, -1.0],
            [2.0, -2.0],
            [4.0, -2.0],
            [4.0, 0.0],
            [PERIOD, 0.0],
        ];
        let p = PeriodicProfile::from_vertices(v).unwrap();
        assert!(!p.is_graph);
    }

    #[test]
    fn spec_round_trip() {
        for s in [
            "flat",
            "echelle",
            "sine:0.3",
            "resonator:0.4,4,4,3",
            "polyline:0,0;1,0.5;6.283185307179586,0",
        ] {
            let p = PeriodicProfile::parse(s).unwrap();
            assert_eq!(PeriodicProfile::parse(&p.spec()).unwrap(), p);
        }
        assert!(PeriodicProfile::parse("sinus:1").is_err());
    }

    #[test]
    fn echelle_defect_geometry() {
        let p = PeriodicProfile::echelle();
        let d = LocalPerturbation::echelle_defect();
        assert!(d.is_graph(&p));
        assert_eq!(d.graph_value(&p, PI), Some(PI));
        assert!((d.graph_value(&p, 0.75 * PI).unwrap() - 0.75 * PI).abs() < 1e-15);
        // The defect square has circumradius pi/2 about (pi, pi/2) and touches
        // the admissible disc at (pi, pi).
        assert!((d.bounding_disc.radius - FRAC_PI_2).abs() < 1e-12);
        assert!((d.bounding_disc.center[1] - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn notch_length_change() {
        let p = PeriodicProfile::flat();
        let n = LocalPerturbation::notch(&p, 1.0, 0.3).unwrap();
        assert!(!n.is_graph(&p));
        assert!((n.length_change(&p) - 0.6).abs() < 1e-12);
        let pp = n.perturbed_profile(&p).unwrap();
        assert!((pp.height_min + 0.3).abs() < 1e-15);
    }

    #[test]
    fn oversized_defect_rejected() {
        let p = PeriodicProfile::flat();
        assert!(LocalPerturbation::bump(&p, 1.0, 3.5).is_err());
    }

    #[test]
    fn perturbation_spec_round_trip() {
        let p = PeriodicProfile::echelle();
        let d = LocalPerturbation::echelle_defect();
        let q = LocalPerturbation::parse(&d.spec(), &p).unwrap().unwrap();
        assert_eq!(q.replacement, d.replacement);
        assert!(LocalPerturbation::parse("none", &p).unwrap().is_none());
    }

    #[test]
    fn identity_resample_keeps_curve() {
        let p = PeriodicProfile::echelle();
        let d = LocalPerturbation::identity_resampled(&p, FRAC_PI_2, 1.5 * PI, 5).unwrap();
        for i in 0..=100 {
            let x = FRAC_PI_2 + PI * i as f64 / 100.0;
            assert!((d.graph_value(&p, x).unwrap() - p.graph_value(x).unwrap()).abs() < 1e-12);
        }
        assert!(d.length_change(&p).abs() < 1e-12);
    }

    #[test]
    fn enclosing_disc_square() {
        let d = min_enclosing_disc(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]]);
        assert!((d.radius - 0.5f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn random_graphs_are_simple(ys in proptest::collection::vec(-2.0f64..2.0, 1..12)) {
            let n = ys.len() + 1;
            let mut v = vec![[0.0, 0.0]];
            for (i, y) in ys.iter().enumerate() {
                v.push([PERIOD * (i + 1) as f64 / n as f64, *y]);
            }
            v.push([PERIOD, 0.0]);
            let p = PeriodicProfile::from_vertices(v).unwrap();
            prop_assert!(p.is_graph);
        }

        #[test]
        fn enclosing_disc_contains_all(pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..30)) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(a, b)| [a, b]).collect();
            let d = min_enclosing_disc(&pts);
            for p in &pts {
                prop_assert!(d.contains(*p, 1e-9));
            }
        }
    }
}
