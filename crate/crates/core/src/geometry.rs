//! Planar convex-polygon kernel used by the slice subdivision.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Clipped areas below this fraction of the parent's area count as empty.
pub const AREA_EPS: f64 = 1e-12;

/// Vertices closer to a cutting line than this fraction of the polygon
/// diameter are snapped onto it.
pub const SNAP_EPS: f64 = 1e-12;

/// The line `a·s + b·t + c = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Line {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.a * p[0] + self.b * p[1] + self.c
    }

    pub fn normal_norm(&self) -> f64 {
        libm::hypot(self.a, self.b)
    }
}

/// Where a polygon edge came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    /// Part of the slice's bounding rectangle.
    Boundary,
    /// Zero set of neuron `neuron` of layer `layer`.
    Neuron { layer: usize, neuron: usize },
}

/// Convex polygon with counterclockwise vertices. `labels[i]` tags the edge
/// from vertex `i` to vertex `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
    labels: Vec<EdgeLabel>,
}

impl Polygon {
    /// A polygon whose edges are all tagged [`EdgeLabel::Boundary`].
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let labels = alloc::vec![EdgeLabel::Boundary; vertices.len()];
        Self::with_labels(vertices, labels)
    }

    pub fn with_labels(vertices: Vec<Point>, labels: Vec<EdgeLabel>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Geometry(format!("polygon has {} vertices", vertices.len())));
        }
        if labels.len() != vertices.len() {
            return Err(Error::Geometry("one edge label per vertex required".into()));
        }
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Geometry("non-finite vertex".into()));
        }
        let poly = Self { vertices, labels };
        if !(poly.signed_area() > 0.0) {
            return Err(Error::Geometry("polygon is degenerate or clockwise".into()));
        }
        Ok(poly)
    }

    pub fn rectangle(s0: f64, s1: f64, t0: f64, t1: f64) -> Result<Self> {
        Self::new(alloc::vec![[s0, t0], [s1, t0], [s1, t1], [s0, t1]])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn labels(&self) -> &[EdgeLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges as `(start, end, label)`.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point, EdgeLabel)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n], self.labels[i]))
    }

    pub fn signed_area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        let o = self.vertices[0];
        for i in 0..n {
            let p = sub(self.vertices[i], o);
            let q = sub(self.vertices[(i + 1) % n], o);
            let cr = cross(p, q);
            a2 += cr;
            cx += (p[0] + q[0]) * cr;
            cy += (p[1] + q[1]) * cr;
        }
        [o[0] + cx / (3.0 * a2), o[1] + cy / (3.0 * a2)]
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bbox(&self) -> (Point, Point) {
        self.vertices.iter().fold(
            ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
            |(lo, hi), p| {
                (
                    [lo[0].min(p[0]), lo[1].min(p[1])],
                    [hi[0].max(p[0]), hi[1].max(p[1])],
                )
            },
        )
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        libm::hypot(hi[0] - lo[0], hi[1] - lo[1])
    }

    /// Closed containment with an absolute distance tolerance.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.edges().all(|(a, b, _)| {
            let e = sub(b, a);
            cross(e, sub(p, a)) >= -tol * libm::hypot(e[0], e[1])
        })
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        let inside = self.contains(p, 0.0);
        let d = self
            .edges()
            .map(|(a, b, _)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min);
        if inside {
            d
        } else {
            -d
        }
    }
}

/// Splits a convex polygon along `line` into its closed negative and
/// positive parts. New vertices sit at the exact line/edge intersections and
/// the new chord carries `cut`. A part whose area is below
/// `AREA_EPS × area(poly)` is dropped and the other side receives the
/// whole polygon.
pub fn split_polygon_by_line(
    poly: &Polygon,
    line: &Line,
    cut: EdgeLabel,
) -> Result<(Option<Polygon>, Option<Polygon>)> {
    let norm = line.normal_norm();
    if !(norm > 0.0) || !line.c.is_finite() {
        return Err(Error::Geometry("cutting line has no direction".into()));
    }
    let n = poly.vertices.len();
    let snap = SNAP_EPS * poly.diameter();
    let dist: Vec<f64> = poly.vertices.iter().map(|&p| line.eval(p) / norm).collect();
    let side: Vec<i8> = dist
        .iter()
        .map(|&d| if d > snap { 1 } else if d < -snap { -1 } else { 0 })
        .collect();
    let has_pos = side.iter().any(|&s| s > 0);
    let has_neg = side.iter().any(|&s| s < 0);
    match (has_neg, has_pos) {
        (false, true) => return Ok((None, Some(poly.clone()))),
        (true, false) => return Ok((Some(poly.clone()), None)),
        (false, false) => return Err(Error::Geometry("polygon collapses onto the cutting line".into())),
        (true, true) => {}
    }

    let mut neg = (Vec::with_capacity(n + 2), Vec::with_capacity(n + 2));
    let mut pos = (Vec::with_capacity(n + 2), Vec::with_capacity(n + 2));
    for i in 0..n {
        let j = (i + 1) % n;
        let (vi, si, sj) = (poly.vertices[i], side[i], side[j]);
        let label = poly.labels[i];
        // A kept vertex starts the chord when the next original vertex lies
        // strictly on the other side and the line passes through this vertex.
        if si <= 0 {
            neg.0.push(vi);
            neg.1.push(if si == 0 && sj > 0 { cut } else { label });
        }
        if si >= 0 {
            pos.0.push(vi);
            pos.1.push(if si == 0 && sj < 0 { cut } else { label });
        }
        if si * sj < 0 {
            let t = dist[i] / (dist[i] - dist[j]);
            let vj = poly.vertices[j];
            let x = [vi[0] + t * (vj[0] - vi[0]), vi[1] + t * (vj[1] - vi[1])];
            neg.0.push(x);
            neg.1.push(if sj > 0 { cut } else { label });
            pos.0.push(x);
            pos.1.push(if sj < 0 { cut } else { label });
        }
    }
    let parent = poly.area();
    let neg_area = shoelace(&neg.0);
    let pos_area = shoelace(&pos.0);
    if neg_area < AREA_EPS * parent || neg.0.len() < 3 {
        return Ok((None, Some(poly.clone())));
    }
    if pos_area < AREA_EPS * parent || pos.0.len() < 3 {
        return Ok((Some(poly.clone()), None));
    }
    Ok((
        Some(Polygon { vertices: neg.0, labels: neg.1 }),
        Some(Polygon { vertices: pos.0, labels: pos.1 }),
    ))
}

/// Part of the segment `a → b` inside the closed rectangle, as parameters
/// `(t0, t1)` along it (Liang–Barsky).
pub fn clip_segment_to_rect(a: Point, b: Point, lo: Point, hi: Point) -> Option<(f64, f64)> {
    let d = sub(b, a);
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    for (p, q) in [
        (-d[0], a[0] - lo[0]),
        (d[0], hi[0] - a[0]),
        (-d[1], a[1] - lo[1]),
        (d[1], hi[1] - a[1]),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    libm::hypot(p[0] - q[0], p[1] - q[1])
}

pub(crate) fn shoelace(v: &[Point]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let o = v[0];
    let mut acc = 0.0;
    for i in 1..n - 1 {
        acc += cross(sub(v[i], o), sub(v[i + 1], o));
    }
    0.5 * acc
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}
