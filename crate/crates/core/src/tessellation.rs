//! Exact tessellation of a bounded 2D slice of the input space.
//!
//! The slice starts as one rectangular tile. Layer by layer, every tile's
//! accumulated affine map (slice coordinates → layer input) is composed with
//! the layer, which turns each neuron's zero set into a line in slice
//! coordinates; the tile is cut by those lines in neuron order and each piece
//! freezes its activation bits. Later-layer lines therefore bend exactly
//! where they cross earlier cuts.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{
    segment_distance, split_polygon_by_line, sub, EdgeLabel, Line, Point, Polygon, AREA_EPS,
    SNAP_EPS,
};
use crate::grid::DensityGrid;
use crate::linalg::spectral_norm_2col;
use crate::net::{ActivationPattern, AffineMap, Network};

/// Default cap on the number of tiles a subdivision may create.
pub const DEFAULT_MAX_TILES: usize = 1_000_000;

/// Axis-aligned rectangle in slice coordinates `(s, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub s0: f64,
    pub s1: f64,
    pub t0: f64,
    pub t1: f64,
}

impl Bounds {
    pub fn new(s0: f64, s1: f64, t0: f64, t1: f64) -> Result<Self> {
        if !(s1 > s0 && t1 > t0) || ![s0, s1, t0, t1].iter().all(|v| v.is_finite()) {
            return Err(Error::Geometry("slice bounds must be finite and non-degenerate".into()));
        }
        Ok(Self { s0, s1, t0, t1 })
    }

    pub fn area(&self) -> f64 {
        (self.s1 - self.s0) * (self.t1 - self.t0)
    }

    pub fn diameter(&self) -> f64 {
        libm::hypot(self.s1 - self.s0, self.t1 - self.t0)
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p[0] >= self.s0 - tol && p[0] <= self.s1 + tol && p[1] >= self.t0 - tol && p[1] <= self.t1 + tol
    }

    pub fn polygon(&self) -> Polygon {
        Polygon::rectangle(self.s0, self.s1, self.t0, self.t1).expect("validated bounds")
    }
}

/// A planar slice `embed(s, t) = origin + s·u + t·v` of the input space.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    origin: DVector<f64>,
    u: DVector<f64>,
    v: DVector<f64>,
    bounds: Bounds,
}

impl Slice {
    pub fn new(origin: DVector<f64>, u: DVector<f64>, v: DVector<f64>, bounds: Bounds) -> Result<Self> {
        let d = origin.len();
        if d == 0 || u.len() != d || v.len() != d {
            return Err(Error::Geometry("slice vectors must share a positive dimension".into()));
        }
        if origin.iter().chain(u.iter()).chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Geometry("slice vectors must be finite".into()));
        }
        let (uu, vv, uv) = (u.dot(&u), v.dot(&v), u.dot(&v));
        let gram = uu * vv - uv * uv;
        if !(gram > 1e-12 * uu * vv) {
            return Err(Error::Geometry("slice directions are linearly dependent".into()));
        }
        Ok(Self { origin, u, v, bounds })
    }

    /// The plane through three anchor points: `origin = p0`, `u = p1 − p0`,
    /// `v = p2 − p0`, so the anchors sit at `(0,0)`, `(1,0)`, `(0,1)`.
    pub fn from_anchors(p0: &DVector<f64>, p1: &DVector<f64>, p2: &DVector<f64>, bounds: Bounds) -> Result<Self> {
        Self::new(p0.clone(), p1 - p0, p2 - p0, bounds)
    }

    /// The coordinate plane of a 2D input space.
    pub fn identity_2d(bounds: Bounds) -> Self {
        Self {
            origin: DVector::zeros(2),
            u: DVector::from_vec(vec![1.0, 0.0]),
            v: DVector::from_vec(vec![0.0, 1.0]),
            bounds,
        }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &DVector<f64> {
        &self.origin
    }

    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn embed(&self, p: Point) -> DVector<f64> {
        &self.origin + &self.u * p[0] + &self.v * p[1]
    }

    /// The embedding as an affine map from `(s, t)`.
    pub fn embedding(&self) -> AffineMap {
        let mut a = DMatrix::zeros(self.dim(), 2);
        a.set_column(0, &self.u);
        a.set_column(1, &self.v);
        AffineMap {
            a,
            c: self.origin.clone(),
        }
    }
}

/// One convex tile of the slice with the network's exact map on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub polygon: Polygon,
    pub pattern: ActivationPattern,
    /// Affine map from slice coordinates to the network output.
    pub map2d: AffineMap,
    pub area: f64,
}

impl Tile {
    pub fn eval(&self, p: Point) -> DVector<f64> {
        &self.map2d.a * DVector::from_column_slice(&p) + &self.map2d.c
    }
}

/// A piece of tile boundary. Interior edges are listed once, from the tile on
/// the non-negative side of the neuron that created them; boundary edges have
/// no neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct TileEdge {
    pub tile: usize,
    pub neighbor: Option<usize>,
    pub segment: [Point; 2],
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubdivideOptions {
    pub max_tiles: usize,
}

impl Default for SubdivideOptions {
    fn default() -> Self {
        Self {
            max_tiles: DEFAULT_MAX_TILES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metadata {
    pub net_hash: u64,
    pub layers: usize,
    pub snap_eps: f64,
    pub area_eps: f64,
    pub max_tiles: usize,
}

#[derive(Debug, Clone)]
pub struct SliceTessellation {
    slice: Slice,
    tiles: Vec<Tile>,
    edges: Vec<TileEdge>,
    meta: Metadata,
    index: GridIndex,
}

struct Work {
    polygon: Polygon,
    bits: Vec<Vec<bool>>,
    map: AffineMap,
}

pub fn subdivide(net: &Network, slice: &Slice) -> Result<SliceTessellation> {
    subdivide_with(net, slice, SubdivideOptions::default())
}

pub fn subdivide_with(net: &Network, slice: &Slice, opts: SubdivideOptions) -> Result<SliceTessellation> {
    if slice.dim() != net.input_dim() {
        return Err(Error::Shape {
            what: "slice dimension",
            expected: net.input_dim(),
            found: slice.dim(),
        });
    }
    let mut work = vec![Work {
        polygon: slice.bounds.polygon(),
        bits: Vec::new(),
        map: slice.embedding(),
    }];
    for (l, layer) in net.layers().iter().enumerate() {
        let mut next: Vec<Work> = Vec::with_capacity(work.len() * 2);
        for item in work {
            let (pa, pc) = layer.compose(&item.map);
            let mut pieces = vec![(item.polygon, vec![true; layer.width()])];
            if layer.activation.has_kink() {
                for k in 0..layer.width() {
                    let line = Line::new(pa[(k, 0)], pa[(k, 1)], pc[k]);
                    let label = EdgeLabel::Neuron { layer: l, neuron: k };
                    let mut split = Vec::with_capacity(pieces.len() + 1);
                    for (poly, mut bits) in pieces {
                        if line.a == 0.0 && line.b == 0.0 {
                            bits[k] = line.c >= 0.0;
                            split.push((poly, bits));
                            continue;
                        }
                        match split_polygon_by_line(&poly, &line, label)? {
                            (Some(neg), Some(pos)) => {
                                let mut nb = bits.clone();
                                nb[k] = false;
                                bits[k] = true;
                                split.push((neg, nb));
                                split.push((pos, bits));
                            }
                            (Some(neg), None) => {
                                bits[k] = false;
                                split.push((neg, bits));
                            }
                            (None, Some(pos)) => {
                                bits[k] = true;
                                split.push((pos, bits));
                            }
                            (None, None) => unreachable!("split keeps at least one side"),
                        }
                    }
                    pieces = split;
                    if next.len() + pieces.len() > opts.max_tiles {
                        return Err(Error::Capacity {
                            cap: opts.max_tiles,
                            layer: l,
                            tiles: next.len() + pieces.len(),
                        });
                    }
                }
            }
            for (polygon, bits) in pieces {
                let map = layer.freeze(&item.map, pa.clone(), pc.clone(), &bits);
                let mut all = item.bits.clone();
                all.push(bits);
                next.push(Work {
                    polygon,
                    bits: all,
                    map,
                });
            }
        }
        work = next;
    }

    let mut tiles: Vec<Tile> = work
        .into_iter()
        .map(|w| {
            let area = w.polygon.area();
            Tile {
                polygon: w.polygon,
                pattern: ActivationPattern::new(w.bits),
                map2d: w.map,
                area,
            }
        })
        .collect();
    tiles.sort_by(|a, b| a.pattern.cmp(&b.pattern));

    let index = GridIndex::build(slice.bounds, &tiles);
    let mut tess = SliceTessellation {
        slice: slice.clone(),
        tiles,
        edges: Vec::new(),
        meta: Metadata {
            net_hash: network_hash(net),
            layers: net.depth(),
            snap_eps: SNAP_EPS,
            area_eps: AREA_EPS,
            max_tiles: opts.max_tiles,
        },
        index,
    };
    tess.edges = tess.build_edges();
    Ok(tess)
}

/// Which output coordinates define the decision function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Logit {
    /// Zero set of output `i`.
    Single(usize),
    /// Zero set of output `i` minus output `j`.
    Pair(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryPiece {
    Segment([Point; 2]),
    /// The decision function vanishes on the whole tile.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySegment {
    pub tile: usize,
    pub piece: BoundaryPiece,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsOptions {
    pub histogram_bins: usize,
    pub density_resolution: (usize, usize),
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self {
            histogram_bins: 16,
            density_resolution: (32, 32),
        }
    }
}

/// Histogram of `log10(area)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TessellationStats {
    pub tile_count: usize,
    pub area_histogram: Histogram,
    /// Largest singular value of each tile's slice-restricted linear part.
    pub spectral_norms: Vec<f64>,
    /// Interior edge segments per grid cell.
    pub density: DensityGrid,
}

impl SliceTessellation {
    pub fn slice(&self) -> &Slice {
        &self.slice
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn edges(&self) -> &[TileEdge] {
        &self.edges
    }

    pub fn metadata(&self) -> &Metadata {
        &self.meta
    }

    fn tol(&self) -> f64 {
        1e-9 * self.slice.bounds.diameter()
    }

    pub fn total_area(&self) -> f64 {
        self.tiles.iter().map(|t| t.area).sum()
    }

    /// Index of a tile whose closed polygon contains `p`. On shared
    /// boundaries the tile with the greatest pattern wins, which is the side
    /// where the first differing neuron is active (pre-activation ≥ 0).
    pub fn locate_index(&self, p: Point) -> Result<usize> {
        if !self.slice.bounds.contains(p, 0.0) {
            return Err(Error::OutOfRange(p[0], p[1]));
        }
        let tol = 1e-12 * self.slice.bounds.diameter();
        let cands = self.index.query_point(p);
        if let Some(&best) = cands
            .iter()
            .filter(|&&i| self.tiles[i as usize].polygon.contains(p, tol))
            .max()
        {
            return Ok(best as usize);
        }
        // Numerical gap: fall back to the nearest tile.
        let nearest = (0..self.tiles.len())
            .max_by(|&a, &b| {
                let da = self.tiles[a].polygon.boundary_distance(p);
                let db = self.tiles[b].polygon.boundary_distance(p);
                da.total_cmp(&db)
            })
            .expect("tessellation has tiles");
        Ok(nearest)
    }

    pub fn locate_tile(&self, p: Point) -> Result<&Tile> {
        self.locate_index(p).map(|i| &self.tiles[i])
    }

    fn build_edges(&self) -> Vec<TileEdge> {
        let tol = self.tol();
        let mut edges = Vec::new();
        for (i, tile) in self.tiles.iter().enumerate() {
            for (a, b, label) in tile.polygon.edges() {
                let EdgeLabel::Neuron { layer, neuron } = label else {
                    edges.push(TileEdge {
                        tile: i,
                        neighbor: None,
                        segment: [a, b],
                        label,
                    });
                    continue;
                };
                if !tile.pattern.bit(layer, neuron) {
                    continue;
                }
                let d = sub(b, a);
                let len2 = d[0] * d[0] + d[1] * d[1];
                if len2 == 0.0 {
                    continue;
                }
                let len = libm::sqrt(len2);
                let lo = [a[0].min(b[0]) - tol, a[1].min(b[1]) - tol];
                let hi = [a[0].max(b[0]) + tol, a[1].max(b[1]) + tol];
                let cands = self.index.query_box(lo, hi);
                // Vertices of neighbors lying inside this edge (T-junctions).
                let mut cuts = vec![0.0, 1.0];
                for &j in &cands {
                    if j as usize == i {
                        continue;
                    }
                    for &v in self.tiles[j as usize].polygon.vertices() {
                        if segment_distance(v, a, b) < tol {
                            let t = ((v[0] - a[0]) * d[0] + (v[1] - a[1]) * d[1]) / len2;
                            if t * len > tol && (1.0 - t) * len > tol {
                                cuts.push(t);
                            }
                        }
                    }
                }
                cuts.sort_by(f64::total_cmp);
                cuts.dedup_by(|x, y| (*x - *y) * len <= tol);
                for w in cuts.windows(2) {
                    let p = [a[0] + w[0] * d[0], a[1] + w[0] * d[1]];
                    let q = [a[0] + w[1] * d[0], a[1] + w[1] * d[1]];
                    let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                    let neighbor = self.neighbor_across(i, &cands, mid, d, len);
                    edges.push(TileEdge {
                        tile: i,
                        neighbor,
                        segment: [p, q],
                        label,
                    });
                }
            }
        }
        edges
    }

    fn neighbor_across(&self, i: usize, cands: &[u32], mid: Point, dir: Point, len: f64) -> Option<usize> {
        let tol = self.tol();
        let on_edge = cands.iter().copied().map(|j| j as usize).find(|&j| {
            j != i
                && self.tiles[j]
                    .polygon
                    .edges()
                    .any(|(c, e, _)| segment_distance(mid, c, e) < tol)
        });
        on_edge.or_else(|| {
            // Counterclockwise polygons have their outside on the right.
            let step = 10.0 * tol / len;
            let probe = [mid[0] + dir[1] * step, mid[1] - dir[0] * step];
            self.locate_index(probe).ok().filter(|&j| j != i)
        })
    }

    /// Clipped zero set of the selected decision function, one piece per tile.
    pub fn decision_boundary(&self, logit: Logit) -> Result<Vec<BoundarySegment>> {
        let outputs = self.tiles.first().map_or(0, |t| t.map2d.c.len());
        let check = |idx: usize| {
            if idx >= outputs {
                Err(Error::Index {
                    what: "output",
                    index: idx,
                    len: outputs,
                })
            } else {
                Ok(())
            }
        };
        let (i, j) = match logit {
            Logit::Single(i) => {
                check(i)?;
                (i, None)
            }
            Logit::Pair(i, j) => {
                check(i)?;
                check(j)?;
                (i, Some(j))
            }
        };
        let bd = self.slice.bounds;
        let (w, h) = (bd.s1 - bd.s0, bd.t1 - bd.t0);
        let mut out = Vec::new();
        for (ti, tile) in self.tiles.iter().enumerate() {
            let coef = |r: usize| (tile.map2d.a[(r, 0)], tile.map2d.a[(r, 1)], tile.map2d.c[r]);
            let (mut a, mut b, mut c) = coef(i);
            if let Some(j) = j {
                let (aj, bj, cj) = coef(j);
                a -= aj;
                b -= bj;
                c -= cj;
            }
            let f = |p: Point| a * p[0] + b * p[1] + c;
            let vals: Vec<f64> = tile.polygon.vertices().iter().map(|&p| f(p)).collect();
            let scale = (a.abs() * w).max(b.abs() * h).max(c.abs());
            if scale <= 1e-14 {
                out.push(BoundarySegment {
                    tile: ti,
                    piece: BoundaryPiece::Degenerate,
                });
                continue;
            }
            let verts = tile.polygon.vertices();
            let n = verts.len();
            let mut pts: Vec<Point> = Vec::new();
            for k in 0..n {
                let m = (k + 1) % n;
                if vals[k] == 0.0 {
                    pts.push(verts[k]);
                } else if vals[k] * vals[m] < 0.0 {
                    let t = vals[k] / (vals[k] - vals[m]);
                    pts.push([
                        verts[k][0] + t * (verts[m][0] - verts[k][0]),
                        verts[k][1] + t * (verts[m][1] - verts[k][1]),
                    ]);
                }
            }
            if pts.len() < 2 {
                continue;
            }
            // Extreme points along the line direction.
            let dir = [-b, a];
            let key = |p: &Point| p[0] * dir[0] + p[1] * dir[1];
            let lo = pts.iter().copied().min_by(|p, q| key(p).total_cmp(&key(q))).unwrap();
            let hi = pts.iter().copied().max_by(|p, q| key(p).total_cmp(&key(q))).unwrap();
            if libm::hypot(hi[0] - lo[0], hi[1] - lo[1]) <= self.tol() {
                continue;
            }
            out.push(BoundarySegment {
                tile: ti,
                piece: BoundaryPiece::Segment([lo, hi]),
            });
        }
        Ok(out)
    }

    pub fn spectral_norms(&self) -> Vec<f64> {
        self.tiles.iter().map(|t| spectral_norm_2col(&t.map2d.a)).collect()
    }

    /// Interior edges from the given layer (all layers when `None`).
    pub fn interior_segments(&self, layer: Option<usize>) -> impl Iterator<Item = &TileEdge> + '_ {
        self.edges.iter().filter(move |e| match e.label {
            EdgeLabel::Boundary => false,
            EdgeLabel::Neuron { layer: l, .. } => layer.is_none_or(|want| want == l),
        })
    }

    pub fn density(&self, layer: Option<usize>, nx: usize, ny: usize) -> DensityGrid {
        let mut grid = DensityGrid::new(self.slice.bounds, nx.max(1), ny.max(1));
        for e in self.interior_segments(layer) {
            grid.add_segment(e.segment[0], e.segment[1]);
        }
        grid
    }

    pub fn stats(&self, opts: StatsOptions) -> TessellationStats {
        let bins = opts.histogram_bins.max(1);
        let logs: Vec<f64> = self.tiles.iter().map(|t| libm::log10(t.area)).collect();
        let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0usize; bins];
        for &v in &logs {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let (nx, ny) = opts.density_resolution;
        TessellationStats {
            tile_count: self.tiles.len(),
            area_histogram: Histogram { edges, counts },
            spectral_norms: self.spectral_norms(),
            density: self.density(None, nx, ny),
        }
    }
}

/// FNV-1a over the network's shape and parameter bits.
pub fn network_hash(net: &Network) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |x: u64| {
        for byte in x.to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(net.input_dim() as u64);
    for layer in net.layers() {
        eat(layer.width() as u64);
        eat(match layer.activation {
            crate::net::Activation::Relu => 1,
            crate::net::Activation::Abs => 2,
            crate::net::Activation::LeakyRelu(a) => 3 ^ a.to_bits(),
            crate::net::Activation::Identity => 4,
        });
        eat(u64::from(layer.residual));
        layer.weight.iter().chain(layer.bias.iter()).for_each(|v| eat(v.to_bits()));
        if let Some(bn) = &layer.batch_norm {
            bn.mu.iter().chain(bn.nu.iter()).for_each(|v| eat(v.to_bits()));
            eat(bn.epsilon.to_bits());
        }
    }
    h
}

/// Uniform bucket grid over the slice bounds holding tile indices by bbox.
#[derive(Debug, Clone)]
struct GridIndex {
    bounds: Bounds,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl GridIndex {
    fn build(bounds: Bounds, tiles: &[Tile]) -> Self {
        let side = (libm::ceil(libm::sqrt(tiles.len() as f64)) as usize).clamp(1, 512);
        let mut idx = Self {
            bounds,
            nx: side,
            ny: side,
            cells: vec![Vec::new(); side * side],
        };
        for (i, t) in tiles.iter().enumerate() {
            let (lo, hi) = t.polygon.bbox();
            let (x0, y0) = idx.cell(lo);
            let (x1, y1) = idx.cell(hi);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    idx.cells[y * idx.nx + x].push(i as u32);
                }
            }
        }
        idx
    }

    fn cell(&self, p: Point) -> (usize, usize) {
        let b = &self.bounds;
        let fx = (p[0] - b.s0) / (b.s1 - b.s0) * self.nx as f64;
        let fy = (p[1] - b.t0) / (b.t1 - b.t0) * self.ny as f64;
        let cx = (libm::floor(fx).max(0.0) as usize).min(self.nx - 1);
        let cy = (libm::floor(fy).max(0.0) as usize).min(self.ny - 1);
        (cx, cy)
    }

    fn query_point(&self, p: Point) -> &[u32] {
        let (x, y) = self.cell(p);
        &self.cells[y * self.nx + x]
    }

    fn query_box(&self, lo: Point, hi: Point) -> Vec<u32> {
        let (x0, y0) = self.cell(lo);
        let (x1, y1) = self.cell(hi);
        let mut out = Vec::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                out.extend_from_slice(&self.cells[y * self.nx + x]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests;
