//! Deterministic SVG and PGM figures.
//!
//! Every number is printed with six decimals and elements are emitted in
//! tile, edge and segment order, so equal inputs give byte-identical files.

use std::fmt::Write;

use tessera::grid::DensityGrid;
use tessera::tessellation::{BoundaryPiece, BoundarySegment, Bounds};
use tessera::SliceTessellation;

const MARGIN: f64 = 10.0;
const LEGEND_HEIGHT: f64 = 44.0;
const LEGEND_STEPS: usize = 32;
const EDGE_COLOR: &str = "#808080";
const BOUNDARY_COLOR: &str = "#ff0000";

fn f(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

/// Three-stop viridis-like gradient for `t ∈ [0, 1]`.
pub fn viridis(t: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 3] = [[68.0, 1.0, 84.0], [33.0, 145.0, 140.0], [253.0, 231.0, 37.0]];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let (lo, hi, w) = if t <= 0.5 {
        (STOPS[0], STOPS[1], t * 2.0)
    } else {
        (STOPS[1], STOPS[2], t * 2.0 - 1.0)
    };
    let mut out = [0u8; 3];
    for k in 0..3 {
        out[k] = (lo[k] + (hi[k] - lo[k]) * w).round() as u8;
    }
    out
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Maps slice coordinates to pixels, `t` growing upwards.
struct Frame {
    bounds: Bounds,
    scale: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn new(bounds: Bounds, width: f64) -> Self {
        let scale = width / (bounds.s1 - bounds.s0);
        Self {
            bounds,
            scale,
            width,
            height: (bounds.t1 - bounds.t0) * scale,
        }
    }

    fn x(&self, s: f64) -> f64 {
        MARGIN + (s - self.bounds.s0) * self.scale
    }

    fn y(&self, t: f64) -> f64 {
        MARGIN + (self.bounds.t1 - t) * self.scale
    }

    fn open(&self, out: &mut String, legend: bool) {
        let w = self.width + 2.0 * MARGIN;
        let h = self.height + 2.0 * MARGIN + if legend { LEGEND_HEIGHT } else { 0.0 };
        let _ = writeln!(
            out,
            r##"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"##,
            f(w),
            f(h),
            f(w),
            f(h)
        );
        let _ = writeln!(out, r##"<rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##, f(w), f(h));
    }

    /// Gradient strip with the scale's end values; `color` maps `[0, 1]`.
    fn legend(&self, out: &mut String, label: &str, min: f64, max: f64, color: impl Fn(f64) -> [u8; 3]) {
        let top = self.height + 2.0 * MARGIN;
        let step = self.width / LEGEND_STEPS as f64;
        let _ = writeln!(
            out,
            r##"<g id="legend" data-label="{label}" data-min="{}" data-max="{}">"##,
            f(min),
            f(max)
        );
        for k in 0..LEGEND_STEPS {
            let t = (k as f64 + 0.5) / LEGEND_STEPS as f64;
            let _ = writeln!(
                out,
                r##"<rect x="{}" y="{}" width="{}" height="12.000000" fill="{}"/>"##,
                f(MARGIN + k as f64 * step),
                f(top),
                f(step),
                hex(color(t))
            );
        }
        let _ = writeln!(
            out,
            r##"<text x="{}" y="{}" font-size="11" font-family="monospace">{label} min {}</text>"##,
            f(MARGIN),
            f(top + 28.0),
            f(min)
        );
        let _ = writeln!(
            out,
            r##"<text x="{}" y="{}" font-size="11" font-family="monospace" text-anchor="end">max {}</text>"##,
            f(MARGIN + self.width),
            f(top + 28.0),
            f(max)
        );
        out.push_str("</g>\n");
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TessellationStyle<'a> {
    /// Plot width in pixels; the height follows the slice aspect ratio.
    pub width: f64,
    /// Fill tiles by the spectral norm of their slice-restricted map.
    pub fill: bool,
    pub boundary: Option<&'a [BoundarySegment]>,
}

impl Default for TessellationStyle<'_> {
    fn default() -> Self {
        Self {
            width: 600.0,
            fill: false,
            boundary: None,
        }
    }
}

pub fn render_tessellation(tess: &SliceTessellation, style: &TessellationStyle) -> String {
    let frame = Frame::new(tess.slice().bounds(), style.width);
    let norms = tess.spectral_norms();
    let (lo, hi) = norms
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &n| (a.min(n), b.max(n)));
    let mut out = String::new();
    frame.open(&mut out, style.fill);
    out.push_str("<g id=\"tiles\" stroke=\"none\">\n");
    for (tile, &norm) in tess.tiles().iter().zip(&norms) {
        let fill = if style.fill {
            let t = if hi > lo { (norm - lo) / (hi - lo) } else { 0.0 };
            hex(viridis(t))
        } else {
            "#ffffff".into()
        };
        let pts: Vec<String> = tile
            .polygon
            .vertices()
            .iter()
            .map(|p| format!("{},{}", f(frame.x(p[0])), f(frame.y(p[1]))))
            .collect();
        let _ = writeln!(out, r##"<polygon points="{}" fill="{fill}"/>"##, pts.join(" "));
    }
    out.push_str("</g>\n");
    let _ = writeln!(out, r##"<g id="edges" stroke="{EDGE_COLOR}" stroke-width="0.500000">"##);
    for e in tess.edges() {
        let [a, b] = e.segment;
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"##,
            f(frame.x(a[0])),
            f(frame.y(a[1])),
            f(frame.x(b[0])),
            f(frame.y(b[1]))
        );
    }
    out.push_str("</g>\n");
    if let Some(segments) = style.boundary {
        let _ = writeln!(out, r##"<g id="decision-boundary" stroke="{BOUNDARY_COLOR}" stroke-width="1.500000">"##);
        for s in segments {
            if let BoundaryPiece::Segment([a, b]) = s.piece {
                let _ = writeln!(
                    out,
                    r##"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"##,
                    f(frame.x(a[0])),
                    f(frame.y(a[1])),
                    f(frame.x(b[0])),
                    f(frame.y(b[1]))
                );
            }
        }
        out.push_str("</g>\n");
    }
    if style.fill {
        frame.legend(&mut out, "spectral norm", lo, hi, viridis);
    }
    out.push_str("</svg>\n");
    out
}

fn gray(t: f64) -> [u8; 3] {
    let g = (255.0 * (1.0 - t.clamp(0.0, 1.0))).round() as u8;
    [g, g, g]
}

/// Grayscale cells, darker for more edge segments.
pub fn render_density(grid: &DensityGrid, width: f64) -> String {
    let frame = Frame::new(grid.bounds, width);
    let max = grid.max();
    let mut out = String::new();
    frame.open(&mut out, true);
    out.push_str("<g id=\"density\" stroke=\"none\">\n");
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let (lo, hi) = grid.cell_bounds(ix, iy);
            let t = if max > 0 { f64::from(grid.get(ix, iy)) / f64::from(max) } else { 0.0 };
            let _ = writeln!(
                out,
                r##"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"##,
                f(frame.x(lo[0])),
                f(frame.y(hi[1])),
                f(frame.x(hi[0]) - frame.x(lo[0])),
                f(frame.y(lo[1]) - frame.y(hi[1])),
                hex(gray(t))
            );
        }
    }
    out.push_str("</g>\n");
    frame.legend(&mut out, "edge segments per cell", 0.0, f64::from(max), gray);
    out.push_str("</svg>\n");
    out
}

/// Plain-text (`P2`) PGM, top row first, brighter for more edge segments.
pub fn render_pgm(grid: &DensityGrid) -> String {
    let max = grid.max();
    let maxval = max.clamp(1, 65_535);
    let mut out = format!("P2\n{} {}\n{maxval}\n", grid.nx, grid.ny);
    for iy in (0..grid.ny).rev() {
        let row: Vec<String> = (0..grid.nx)
            .map(|ix| {
                let c = u64::from(grid.get(ix, iy));
                (c * u64::from(maxval) / u64::from(max.max(1))).to_string()
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
