//! Slice specifications and tessellation documents.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};
use tessera::geometry::EdgeLabel;
use tessera::grid::DensityGrid;
use tessera::nalgebra::DVector;
use tessera::tessellation::{BoundaryPiece, BoundarySegment, Bounds, TessellationStats};
use tessera::{ActivationPattern, Slice, SliceTessellation};

use crate::error::{CliError, Result};
use crate::json;

pub const TESSELLATION_FORMAT_VERSION: u64 = 1;

/// Packs bits least-significant first: bit `k` is bit `k % 8` of byte `k / 8`.
pub fn encode_bits(bits: &[bool]) -> String {
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (k, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
        bytes[k / 8] |= 1 << (k % 8);
    }
    STANDARD.encode(bytes)
}

pub fn decode_bits(text: &str, len: usize) -> Result<Vec<bool>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| CliError::Schema(format!("pattern: {e}")))?;
    if bytes.len() != len.div_ceil(8) {
        return Err(CliError::Schema(format!(
            "pattern: {} bytes for {len} bits",
            bytes.len()
        )));
    }
    Ok((0..len).map(|k| bytes[k / 8] >> (k % 8) & 1 == 1).collect())
}

pub fn pattern_value(p: &ActivationPattern) -> Value {
    Value::Array(p.layers().iter().map(|l| Value::from(encode_bits(l))).collect())
}

pub fn bounds_value(b: &Bounds) -> Value {
    json::floats(&[b.s0, b.s1, b.t0, b.t1])
}

pub fn slice_value(s: &Slice) -> Value {
    json!({
        "format_version": TESSELLATION_FORMAT_VERSION,
        "origin": json::vector(s.origin()),
        "u": json::vector(s.u()),
        "v": json::vector(s.v()),
        "bounds": bounds_value(&s.bounds()),
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SliceDoc {
    format_version: Option<u64>,
    origin: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    bounds: Option<[f64; 4]>,
}

/// Parses a slice document; `bounds` overrides the document's own bounds.
pub fn parse_slice(text: &str, bounds: Option<Bounds>) -> Result<Slice> {
    let doc: SliceDoc = serde_json::from_str(text).map_err(|e| CliError::Schema(format!("slice: {e}")))?;
    if doc.format_version.is_some_and(|v| v != TESSELLATION_FORMAT_VERSION) {
        return Err(CliError::Schema("slice: unsupported format_version".into()));
    }
    let bounds = match (bounds, doc.bounds) {
        (Some(b), _) => b,
        (None, Some([s0, s1, t0, t1])) => Bounds::new(s0, s1, t0, t1)?,
        (None, None) => return Err(CliError::Schema("slice: no bounds given".into())),
    };
    Ok(Slice::new(
        DVector::from_vec(doc.origin),
        DVector::from_vec(doc.u),
        DVector::from_vec(doc.v),
        bounds,
    )?)
}

fn label_value(label: EdgeLabel) -> Value {
    match label {
        EdgeLabel::Boundary => Value::Null,
        EdgeLabel::Neuron { layer, neuron } => json!({ "layer": layer, "neuron": neuron }),
    }
}

pub fn boundary_value(segments: &[BoundarySegment]) -> Value {
    Value::Array(
        segments
            .iter()
            .map(|s| match &s.piece {
                BoundaryPiece::Segment([a, b]) => json!({
                    "tile": s.tile,
                    "segment": [json::point(*a), json::point(*b)],
                }),
                BoundaryPiece::Degenerate => json!({ "tile": s.tile, "degenerate": true }),
            })
            .collect(),
    )
}

pub fn grid_value(grid: &DensityGrid) -> Value {
    let rows: Vec<Value> = (0..grid.ny)
        .map(|iy| Value::Array((0..grid.nx).map(|ix| Value::from(grid.get(ix, iy))).collect()))
        .collect();
    json!({
        "bounds": bounds_value(&grid.bounds),
        "nx": grid.nx,
        "ny": grid.ny,
        "row_order": "increasing t",
        "counts": rows,
        "total": grid.total(),
        "max": grid.max(),
    })
}

pub fn stats_value(stats: &TessellationStats) -> Value {
    json!({
        "format_version": TESSELLATION_FORMAT_VERSION,
        "tile_count": stats.tile_count,
        "area_histogram": {
            "log10_area_edges": json::floats(&stats.area_histogram.edges),
            "counts": stats.area_histogram.counts,
        },
        "spectral_norms": json::floats(&stats.spectral_norms),
        "density": grid_value(&stats.density),
    })
}

/// Full tessellation document; `boundary` is included when given.
pub fn tessellation_value(tess: &SliceTessellation, boundary: Option<&[BoundarySegment]>) -> Value {
    let meta = tess.metadata();
    let norms = tess.spectral_norms();
    let tiles: Vec<Value> = tess
        .tiles()
        .iter()
        .zip(&norms)
        .map(|(t, &norm)| {
            json!({
                "polygon": Value::Array(t.polygon.vertices().iter().map(|&p| json::point(p)).collect()),
                "pattern": pattern_value(&t.pattern),
                "A2d": json::matrix(&t.map2d.a),
                "c": json::vector(&t.map2d.c),
                "area": json::num(t.area),
                "spectral_norm": json::num(norm),
            })
        })
        .collect();
    let edges: Vec<Value> = tess
        .edges()
        .iter()
        .map(|e| {
            json!({
                "tile": e.tile,
                "neighbor": e.neighbor,
                "segment": [json::point(e.segment[0]), json::point(e.segment[1])],
                "label": label_value(e.label),
            })
        })
        .collect();
    let mut doc = json!({
        "format_version": TESSELLATION_FORMAT_VERSION,
        "metadata": {
            "net_hash": format!("{:016x}", meta.net_hash),
            "layers": meta.layers,
            "snap_eps": json::num(meta.snap_eps),
            "area_eps": json::num(meta.area_eps),
            "max_tiles": meta.max_tiles,
            "pattern_encoding": "base64, one bitset per layer, least significant bit first",
        },
        "slice": slice_value(tess.slice()),
        "tiles": tiles,
        "edges": edges,
    });
    if let Some(b) = boundary {
        doc["decision_boundary"] = boundary_value(b);
    }
    doc
}
