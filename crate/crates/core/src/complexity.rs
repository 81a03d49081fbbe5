//! Local complexity, total-least-squares alignment and hyperplane density.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::EdgeLabel;
use crate::grid::DensityGrid;
use crate::net::{AffineMap, Dataset, Network};
use crate::tessellation::{subdivide_with, Slice, SubdivideOptions};

/// Neighborhood for local complexity: the Euclidean ball of radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcConfig {
    radius: f64,
}

impl LcConfig {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidConfig("LC radius must be positive and finite".into()));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronDistance {
    pub layer: usize,
    pub neuron: usize,
    /// `|h(x)| / ‖∇h(x)‖`, or `+∞` for a vanishing gradient.
    pub distance: f64,
}

/// Distance from `x` to every kinked neuron's zero set, linearized through
/// the activation pattern at `x` (the hyperplane of the tile containing `x`).
pub fn neuron_distances(net: &Network, x: &DVector<f64>) -> Result<Vec<NeuronDistance>> {
    net.check_input(x)?;
    let d = net.input_dim();
    let mut acc = AffineMap {
        a: DMatrix::identity(d, d),
        c: DVector::zeros(d),
    };
    let mut out = Vec::with_capacity(net.neuron_count());
    for (l, layer) in net.layers().iter().enumerate() {
        let (pa, pc) = layer.compose(&acc);
        let pre = &pa * x + &pc;
        if layer.activation.has_kink() {
            for k in 0..layer.width() {
                let g = pa.row(k).norm();
                let distance = if g > 0.0 { pre[k].abs() / g } else { f64::INFINITY };
                out.push(NeuronDistance { layer: l, neuron: k, distance });
            }
        }
        let bits = layer.bits(&pre);
        acc = layer.freeze(&acc, pa, pc, &bits);
    }
    Ok(out)
}

/// Number of neuron hyperplanes meeting the open ball `B(x, r)`.
pub fn local_complexity(net: &Network, x: &DVector<f64>, cfg: &LcConfig) -> Result<usize> {
    Ok(neuron_distances(net, x)?
        .iter()
        .filter(|n| n.distance < cfg.radius)
        .count())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcSummary {
    pub mean: f64,
    pub per_point: Vec<usize>,
}

/// Boundary points are nudged by this much per coordinate before evaluation.
pub const BOUNDARY_NUDGE: f64 = 1e-9;

pub fn dataset_lc(net: &Network, data: &Dataset, cfg: &LcConfig) -> Result<LcSummary> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut per_point = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let mut x = data.input(i);
        let mut dists = neuron_distances(net, &x)?;
        if dists.iter().any(|n| n.distance == 0.0) {
            x.add_scalar_mut(BOUNDARY_NUDGE);
            dists = neuron_distances(net, &x)?;
        }
        per_point.push(dists.iter().filter(|n| n.distance < cfg.radius).count());
    }
    let mean = per_point.iter().sum::<usize>() as f64 / per_point.len() as f64;
    Ok(LcSummary { mean, per_point })
}

/// `0.05 ×` the median pairwise distance between inputs.
pub fn default_radius(data: &Dataset) -> Result<f64> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidConfig("default radius needs at least two points".into()));
    }
    let xs = data.inputs();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            dists.push((xs.row(i) - xs.row(j)).norm());
        }
    }
    let median = crate::linalg::median(&dists).expect("non-empty");
    if !(median > 0.0) {
        return Err(Error::InvalidConfig("all points coincide".into()));
    }
    Ok(0.05 * median)
}

/// Inputs of `layer` for every sample, one column per sample.
fn layer_inputs(net: &Network, data: &Dataset, layer: usize) -> Result<DMatrix<f64>> {
    net.check_layer(layer)?;
    if data.input_dim() != net.input_dim() {
        return Err(Error::Shape {
            what: "dataset inputs",
            expected: net.input_dim(),
            found: data.input_dim(),
        });
    }
    let mut z = data.inputs().transpose();
    for l in net.layers().iter().take(layer) {
        let mut next = DMatrix::zeros(l.width(), z.ncols());
        for (i, col) in z.column_iter().enumerate() {
            let zc = col.into_owned();
            let pre = l.pre_activation(&zc);
            let mut out = pre.map(|u| l.activation.apply(u));
            if l.residual {
                out += &zc;
            }
            next.set_column(i, &out);
        }
        z = next;
    }
    Ok(z)
}

/// Signed distances `(w_k · z_i + offset_k) / ‖w_k‖` of every sample to each
/// neuron's hyperplane in the layer's input space; rows are neurons.
/// The offset is `b_k`, or `−μ_k` for batch-normalized layers.
pub fn signed_distances(net: &Network, data: &Dataset, layer: usize) -> Result<DMatrix<f64>> {
    let z = layer_inputs(net, data, layer)?;
    let l = &net.layers()[layer];
    let mut out = DMatrix::zeros(l.width(), z.ncols());
    for k in 0..l.width() {
        let w = l.weight.row(k);
        let norm = w.norm();
        let offset = match &l.batch_norm {
            Some(bn) => -bn.mu[k],
            None => l.bias[k],
        };
        for i in 0..z.ncols() {
            out[(k, i)] = if norm > 0.0 {
                (w.dot(&z.column(i).transpose()) + offset) / norm
            } else {
                f64::INFINITY
            };
        }
    }
    Ok(out)
}

/// Mean squared orthogonal distance from the samples to each neuron's
/// hyperplane of `layer`. A zero weight row reports `+∞`.
pub fn tls_distance(net: &Network, data: &Dataset, layer: usize) -> Result<Vec<f64>> {
    let sd = signed_distances(net, data, layer)?;
    let n = sd.ncols() as f64;
    Ok(sd
        .row_iter()
        .map(|row| row.iter().map(|d| d * d).sum::<f64>() / n)
        .collect())
}

/// Counts, per grid cell, the edge segments created by `layer`'s neurons in
/// the exact tessellation of the first `layer + 1` layers.
pub fn hyperplane_density(
    net: &Network,
    slice: &Slice,
    layer: usize,
    resolution: (usize, usize),
    opts: SubdivideOptions,
) -> Result<DensityGrid> {
    net.check_layer(layer)?;
    let truncated = net.truncated(layer + 1)?;
    let tess = subdivide_with(&truncated, slice, opts)?;
    let mut grid = DensityGrid::new(slice.bounds(), resolution.0.max(1), resolution.1.max(1));
    for e in tess.edges() {
        if matches!(e.label, EdgeLabel::Neuron { layer: l, .. } if l == layer) {
            grid.add_segment(e.segment[0], e.segment[1]);
        }
    }
    Ok(grid)
}
