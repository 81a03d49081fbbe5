//! Piecewise-linear networks as exact affine splines.
//!
//! A network is a chain of dense layers `z ↦ σ(W z + b)` (optionally plus
//! `z` for residual layers, optionally with the bias replaced by batch
//! statistics). Every activation is continuous piecewise linear, so on each
//! tile of the input tessellation the network is one affine map; the tile is
//! identified by the [`ActivationPattern`] of the point.

mod data;
mod train;

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use data::Dataset;
pub use train::{
    batchnorm_update, gradients, init_network, squared_loss, train_sgd, BiasInit, InitOptions,
    LayerGradient, TrainConfig, TrainOutcome,
};

/// Default lower bound on a batch-norm variance.
pub const BN_EPSILON: f64 = 1e-8;

/// Scalar nonlinearity applied entrywise after the affine step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    Abs,
    /// Leaky ReLU with negative-side slope `alpha ∈ (0, 1)`.
    LeakyRelu(f64),
    Identity,
}

impl Activation {
    pub fn apply(self, u: f64) -> f64 {
        u * self.slope(u >= 0.0)
    }

    /// Slope on the branch selected by `active` (`true` means `u ≥ 0`).
    pub fn slope(self, active: bool) -> f64 {
        match (self, active) {
            (_, true) | (Activation::Identity, false) => 1.0,
            (Activation::Relu, false) => 0.0,
            (Activation::Abs, false) => -1.0,
            (Activation::LeakyRelu(alpha), false) => alpha,
        }
    }

    /// Whether the activation has a kink at zero, i.e. its neurons cut tiles.
    pub fn has_kink(self) -> bool {
        !matches!(self, Activation::Identity)
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Abs => "abs",
            Activation::LeakyRelu(_) => "leaky_relu",
            Activation::Identity => "identity",
        }
    }
}

/// Per-neuron batch statistics replacing the bias of a layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub mu: DVector<f64>,
    pub nu: DVector<f64>,
    pub epsilon: f64,
}

impl BatchNormState {
    /// Neutral statistics (`μ = 0`, `ν = 1`) for a layer of the given width.
    pub fn identity(width: usize) -> Self {
        Self {
            mu: DVector::zeros(width),
            nu: DVector::from_element(width, 1.0),
            epsilon: BN_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Rows are output neurons.
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
    pub residual: bool,
    pub batch_norm: Option<BatchNormState>,
}

impl Layer {
    pub fn new(weight: DMatrix<f64>, bias: DVector<f64>, activation: Activation) -> Self {
        Self {
            weight,
            bias,
            activation,
            residual: false,
            batch_norm: None,
        }
    }

    pub fn with_residual(mut self, residual: bool) -> Self {
        self.residual = residual;
        self
    }

    pub fn with_batch_norm(mut self, bn: BatchNormState) -> Self {
        self.batch_norm = Some(bn);
        self
    }

    pub fn width(&self) -> usize {
        self.weight.nrows()
    }

    pub fn input_width(&self) -> usize {
        self.weight.ncols()
    }

    /// The affine map `z ↦ pre-activation` with batch-norm folded in:
    /// `(W z − μ) / ν` for normalized layers, `W z + b` otherwise.
    pub fn effective_affine(&self) -> (DMatrix<f64>, DVector<f64>) {
        match &self.batch_norm {
            None => (self.weight.clone(), self.bias.clone()),
            Some(bn) => {
                let mut w = self.weight.clone();
                let mut b = DVector::zeros(self.width());
                for k in 0..self.width() {
                    let inv = 1.0 / bn.nu[k];
                    w.row_mut(k).scale_mut(inv);
                    b[k] = -bn.mu[k] * inv;
                }
                (w, b)
            }
        }
    }

    pub fn pre_activation(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut pre = &self.weight * z;
        match &self.batch_norm {
            None => pre += &self.bias,
            Some(bn) => {
                for k in 0..pre.len() {
                    pre[k] = (pre[k] - bn.mu[k]) / bn.nu[k];
                }
            }
        }
        pre
    }

    /// Applies the activation chosen by `bits` (frozen) and the skip term.
    pub(crate) fn finish(&self, z: &DVector<f64>, pre: &DVector<f64>, bits: &[bool]) -> DVector<f64> {
        let mut out = DVector::from_fn(pre.len(), |k, _| pre[k] * self.activation.slope(bits[k]));
        if self.residual {
            out += z;
        }
        out
    }

    /// Pattern bits of a pre-activation vector; non-kinked neurons report `true`.
    pub fn bits(&self, pre: &DVector<f64>) -> Vec<bool> {
        let kinked = self.activation.has_kink();
        pre.iter().map(|&u| !kinked || u >= 0.0).collect()
    }

    /// Number of trainable parameters: `W` row-major followed by `b`.
    pub fn param_count(&self) -> usize {
        self.width() * (self.input_width() + 1)
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for k in 0..self.width() {
            out.extend(self.weight.row(k).iter().copied());
        }
        out.extend(self.bias.iter().copied());
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter vector length");
        let cols = self.input_width();
        for k in 0..self.width() {
            for j in 0..cols {
                self.weight[(k, j)] = params[k * cols + j];
            }
        }
        let off = self.width() * cols;
        for k in 0..self.width() {
            self.bias[k] = params[off + k];
        }
    }
}

/// Activation states of all neurons, layer by layer.
///
/// Bit `k` of layer `ℓ` is `true` iff the pre-activation of that neuron is
/// `≥ 0`. Neurons without a kink (identity activation) always report `true`,
/// so the pattern is constant on every tile.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActivationPattern {
    layers: Vec<Vec<bool>>,
}

impl ActivationPattern {
    pub fn new(layers: Vec<Vec<bool>>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Vec<bool>] {
        &self.layers
    }

    pub fn bit(&self, layer: usize, neuron: usize) -> bool {
        self.layers[layer][neuron]
    }

    pub fn total_bits(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }
}

/// The affine function `x ↦ A x + c` computed on one tile.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl AffineMap {
    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.c
    }
}

/// Result of a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub output: DVector<f64>,
    /// Pre-activation vector of every layer (the argument of σ).
    pub preacts: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidNetwork("input_dim must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("network has no layers".into()));
        }
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            let rows = layer.width();
            if rows == 0 {
                return Err(Error::InvalidNetwork(format!("layer {i}: zero width")));
            }
            if layer.input_width() != width {
                return Err(Error::InvalidNetwork(format!(
                    "layer {i}: weight columns {} ≠ input width {width}",
                    layer.input_width()
                )));
            }
            if layer.bias.len() != rows {
                return Err(Error::InvalidNetwork(format!(
                    "layer {i}: bias length {} ≠ rows {rows}",
                    layer.bias.len()
                )));
            }
            if layer.residual && rows != width {
                return Err(Error::InvalidNetwork(format!(
                    "layer {i}: residual layer needs equal widths, got {width} → {rows}"
                )));
            }
            if let Activation::LeakyRelu(alpha) = layer.activation {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::InvalidNetwork(format!(
                        "layer {i}: leaky_relu alpha {alpha} outside (0, 1)"
                    )));
                }
            }
            if layer.weight.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidNetwork(format!("layer {i}: non-finite parameter")));
            }
            if let Some(bn) = &layer.batch_norm {
                if bn.mu.len() != rows || bn.nu.len() != rows {
                    return Err(Error::InvalidNetwork(format!(
                        "layer {i}: batch_norm statistics length ≠ rows {rows}"
                    )));
                }
                if !(bn.epsilon > 0.0) || !bn.epsilon.is_finite() {
                    return Err(Error::InvalidNetwork(format!(
                        "layer {i}: batch_norm epsilon must be positive"
                    )));
                }
                if bn.mu.iter().any(|v| !v.is_finite())
                    || bn.nu.iter().any(|&v| !v.is_finite() || v < libm::sqrt(bn.epsilon))
                {
                    return Err(Error::InvalidNetwork(format!(
                        "layer {i}: batch_norm statistics must be finite with nu ≥ √epsilon"
                    )));
                }
            }
            width = rows;
        }
        Ok(Self { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, Layer::width)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn neuron_count(&self) -> usize {
        self.layers.iter().map(Layer::width).sum()
    }

    pub fn has_batch_norm(&self) -> bool {
        self.layers.iter().any(|l| l.batch_norm.is_some())
    }

    /// The network made of the first `n` layers (`1 ≤ n ≤ depth`).
    pub fn truncated(&self, n: usize) -> Result<Network> {
        if n == 0 || n > self.depth() {
            return Err(Error::Index {
                what: "layer count",
                index: n,
                len: self.depth(),
            });
        }
        Ok(Network {
            input_dim: self.input_dim,
            layers: self.layers[..n].to_vec(),
        })
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub(crate) fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Shape {
                what: "network input",
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn check_layer(&self, layer: usize) -> Result<()> {
        if layer >= self.depth() {
            return Err(Error::Index {
                what: "layer",
                index: layer,
                len: self.depth(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &DVector<f64>) -> Result<Forward> {
        self.check_input(x)?;
        let mut z = x.clone();
        let mut preacts = Vec::with_capacity(self.depth());
        for layer in &self.layers {
            let pre = layer.pre_activation(&z);
            let bits = layer.bits(&pre);
            z = layer.finish(&z, &pre, &bits);
            preacts.push(pre);
        }
        Ok(Forward { output: z, preacts })
    }

    pub fn output(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.forward(x).map(|f| f.output)
    }

    pub fn activation_pattern(&self, x: &DVector<f64>) -> Result<ActivationPattern> {
        let fwd = self.forward(x)?;
        Ok(self.pattern_of(&fwd))
    }

    pub(crate) fn pattern_of(&self, fwd: &Forward) -> ActivationPattern {
        ActivationPattern::new(
            self.layers
                .iter()
                .zip(&fwd.preacts)
                .map(|(l, pre)| l.bits(pre))
                .collect(),
        )
    }

    /// Evaluates the network with every activation frozen to `pattern`.
    ///
    /// Inside the tile of `pattern` this equals [`Network::forward`]; outside
    /// it is the affine extension of that tile's map.
    pub fn forward_frozen(&self, x: &DVector<f64>, pattern: &ActivationPattern) -> DVector<f64> {
        let mut z = x.clone();
        for (layer, bits) in self.layers.iter().zip(pattern.layers()) {
            let pre = layer.pre_activation(&z);
            z = layer.finish(&z, &pre, bits);
        }
        z
    }

    /// The affine map of the tile containing `x`.
    pub fn local_affine(&self, x: &DVector<f64>) -> Result<AffineMap> {
        let pattern = self.activation_pattern(x)?;
        Ok(self.affine_for_pattern(&pattern))
    }

    /// Composes the per-layer affine maps with activations frozen to `pattern`.
    pub fn affine_for_pattern(&self, pattern: &ActivationPattern) -> AffineMap {
        let start = AffineMap {
            a: DMatrix::identity(self.input_dim, self.input_dim),
            c: DVector::zeros(self.input_dim),
        };
        self.layers
            .iter()
            .zip(pattern.layers())
            .fold(start, |acc, (layer, bits)| {
                let (pa, pc) = layer.compose(&acc);
                layer.freeze(&acc, pa, pc, bits)
            })
    }
}

impl Layer {
    /// Pre-activation as an affine function of whatever `input` is parameterized by.
    pub(crate) fn compose(&self, input: &AffineMap) -> (DMatrix<f64>, DVector<f64>) {
        let (w, b) = self.effective_affine();
        (&w * &input.a, &w * &input.c + b)
    }

    /// Layer output as an affine function, given the composed pre-activation
    /// `(pa, pc)` and the frozen pattern bits of this layer.
    pub(crate) fn freeze(
        &self,
        input: &AffineMap,
        mut pa: DMatrix<f64>,
        mut pc: DVector<f64>,
        bits: &[bool],
    ) -> AffineMap {
        for (k, &bit) in bits.iter().enumerate() {
            let s = self.activation.slope(bit);
            if s != 1.0 {
                pa.row_mut(k).scale_mut(s);
                pc[k] *= s;
            }
        }
        if self.residual {
            pa += &input.a;
            pc += &input.c;
        }
        AffineMap { a: pa, c: pc }
    }
}

#[cfg(test)]
mod tests;
