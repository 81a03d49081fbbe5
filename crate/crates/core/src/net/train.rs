use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use super::{Activation, BatchNormState, Dataset, Layer, Network};
use crate::error::{Error, Result};
use crate::rng;

/// Minibatch gradient descent settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    /// Recompute batch-norm statistics on each minibatch before the step.
    pub batch_norm: bool,
}

impl TrainConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be finite and ≥ 0".into()));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::InvalidConfig(alloc::format!(
                "batch size {} outside 1..={n}",
                self.batch_size
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("step count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    /// Minibatch loss measured before each step's update.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

struct BatchTrace {
    /// Layer inputs, one column per sample.
    inputs: Vec<DMatrix<f64>>,
    pres: Vec<DMatrix<f64>>,
    output: DMatrix<f64>,
}

fn batch_forward(net: &Network, x: &DMatrix<f64>) -> BatchTrace {
    let mut z = x.transpose();
    let mut inputs = Vec::with_capacity(net.depth());
    let mut pres = Vec::with_capacity(net.depth());
    for layer in net.layers() {
        let (w, b) = layer.effective_affine();
        let mut pre = &w * &z;
        for mut col in pre.column_iter_mut() {
            col += &b;
        }
        let act = layer.activation;
        let mut out = pre.map(|u| act.apply(u));
        if layer.residual {
            out += &z;
        }
        inputs.push(core::mem::replace(&mut z, out));
        pres.push(pre);
    }
    BatchTrace {
        inputs,
        pres,
        output: z,
    }
}

/// Mean squared two-norm error `(1/n) Σ ‖y_i − f(x_i)‖²`.
pub fn squared_loss(net: &Network, data: &Dataset) -> Result<f64> {
    data.check_against(net.input_dim(), net.output_dim())?;
    let trace = batch_forward(net, data.inputs());
    let resid = trace.output - data.labels().transpose();
    Ok(resid.norm_squared() / data.len() as f64)
}

/// Loss and its gradient with respect to every layer's `(W, b)`.
///
/// Kinks take the slope of the active branch. Batch-norm statistics are
/// treated as constants, so normalized layers receive a zero bias gradient.
pub fn gradients(net: &Network, data: &Dataset) -> Result<(f64, Vec<LayerGradient>)> {
    data.check_against(net.input_dim(), net.output_dim())?;
    let n = data.len() as f64;
    let trace = batch_forward(net, data.inputs());
    let resid = &trace.output - data.labels().transpose();
    let loss = resid.norm_squared() / n;
    let mut dz = resid * (2.0 / n);
    let mut grads = Vec::with_capacity(net.depth());
    for (l, layer) in net.layers().iter().enumerate().rev() {
        let act = layer.activation;
        let mut dpre = dz.clone();
        dpre.zip_apply(&trace.pres[l], |g, u| *g *= act.slope(u >= 0.0));
        let (w_eff, _) = layer.effective_affine();
        let mut dw = &dpre * trace.inputs[l].transpose();
        let db = match &layer.batch_norm {
            Some(bn) => {
                for k in 0..dw.nrows() {
                    dw.row_mut(k).scale_mut(1.0 / bn.nu[k]);
                }
                DVector::zeros(layer.width())
            }
            None => dpre.column_sum(),
        };
        let mut dprev = w_eff.transpose() * &dpre;
        if layer.residual {
            dprev += &dz;
        }
        dz = dprev;
        grads.push(LayerGradient { weight: dw, bias: db });
    }
    grads.reverse();
    Ok((loss, grads))
}

/// Sets every batch-norm layer's `μ`, `ν` to the batch mean and (population)
/// standard deviation of `w_k · z` (variance clamped below at `epsilon`),
/// layer by layer, so later layers see inputs produced with the
/// already-updated statistics.
pub fn batchnorm_update(net: &Network, batch: &Dataset) -> Result<Network> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if batch.input_dim() != net.input_dim() {
        return Err(Error::Shape {
            what: "batch inputs",
            expected: net.input_dim(),
            found: batch.input_dim(),
        });
    }
    let mut out = net.clone();
    let n = batch.len() as f64;
    let mut z = batch.inputs().transpose();
    for layer in out.layers_mut() {
        if let Some(bn) = layer.batch_norm.as_mut() {
            let proj = &layer.weight * &z;
            for k in 0..proj.nrows() {
                let row = proj.row(k);
                let mean = row.sum() / n;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                bn.mu[k] = mean;
                bn.nu[k] = libm::sqrt(var.max(bn.epsilon));
            }
        }
        let (w, b) = layer.effective_affine();
        let mut pre = &w * &z;
        for mut col in pre.column_iter_mut() {
            col += &b;
        }
        let act = layer.activation;
        let mut next = pre.map(|u| act.apply(u));
        if layer.residual {
            next += &z;
        }
        z = next;
    }
    Ok(out)
}

/// Plain minibatch gradient descent on the squared loss.
///
/// Minibatches are consecutive slices of a seeded permutation, reshuffled
/// once it is exhausted.
pub fn train_sgd(net: &Network, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    data.check_against(net.input_dim(), net.output_dim())?;
    cfg.validate(data.len())?;
    let mut rng = rng::seeded(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut current = net.clone();
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        if cursor + cfg.batch_size > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let mut picked = order[cursor..cursor + cfg.batch_size].to_vec();
        picked.sort_unstable();
        let batch = data.subset(&picked)?;
        cursor += cfg.batch_size;
        if cfg.batch_norm {
            current = batchnorm_update(&current, &batch)?;
        }
        let (loss, grads) = gradients(&current, &batch)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { step, what: "loss" });
        }
        for (layer, g) in current.layers_mut().iter_mut().zip(&grads) {
            if g.weight.iter().chain(g.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Divergence { step, what: "gradient" });
            }
            layer.weight -= &g.weight * cfg.learning_rate;
            layer.bias -= &g.bias * cfg.learning_rate;
            if layer.weight.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Divergence { step, what: "parameter" });
            }
        }
        losses.push(loss);
    }
    Ok(TrainOutcome {
        network: current,
        losses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasInit {
    Zero,
    /// Uniform on `[−h, h]`.
    Uniform(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitOptions {
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub bias: BiasInit,
    /// Flag every width-preserving hidden layer as residual.
    pub residual: bool,
    /// Attach (neutral) batch-norm statistics to every hidden layer.
    pub batch_norm: bool,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
            bias: BiasInit::Zero,
            residual: false,
            batch_norm: false,
        }
    }
}

/// Random network for the architecture `[D, h_1, …, C]`.
///
/// Weights are uniform on `±√(6 / (fan_in + fan_out))`, drawn layer by
/// layer in row-major order followed by that layer's biases.
pub fn init_network(arch: &[usize], opts: &InitOptions, seed: u64) -> Result<Network> {
    if arch.len() < 2 {
        return Err(Error::InvalidConfig("architecture needs input and output widths".into()));
    }
    let mut rng = rng::seeded(seed);
    let last = arch.len() - 2;
    let mut layers = Vec::with_capacity(arch.len() - 1);
    for (l, pair) in arch.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let mut weight = DMatrix::zeros(fan_out, fan_in);
        for k in 0..fan_out {
            for j in 0..fan_in {
                weight[(k, j)] = rng::uniform(&mut rng, -bound, bound);
            }
        }
        let bias = DVector::from_fn(fan_out, |_, _| match opts.bias {
            BiasInit::Zero => 0.0,
            BiasInit::Uniform(h) => rng::uniform(&mut rng, -h, h),
        });
        let hidden = l < last;
        let activation = if hidden { opts.hidden_activation } else { opts.output_activation };
        let mut layer = Layer::new(weight, bias, activation)
            .with_residual(hidden && opts.residual && fan_in == fan_out);
        if hidden && opts.batch_norm {
            layer = layer.with_batch_norm(BatchNormState::identity(fan_out));
        }
        layers.push(layer);
    }
    Network::new(arch[0], layers)
}
