//! Frozen-pattern probes of the squared-error loss landscape.
//!
//! With every activation pattern frozen and all other layers fixed, the
//! network output is affine in one layer's `(W, b)`, so the loss restricted to
//! that layer is exactly quadratic on the region where no pattern flips. Its
//! Hessian `(2/n) Σ J_iᵀ J_i` is constant there and positive semidefinite.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::median;
use crate::net::{init_network, squared_loss, ActivationPattern, BiasInit, Dataset, InitOptions, Network};

/// Default relative eigenvalue cut for condition numbers.
pub const DEFAULT_EIGEN_CUT: f64 = 1e-10;

/// A network, a dataset and the activation pattern of every sample.
#[derive(Debug, Clone)]
pub struct RegionProbe {
    net: Network,
    data: Dataset,
    patterns: Vec<ActivationPattern>,
}

impl RegionProbe {
    pub fn new(net: Network, data: Dataset) -> Result<Self> {
        if data.input_dim() != net.input_dim() || data.output_dim() != net.output_dim() {
            return Err(Error::Shape {
                what: "probe dataset",
                expected: net.input_dim(),
                found: data.input_dim(),
            });
        }
        let patterns = (0..data.len())
            .map(|i| net.activation_pattern(&data.input(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { net, data, patterns })
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn patterns(&self) -> &[ActivationPattern] {
        &self.patterns
    }

    /// Squared loss of `net` (same architecture) with the probe's patterns frozen.
    pub fn frozen_loss(&self, net: &Network) -> f64 {
        let n = self.data.len();
        (0..n)
            .map(|i| {
                let y = net.forward_frozen(&self.data.input(i), &self.patterns[i]);
                (self.data.label(i) - y).norm_squared()
            })
            .sum::<f64>()
            / n as f64
    }

    /// Whether every sample keeps its frozen pattern under `net`.
    pub fn patterns_hold(&self, net: &Network) -> Result<bool> {
        for i in 0..self.data.len() {
            if net.activation_pattern(&self.data.input(i))? != self.patterns[i] {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The probe's network with `layer`'s parameters replaced.
    pub fn with_layer_params(&self, layer: usize, params: &[f64]) -> Network {
        let mut net = self.net.clone();
        net.layers_mut()[layer].set_params(params);
        net
    }
}

/// Exact Hessian of the frozen-pattern loss with respect to `layer`'s
/// parameters, ordered as `W` row-major followed by `b`. Normalized layers
/// ignore their bias, so its rows and columns are zero.
pub fn layer_hessian(probe: &RegionProbe, layer: usize) -> Result<DMatrix<f64>> {
    let net = &probe.net;
    net.check_layer(layer)?;
    let layers = net.layers();
    let target = &layers[layer];
    let (width, fan_in) = (target.width(), target.input_width());
    let params = target.param_count();
    let c = net.output_dim();
    let n = probe.data.len();

    // Downstream Jacobians only depend on the frozen slopes of each sample.
    let effective: Vec<DMatrix<f64>> = layers.iter().map(|l| l.effective_affine().0).collect();
    let mut jac = DMatrix::zeros(n * c, params);
    for i in 0..n {
        let pattern = &probe.patterns[i];
        let mut z = probe.data.input(i);
        for (m, l) in layers[..layer].iter().enumerate() {
            let pre = l.pre_activation(&z);
            z = l.finish(&z, &pre, &pattern.layers()[m]);
        }
        let mut t = DMatrix::<f64>::identity(c, c);
        for m in (layer + 1..layers.len()).rev() {
            let lm = &layers[m];
            let mut step = effective[m].clone();
            for (k, &bit) in pattern.layers()[m].iter().enumerate() {
                step.row_mut(k).scale_mut(lm.activation.slope(bit));
            }
            if lm.residual {
                step += DMatrix::<f64>::identity(lm.width(), lm.width());
            }
            t *= step;
        }
        for (k, &bit) in pattern.layers()[layer].iter().enumerate() {
            t.column_mut(k).scale_mut(target.activation.slope(bit));
        }
        for k in 0..width {
            let (wscale, bscale) = match &target.batch_norm {
                Some(bn) => (1.0 / bn.nu[k], 0.0),
                None => (1.0, 1.0),
            };
            for out in 0..c {
                let g = t[(out, k)];
                let row = i * c + out;
                for j in 0..fan_in {
                    jac[(row, k * fan_in + j)] = g * z[j] * wscale;
                }
                jac[(row, width * fan_in + k)] = g * bscale;
            }
        }
    }
    let mut h = jac.transpose() * &jac;
    h *= 2.0 / n as f64;
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// `λmax / λmin` over eigenvalues above `cut · λmax`; `None` when flat.
    pub condition: Option<f64>,
    pub cut: f64,
    /// Eigenvalues excluded by the cut.
    pub below_cut: usize,
    /// `λmax ≤ 0`: no curvature to condition.
    pub flat: bool,
}

pub fn spectrum(h: &DMatrix<f64>, cut: f64) -> Result<SpectrumReport> {
    if h.nrows() != h.ncols() {
        return Err(Error::Shape {
            what: "square matrix columns",
            expected: h.nrows(),
            found: h.ncols(),
        });
    }
    if h.nrows() == 0 {
        return Err(Error::Empty("matrix"));
    }
    let scale = h.amax().max(1.0);
    let asym = (h - h.transpose()).amax();
    if asym > 1e-9 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = (h + h.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let lmax = eigenvalues[0];
    if !(lmax > 0.0) {
        return Ok(SpectrumReport {
            below_cut: eigenvalues.len(),
            eigenvalues,
            condition: None,
            cut,
            flat: true,
        });
    }
    let kept: Vec<f64> = eigenvalues.iter().copied().filter(|&l| l > cut * lmax).collect();
    let lmin = kept.last().copied().unwrap_or(lmax);
    Ok(SpectrumReport {
        below_cut: eigenvalues.len() - kept.len(),
        eigenvalues,
        condition: Some(lmax / lmin),
        cut,
        flat: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticityOptions {
    /// Halve the radius until no sample's pattern flips at either end.
    pub shrink: bool,
    pub max_halvings: usize,
    /// Allowed spread of the second differences relative to their size.
    pub tolerance: f64,
}

impl Default for QuadraticityOptions {
    fn default() -> Self {
        Self {
            shrink: true,
            max_halvings: 60,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticityReport {
    pub quadratic: bool,
    pub radius: f64,
    pub halvings: usize,
    /// Whether the patterns held at both ends of the final segment.
    pub patterns_held: bool,
    pub second_differences: [f64; 3],
    /// Spread of the second differences over their largest magnitude.
    pub relative_spread: f64,
}

/// Samples the true loss at five equally spaced points of the parameter
/// segment `θ ± radius·direction` of one layer and tests whether its second
/// differences are constant.
///
/// Under frozen patterns every pre-activation is affine along the segment, so
/// agreement of the true patterns at both ends proves none flips in between.
/// The comparison allows for the rounding of the five loss evaluations
/// (`16 ε` of the largest loss) on top of the relative tolerance.
pub fn quadraticity_check(
    probe: &RegionProbe,
    layer: usize,
    direction: &DVector<f64>,
    radius: f64,
    opts: QuadraticityOptions,
) -> Result<QuadraticityReport> {
    probe.net.check_layer(layer)?;
    let theta = probe.net.layers()[layer].params();
    if direction.len() != theta.len() {
        return Err(Error::Shape {
            what: "direction",
            expected: theta.len(),
            found: direction.len(),
        });
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidConfig("radius must be positive".into()));
    }
    let at = |t: f64| -> Network {
        let p: Vec<f64> = theta.iter().zip(direction.iter()).map(|(a, d)| a + t * d).collect();
        probe.with_layer_params(layer, &p)
    };
    let mut r = radius;
    let mut halvings = 0;
    let patterns_held = loop {
        let held = probe.patterns_hold(&at(-r))? && probe.patterns_hold(&at(r))?;
        if held || !opts.shrink {
            break held;
        }
        if halvings == opts.max_halvings {
            return Err(Error::RegionTooSmall { radius: r });
        }
        r *= 0.5;
        halvings += 1;
    };
    let losses = [-1.0, -0.5, 0.0, 0.5, 1.0]
        .iter()
        .map(|&f| squared_loss(&at(f * r), &probe.data))
        .collect::<Result<Vec<f64>>>()?;
    let second = [
        losses[0] - 2.0 * losses[1] + losses[2],
        losses[1] - 2.0 * losses[2] + losses[3],
        losses[2] - 2.0 * losses[3] + losses[4],
    ];
    let hi = second.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = second.iter().copied().fold(f64::INFINITY, f64::min);
    let size = second.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let loss_scale = losses.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let spread = hi - lo;
    let allowed = opts.tolerance * size + 16.0 * f64::EPSILON * loss_scale;
    Ok(QuadraticityReport {
        quadratic: spread <= allowed,
        radius: r,
        halvings,
        patterns_held,
        second_differences: second,
        relative_spread: if size > 0.0 { spread / size } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedPair {
    pub seed: u64,
    /// Per-layer condition numbers (`None` for flat layers).
    pub plain: Vec<Option<f64>>,
    pub residual: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureReport {
    pub width: usize,
    pub depth: usize,
    pub pairs: Vec<SeedPair>,
    /// Median over every (seed, layer) condition number.
    pub median_plain: f64,
    pub median_residual: f64,
    /// Per-layer `(plain, residual)` medians over seeds.
    pub layer_medians: Vec<(Option<f64>, Option<f64>)>,
}

/// Initialization used for architecture comparisons.
pub fn comparison_init(residual: bool) -> InitOptions {
    InitOptions {
        bias: BiasInit::Uniform(0.1),
        residual,
        ..InitOptions::default()
    }
}

/// Per-layer condition numbers of a plain MLP against the same weights with
/// skip connections on every width-preserving hidden layer.
pub fn compare_architectures(
    width: usize,
    depth: usize,
    data: &Dataset,
    seeds: &[u64],
    cut: f64,
) -> Result<ArchitectureReport> {
    if width == 0 || depth == 0 {
        return Err(Error::InvalidConfig("width and depth must be positive".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Empty("seed list"));
    }
    let mut arch = alloc::vec![data.input_dim()];
    arch.extend(core::iter::repeat_n(width, depth));
    arch.push(data.output_dim());
    let conditions = |net: Network| -> Result<Vec<Option<f64>>> {
        let probe = RegionProbe::new(net, data.clone())?;
        (0..probe.net.depth())
            .map(|l| Ok(spectrum(&layer_hessian(&probe, l)?, cut)?.condition))
            .collect()
    };
    let mut pairs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let plain = conditions(init_network(&arch, &comparison_init(false), seed)?)?;
        let residual = conditions(init_network(&arch, &comparison_init(true), seed)?)?;
        pairs.push(SeedPair { seed, plain, residual });
    }
    let collect = |residual: bool, layer: Option<usize>| -> Vec<f64> {
        pairs
            .iter()
            .flat_map(|p| if residual { &p.residual } else { &p.plain }.iter().enumerate())
            .filter(|(l, _)| layer.is_none_or(|want| want == *l))
            .filter_map(|(_, k)| *k)
            .collect()
    };
    let layer_medians = (0..arch.len() - 1)
        .map(|l| (median(&collect(false, Some(l))), median(&collect(true, Some(l)))))
        .collect();
    Ok(ArchitectureReport {
        width,
        depth,
        median_plain: median(&collect(false, None)).unwrap_or(f64::NAN),
        median_residual: median(&collect(true, None)).unwrap_or(f64::NAN),
        layer_medians,
        pairs,
    })
}
