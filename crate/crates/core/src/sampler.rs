//! Volume-corrected (MaGNET) and polarity resampling for piecewise-affine
//! generators.
//!
//! A generator maps each latent tile `ω` affinely onto a piece of its output
//! manifold, stretching volumes by `√det(AᵀA)`. Weighting latent proposals by
//! `det(AᵀA)^ρ` gives native sampling at `ρ = 0`, manifold-uniform sampling
//! at `ρ = 1/2`, and concentrates on low-volume (`ρ < 0`) or high-volume
//! (`ρ > 0`) tiles otherwise.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::singular_values;
use crate::net::Network;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseDistribution {
    Uniform,
    StandardNormal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    base: BaseDistribution,
}

impl LatentDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, base: BaseDistribution) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidConfig("latent box bounds must have equal positive length".into()));
        }
        if lower.iter().zip(&upper).any(|(lo, hi)| !(hi > lo) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::InvalidConfig("latent box is degenerate".into()));
        }
        Ok(Self { lower, upper, base })
    }

    /// Uniform on `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(alloc::vec![lo; dim], alloc::vec![hi; dim], BaseDistribution::Uniform)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn base(&self) -> BaseDistribution {
        self.base
    }

    /// Proposal `index` of the stream `seed`, independent of draw order.
    pub fn draw(&self, seed: u64, index: u64) -> DVector<f64> {
        let mut r = rng::stream(seed, index);
        DVector::from_fn(self.dim(), |i, _| match self.base {
            BaseDistribution::Uniform => rng::uniform(&mut r, self.lower[i], self.upper[i]),
            BaseDistribution::StandardNormal => rng::standard_normal(&mut r),
        })
    }
}

/// Singular values below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-12;

/// `√det(AᵀA)` of the generator's tile at `x`, as the product of the
/// singular values of `A`.
pub fn jacobian_volume(gen: &Network, x: &DVector<f64>) -> Result<f64> {
    let d = gen.input_dim();
    if d > gen.output_dim() {
        return Err(Error::ManifoldDimension {
            latent: d,
            output: gen.output_dim(),
        });
    }
    let a = gen.local_affine(x)?.a;
    Ok(volume_factor(&a))
}

pub(crate) fn volume_factor(a: &DMatrix<f64>) -> f64 {
    let sv = singular_values(a);
    let top = sv.first().copied().unwrap_or(0.0);
    if !(top > 0.0) || sv.iter().any(|&s| s <= RANK_TOL * top) {
        return 0.0;
    }
    sv.iter().product()
}

/// Self-normalized weights `∝ (volume²)^ρ`; zero volumes get zero weight.
pub fn polarity_weights(volumes: &[f64], rho: f64) -> Result<Vec<f64>> {
    if !rho.is_finite() {
        return Err(Error::InvalidConfig("polarity must be finite".into()));
    }
    let logs: Vec<Option<f64>> = volumes
        .iter()
        .map(|&v| (v > 0.0).then(|| 2.0 * rho * libm::log(v)))
        .collect();
    let top = logs.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::DegeneratePool);
    }
    let raw: Vec<f64> = logs.iter().map(|l| l.map_or(0.0, |l| libm::exp(l - top))).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegeneratePool);
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Latent proposals with their volume factors and polarity weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePool {
    /// One proposal per row.
    pub proposals: DMatrix<f64>,
    pub volumes: Vec<f64>,
    pub weights: Vec<f64>,
    pub seed: u64,
    pub rho: f64,
}

impl SamplePool {
    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    /// The same proposals under another polarity.
    pub fn reweighted(&self, rho: f64) -> Result<SamplePool> {
        Ok(SamplePool {
            weights: polarity_weights(&self.volumes, rho)?,
            rho,
            ..self.clone()
        })
    }

    /// Effective sample size `1 / Σ w²`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Expected volume factor under the weights.
    pub fn weighted_volume(&self) -> f64 {
        self.weights.iter().zip(&self.volumes).map(|(w, v)| w * v).sum()
    }
}

pub fn build_pool(gen: &Network, domain: &LatentDomain, n: usize, rho: f64, seed: u64) -> Result<SamplePool> {
    if n == 0 {
        return Err(Error::Empty("sample pool"));
    }
    if domain.dim() != gen.input_dim() {
        return Err(Error::Shape {
            what: "latent dimension",
            expected: gen.input_dim(),
            found: domain.dim(),
        });
    }
    let mut proposals = DMatrix::zeros(n, domain.dim());
    let mut volumes = Vec::with_capacity(n);
    for i in 0..n {
        let z = domain.draw(seed, i as u64);
        volumes.push(jacobian_volume(gen, &z)?);
        proposals.set_row(i, &z.transpose());
    }
    let weights = polarity_weights(&volumes, rho)?;
    Ok(SamplePool {
        proposals,
        volumes,
        weights,
        seed,
        rho,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub indices: Vec<usize>,
    /// One latent per row.
    pub latents: DMatrix<f64>,
    /// Generator output per row.
    pub outputs: DMatrix<f64>,
}

/// Inverse-CDF draw over `order` (indices into `weights`) for uniform `u`.
fn pick(order: &[usize], cumulative: &[f64], u: f64) -> usize {
    let total = *cumulative.last().expect("non-empty");
    let target = u * total;
    // First entry whose cumulative weight exceeds the target; zero-weight
    // entries never qualify.
    let pos = cumulative.partition_point(|&c| c <= target).min(order.len() - 1);
    order[pos]
}

fn cumulative(order: &[usize], weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    order
        .iter()
        .map(|&i| {
            acc += weights[i];
            acc
        })
        .collect()
}

fn uniforms(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    (0..n).map(|_| r.random::<f64>()).collect()
}

/// Seeded multinomial resampling of `n_out` proposals by weight.
pub fn resample(pool: &SamplePool, gen: &Network, n_out: usize, seed: u64) -> Result<Resampled> {
    if n_out == 0 {
        return Err(Error::InvalidConfig("resample count must be at least 1".into()));
    }
    if pool.is_empty() {
        return Err(Error::Empty("sample pool"));
    }
    let order: Vec<usize> = (0..pool.len()).collect();
    let cum = cumulative(&order, &pool.weights);
    let indices: Vec<usize> = uniforms(seed, n_out)
        .into_iter()
        .map(|u| pick(&order, &cum, u))
        .collect();
    let latents = pool.proposals.select_rows(&indices);
    let mut outputs = DMatrix::zeros(n_out, gen.output_dim());
    for (r, row) in latents.row_iter().enumerate() {
        let y = gen.output(&row.transpose())?;
        outputs.set_row(r, &y.transpose());
    }
    Ok(Resampled {
        indices,
        latents,
        outputs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarityEntry {
    pub rho: f64,
    pub ess: f64,
    /// Mean volume factor over the resampled points.
    pub mean_volume: f64,
    /// Weighted mean volume factor over the whole pool.
    pub expected_volume: f64,
}

/// Mode/anti-mode concentration across polarities.
///
/// All polarities share the proposals and the resampling uniforms, and the
/// inverse CDF walks proposals in increasing volume order. Raising `ρ` tilts
/// the weights towards larger volumes (monotone likelihood ratio), so every
/// draw's volume, and hence the resampled mean, is non-decreasing in `ρ`.
pub fn polarity_sweep(
    gen: &Network,
    domain: &LatentDomain,
    rhos: &[f64],
    n: usize,
    n_out: usize,
    seed: u64,
) -> Result<Vec<PolarityEntry>> {
    if n_out == 0 {
        return Err(Error::InvalidConfig("resample count must be at least 1".into()));
    }
    let base = build_pool(gen, domain, n, 0.0, seed)?;
    let mut order: Vec<usize> = (0..base.len()).collect();
    order.sort_by(|&a, &b| base.volumes[a].total_cmp(&base.volumes[b]).then(a.cmp(&b)));
    let us = uniforms(seed ^ 0x9e37_79b9_7f4a_7c15, n_out);
    rhos.iter()
        .map(|&rho| {
            let pool = base.reweighted(rho)?;
            let cum = cumulative(&order, &pool.weights);
            let mean_volume =
                us.iter().map(|&u| pool.volumes[pick(&order, &cum, u)]).sum::<f64>() / n_out as f64;
            Ok(PolarityEntry {
                rho,
                ess: pool.ess(),
                mean_volume,
                expected_volume: pool.weighted_volume(),
            })
        })
        .collect()
}
