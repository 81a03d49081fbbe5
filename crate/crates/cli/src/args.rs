//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "tessera", version, about = "Exact geometry of piecewise-linear networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a freshly initialized network.
    Init(InitArgs),
    /// Train a network with minibatch gradient descent on squared loss.
    Train(TrainArgs),
    /// Exact tessellation of a planar input slice.
    Tessellate(TessellateArgs),
    /// Local complexity per data point and hyperplane-to-data distances.
    Lc(LcArgs),
    /// Hyperplane densities of zero-bias, random-bias and batch-norm initializations.
    BnDensity(BnDensityArgs),
    /// Volume-corrected or polarity resampling of a generator.
    Sample(SampleArgs),
    /// Frozen-pattern Hessian spectra and plain-vs-residual conditioning.
    ProbeLandscape(ProbeArgs),
    /// Print the version.
    Version,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationArg {
    Relu,
    Abs,
    #[value(name = "leaky_relu")]
    LeakyRelu,
    Identity,
}

#[derive(Debug, Args, Serialize)]
pub struct InitArgs {
    /// Layer widths from input to output, e.g. 2,20,20,1.
    #[arg(long, value_delimiter = ',', required = true)]
    pub arch: Vec<usize>,
    #[arg(long)]
    pub seed: u64,
    /// Network JSON to write.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "relu")]
    pub hidden: ActivationArg,
    #[arg(long, value_enum, default_value = "identity")]
    pub output_activation: ActivationArg,
    /// Negative-side slope for leaky_relu.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Biases drawn uniformly from [-h, h]; 0 gives zero biases.
    #[arg(long, default_value_t = 0.0)]
    pub bias_scale: f64,
    /// Skip connections on hidden layers whose input and output widths match.
    #[arg(long)]
    pub residual: bool,
    /// Batch normalization on hidden layers (neutral statistics).
    #[arg(long)]
    pub batch_norm: bool,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Trained network JSON to write.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Recompute batch-norm statistics on every minibatch before its step.
    #[arg(long)]
    pub batch_norm: bool,
    /// Per-step loss trace as CSV.
    #[arg(long)]
    pub losses: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Slice selection shared by the geometric commands.
#[derive(Debug, Args, Serialize)]
pub struct SliceArgs {
    /// Slice rectangle s0,s1,t0,t1.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub bounds: Option<Vec<f64>>,
    /// Slice JSON with origin, u, v and optional bounds.
    #[arg(long, conflicts_with = "anchors")]
    pub slice: Option<PathBuf>,
    /// Three dataset row indices spanning the slice plane.
    #[arg(long, value_delimiter = ',', requires = "data")]
    pub anchors: Option<Vec<usize>>,
}

#[derive(Debug, Args, Serialize)]
pub struct TessellateArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[command(flatten)]
    pub slice: SliceArgs,
    /// Dataset for --anchors.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Tessellation JSON to write.
    #[arg(long)]
    pub json: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Fill tiles by spectral norm in the SVG.
    #[arg(long)]
    pub fill: bool,
    /// Decision boundary: one output index, or two for their difference.
    #[arg(long, value_delimiter = ',')]
    pub boundary: Option<Vec<usize>>,
    /// Summary statistics JSON.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub bins: usize,
    /// Density grid cells per side in the statistics.
    #[arg(long, default_value_t = 32)]
    pub density_resolution: usize,
    #[arg(long, default_value_t = tessera::tessellation::DEFAULT_MAX_TILES)]
    pub max_tiles: usize,
    /// SVG plot width in pixels.
    #[arg(long, default_value_t = 600.0)]
    pub width: f64,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct LcArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Neighbourhood radius; defaults to 0.05 times the median pairwise distance.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Per-point local complexity CSV.
    #[arg(long)]
    pub csv: PathBuf,
    /// Summary JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Per-neuron TLS distance CSV.
    #[arg(long)]
    pub tls: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BnDensityArgs {
    /// Layer widths from input to output.
    #[arg(long, value_delimiter = ',', required = true)]
    pub arch: Vec<usize>,
    /// Batch for the batch-norm statistics; its bounding box is the data box.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Layer whose hyperplanes are counted.
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    /// Half-width of the uniform biases of the random-bias panel.
    #[arg(long, default_value_t = 1.0)]
    pub bias_scale: f64,
    /// Grid cells per side.
    #[arg(long, default_value_t = 32)]
    pub resolution: usize,
    #[command(flatten)]
    pub slice: SliceArgs,
    #[arg(long, default_value_t = tessera::tessellation::DEFAULT_MAX_TILES)]
    pub max_tiles: usize,
    #[arg(long, default_value_t = 300.0)]
    pub width: f64,
    /// Directory receiving one JSON, SVG and PGM per panel plus summary.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseArg {
    Uniform,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    /// Generator network.
    #[arg(long)]
    pub net: PathBuf,
    /// Polarity; 0 is native sampling, 0.5 volume-corrected sampling.
    #[arg(long, allow_negative_numbers = true)]
    pub rho: f64,
    /// Number of latent proposals.
    #[arg(long, default_value_t = 10_000)]
    pub pool: usize,
    /// Number of resampled points.
    #[arg(long, default_value_t = 64)]
    pub out: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// Resampled latents and outputs.
    #[arg(long)]
    pub output: PathBuf,
    /// Pool statistics JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Polarities for a mode/anti-mode sweep added to the report.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "report")]
    pub sweep: Option<Vec<f64>>,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub latent_lo: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub latent_hi: f64,
    /// Base distribution; the latent box only bounds the uniform base.
    #[arg(long, value_enum, default_value = "uniform")]
    pub base: BaseArg,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbeArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Layer to probe; all layers when omitted.
    #[arg(long)]
    pub layer: Option<usize>,
    /// Random layer/direction quadraticity probes.
    #[arg(long, default_value_t = 25)]
    pub probes: usize,
    /// Starting radius of each quadraticity probe.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Paired plain/residual initializations to compare.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Hidden width of the compared architectures.
    #[arg(long, default_value_t = 16)]
    pub width: usize,
    /// Hidden depth of the compared architectures.
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    /// Relative eigenvalue cut for condition numbers.
    #[arg(long, default_value_t = tessera::landscape::DEFAULT_EIGEN_CUT)]
    pub cut: f64,
    /// Report JSON to write.
    #[arg(long)]
    pub json: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}
