//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use tessera::complexity::{dataset_lc, default_radius, hyperplane_density, tls_distance, LcConfig};
use tessera::landscape::{
    compare_architectures, layer_hessian, quadraticity_check, spectrum, QuadraticityOptions, RegionProbe,
};
use tessera::nalgebra::{DMatrix, DVector};
use tessera::net::{batchnorm_update, init_network, train_sgd, BiasInit, InitOptions, TrainConfig};
use tessera::rng;
use tessera::sampler::{build_pool, polarity_sweep, resample, BaseDistribution, LatentDomain};
use tessera::tessellation::{subdivide_with, Bounds, Logit, StatsOptions, SubdivideOptions};
use tessera::{Activation, Dataset, Network, Slice};

use crate::args::*;
use crate::dataset_io::load_dataset;
use crate::error::{CliError, Result};
use crate::files::{self, check_paths};
use crate::manifest::{manifest_path, Outputs};
use crate::network_io::{load_network, network_to_bytes};
use crate::svg::{render_density, render_pgm, render_tessellation, TessellationStyle};
use crate::tessellation_io::{bounds_value, grid_value, slice_value, stats_value, tessellation_value};
use crate::{json, VERSION};

fn config<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn activation(arg: ActivationArg, alpha: f64) -> Activation {
    match arg {
        ActivationArg::Relu => Activation::Relu,
        ActivationArg::Abs => Activation::Abs,
        ActivationArg::LeakyRelu => Activation::LeakyRelu(alpha),
        ActivationArg::Identity => Activation::Identity,
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Output paths plus the manifest path, validated together.
fn prepare(inputs: &[&Path], outputs: &[&Path], manifest: Option<&Path>) -> Result<PathBuf> {
    let manifest = manifest_path(manifest, outputs[0]);
    let mut all: Vec<&Path> = outputs.to_vec();
    all.push(&manifest);
    check_paths(inputs, &all)?;
    Ok(manifest)
}

pub fn init(args: &InitArgs) -> Result<()> {
    let manifest = prepare(&[], &[&args.output], args.manifest.as_deref())?;
    let opts = InitOptions {
        hidden_activation: activation(args.hidden, args.alpha),
        output_activation: activation(args.output_activation, args.alpha),
        bias: if args.bias_scale > 0.0 {
            BiasInit::Uniform(args.bias_scale)
        } else {
            BiasInit::Zero
        },
        residual: args.residual,
        batch_norm: args.batch_norm,
    };
    let net = init_network(&args.arch, &opts, args.seed)?;
    let mut out = Outputs::new("init", config(args));
    out.add(&args.output, network_to_bytes(&net));
    out.commit(&manifest)?;
    println!("init: {} parameters → {}", param_count(&net), args.output.display());
    Ok(())
}

fn param_count(net: &Network) -> usize {
    net.layers().iter().map(|l| l.param_count()).sum()
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let mut outputs: Vec<&Path> = vec![&args.output];
    outputs.extend(args.losses.as_deref());
    let manifest = prepare(&[&args.net, &args.data], &outputs, args.manifest.as_deref())?;
    let net = load_network(&args.net)?;
    let data = load_dataset(&args.data)?;
    let cfg = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch_size,
        steps: args.steps,
        seed: args.seed,
        batch_norm: args.batch_norm,
    };
    let outcome = train_sgd(&net, &data, &cfg)?;
    let mut out = Outputs::new("train", config(args));
    out.input(&args.net)?;
    out.input(&args.data)?;
    out.add(&args.output, network_to_bytes(&outcome.network));
    if let Some(p) = &args.losses {
        let rows = outcome
            .losses
            .iter()
            .enumerate()
            .map(|(i, &l)| vec![i.to_string(), float(l)]);
        out.add(p, csv_bytes(&["step", "loss"], rows));
    }
    out.commit(&manifest)?;
    println!(
        "train: final loss {:.6e} after {} steps → {}",
        outcome.losses.last().copied().unwrap_or(f64::NAN),
        args.steps,
        args.output.display()
    );
    Ok(())
}

fn parse_bounds(values: &[f64]) -> Result<Bounds> {
    match values {
        [s0, s1, t0, t1] => Ok(Bounds::new(*s0, *s1, *t0, *t1)?),
        _ => Err(CliError::Usage(format!("--bounds takes 4 values, got {}", values.len()))),
    }
}

/// Resolves the slice flags. Without `--slice` or `--anchors` the input must be
/// two-dimensional and the slice is its coordinate plane over `--bounds` or
/// `default_bounds`.
fn resolve_slice(args: &SliceArgs, dim: usize, data: Option<&Dataset>, default_bounds: Bounds) -> Result<Slice> {
    let bounds = args.bounds.as_deref().map(parse_bounds).transpose()?;
    let slice = if let Some(path) = &args.slice {
        crate::tessellation_io::parse_slice(&files::read_string(path)?, bounds)
            .map_err(|e| CliError::format(path, e))?
    } else if let Some(idx) = &args.anchors {
        let data = data.ok_or_else(|| CliError::Usage("--anchors needs --data".into()))?;
        let [a, b, c] = idx[..] else {
            return Err(CliError::Usage(format!("--anchors takes 3 row indices, got {}", idx.len())));
        };
        let row = |i: usize| -> Result<DVector<f64>> {
            if i >= data.len() {
                return Err(CliError::Usage(format!("anchor row {i} outside dataset of {} rows", data.len())));
            }
            Ok(data.input(i))
        };
        Slice::from_anchors(&row(a)?, &row(b)?, &row(c)?, bounds.unwrap_or(Bounds::new(-0.5, 1.5, -0.5, 1.5)?))?
    } else {
        if dim != 2 {
            return Err(CliError::Usage(format!(
                "input dimension is {dim}; choose a plane with --slice or --anchors"
            )));
        }
        Slice::identity_2d(bounds.unwrap_or(default_bounds))
    };
    if slice.dim() != dim {
        return Err(CliError::Usage(format!("slice dimension {} ≠ input dimension {dim}", slice.dim())));
    }
    Ok(slice)
}

pub fn tessellate(args: &TessellateArgs) -> Result<()> {
    let mut inputs: Vec<&Path> = vec![&args.net];
    inputs.extend(args.data.as_deref());
    inputs.extend(args.slice.slice.as_deref());
    let mut outputs: Vec<&Path> = vec![&args.json];
    outputs.extend(args.svg.as_deref());
    outputs.extend(args.stats.as_deref());
    let manifest = prepare(&inputs, &outputs, args.manifest.as_deref())?;
    let net = load_network(&args.net)?;
    let data = args.data.as_deref().map(load_dataset).transpose()?;
    let slice = resolve_slice(&args.slice, net.input_dim(), data.as_ref(), Bounds::new(-1.0, 1.0, -1.0, 1.0)?)?;
    let logit = match args.boundary.as_deref() {
        None => None,
        Some([i]) => Some(Logit::Single(*i)),
        Some([i, j]) => Some(Logit::Pair(*i, *j)),
        Some(other) => {
            return Err(CliError::Usage(format!("--boundary takes 1 or 2 indices, got {}", other.len())));
        }
    };
    let tess = subdivide_with(&net, &slice, SubdivideOptions { max_tiles: args.max_tiles })?;
    let boundary = logit.map(|l| tess.decision_boundary(l)).transpose()?;

    let mut out = Outputs::new("tessellate", config(args));
    for p in &inputs {
        out.input(p)?;
    }
    out.add(&args.json, json::to_bytes(&tessellation_value(&tess, boundary.as_deref())));
    if let Some(p) = &args.svg {
        let style = TessellationStyle {
            width: args.width,
            fill: args.fill,
            boundary: boundary.as_deref(),
        };
        out.add(p, render_tessellation(&tess, &style).into_bytes());
    }
    if let Some(p) = &args.stats {
        let stats = tess.stats(StatsOptions {
            histogram_bins: args.bins,
            density_resolution: (args.density_resolution, args.density_resolution),
        });
        out.add(p, json::to_bytes(&stats_value(&stats)));
    }
    out.commit(&manifest)?;
    println!("tessellate: {} tiles, {} edges → {}", tess.tiles().len(), tess.edges().len(), args.json.display());
    Ok(())
}

pub fn lc(args: &LcArgs) -> Result<()> {
    let mut outputs: Vec<&Path> = vec![&args.csv];
    outputs.extend(args.json.as_deref());
    outputs.extend(args.tls.as_deref());
    let manifest = prepare(&[&args.net, &args.data], &outputs, args.manifest.as_deref())?;
    let net = load_network(&args.net)?;
    let data = load_dataset(&args.data)?;
    if data.input_dim() != net.input_dim() {
        return Err(tessera::Error::Shape {
            what: "dataset input columns",
            expected: net.input_dim(),
            found: data.input_dim(),
        }
        .into());
    }
    let radius = match args.radius {
        Some(r) => r,
        None => default_radius(&data)?,
    };
    let summary = dataset_lc(&net, &data, &LcConfig::new(radius)?)?;

    let mut out = Outputs::new("lc", config(args));
    out.input(&args.net)?;
    out.input(&args.data)?;
    let rows = summary.per_point.iter().enumerate().map(|(i, c)| vec![i.to_string(), c.to_string()]);
    out.add(&args.csv, csv_bytes(&["index", "lc"], rows));
    if let Some(p) = &args.json {
        let doc = json!({
            "format_version": 1,
            "radius": json::num(radius),
            "points": data.len(),
            "mean_lc": json::num(summary.mean),
            "max_lc": summary.per_point.iter().max(),
        });
        out.add(p, json::to_bytes(&doc));
    }
    if let Some(p) = &args.tls {
        let mut rows = Vec::new();
        for layer in 0..net.depth() {
            for (k, d) in tls_distance(&net, &data, layer)?.into_iter().enumerate() {
                rows.push(vec![layer.to_string(), k.to_string(), float(d)]);
            }
        }
        out.add(p, csv_bytes(&["layer", "neuron", "tls"], rows));
    }
    out.commit(&manifest)?;
    println!("lc: mean {:.6} at radius {radius:.6e} over {} points", summary.mean, data.len());
    Ok(())
}

/// Sum of the counts of grid cells meeting the closed box `[lo, hi]`.
pub fn box_mass(grid: &tessera::grid::DensityGrid, lo: [f64; 2], hi: [f64; 2]) -> u64 {
    let mut total = 0;
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let (a, b) = grid.cell_bounds(ix, iy);
            if a[0] <= hi[0] && b[0] >= lo[0] && a[1] <= hi[1] && b[1] >= lo[1] {
                total += u64::from(grid.get(ix, iy));
            }
        }
    }
    total
}

/// Bounding box of the data in slice coordinates (least-squares projection
/// onto the slice plane).
fn data_box(slice: &Slice, data: &Dataset) -> ([f64; 2], [f64; 2]) {
    let basis = DMatrix::from_columns(&[slice.u().clone(), slice.v().clone()]);
    let pinv = (basis.transpose() * &basis)
        .try_inverse()
        .expect("slice directions are independent")
        * basis.transpose();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for i in 0..data.len() {
        let st = &pinv * (data.input(i) - slice.origin());
        for k in 0..2 {
            lo[k] = lo[k].min(st[k]);
            hi[k] = hi[k].max(st[k]);
        }
    }
    (lo, hi)
}

pub fn bn_density(args: &BnDensityArgs) -> Result<()> {
    const PANELS: [&str; 3] = ["zero_bias", "random_bias", "batch_norm"];
    if !args.out_dir.is_dir() {
        return Err(CliError::Usage(format!("output directory {} does not exist", args.out_dir.display())));
    }
    let mut paths: Vec<PathBuf> = Vec::new();
    for name in PANELS {
        for ext in ["json", "svg", "pgm"] {
            paths.push(args.out_dir.join(format!("{name}.{ext}")));
        }
    }
    let summary_path = args.out_dir.join("summary.json");
    paths.push(summary_path.clone());
    let mut inputs: Vec<&Path> = vec![&args.data];
    inputs.extend(args.slice.slice.as_deref());
    let manifest = args.manifest.clone().unwrap_or_else(|| args.out_dir.join("manifest.json"));
    let mut all: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
    all.push(&manifest);
    check_paths(&inputs, &all)?;
    if args.resolution == 0 {
        return Err(CliError::Usage("--resolution must be positive".into()));
    }

    let data = load_dataset(&args.data)?;
    let arch = &args.arch;
    if arch.first() != Some(&data.input_dim()) {
        return Err(tessera::Error::Shape {
            what: "dataset input columns",
            expected: arch.first().copied().unwrap_or(0),
            found: data.input_dim(),
        }
        .into());
    }
    if args.layer + 1 >= arch.len() {
        return Err(tessera::Error::Index {
            what: "layer",
            index: args.layer,
            len: arch.len().saturating_sub(1),
        }
        .into());
    }
    // Default view: the data box padded by half its extent on every side.
    let default_bounds = if data.input_dim() == 2 {
        let x = data.inputs();
        let (s0, s1, t0, t1) = (x.column(0).min(), x.column(0).max(), x.column(1).min(), x.column(1).max());
        let (ps, pt) = (0.5 * (s1 - s0).max(1e-6), 0.5 * (t1 - t0).max(1e-6));
        Bounds::new(s0 - ps, s1 + ps, t0 - pt, t1 + pt)?
    } else {
        Bounds::new(-1.0, 1.0, -1.0, 1.0)?
    };
    let slice = resolve_slice(&args.slice, data.input_dim(), Some(&data), default_bounds)?;
    let (lo, hi) = data_box(&slice, &data);

    let zero = init_network(arch, &InitOptions::default(), args.seed)?;
    let random = init_network(
        arch,
        &InitOptions {
            bias: BiasInit::Uniform(args.bias_scale),
            ..InitOptions::default()
        },
        args.seed,
    )?;
    let bn = init_network(
        arch,
        &InitOptions {
            batch_norm: true,
            ..InitOptions::default()
        },
        args.seed,
    )?;
    let bn = batchnorm_update(&bn, &data)?;

    let mut out = Outputs::new("bn-density", config(args));
    for p in &inputs {
        out.input(p)?;
    }
    let opts = SubdivideOptions { max_tiles: args.max_tiles };
    let mut panels = serde_json::Map::new();
    let mut files = paths.iter();
    for (name, net) in PANELS.iter().zip([&zero, &random, &bn]) {
        let grid = hyperplane_density(net, &slice, args.layer, (args.resolution, args.resolution), opts)?;
        let tls = tls_distance(net, &data, args.layer)?;
        let finite: Vec<f64> = tls.iter().copied().filter(|d| d.is_finite()).collect();
        let mean_tls = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
        let mass = box_mass(&grid, lo, hi);
        let doc = json!({
            "format_version": 1,
            "panel": name,
            "layer": args.layer,
            "grid": grid_value(&grid),
            "data_box_mass": mass,
            "tls": json::floats(&tls),
            "mean_tls": json::num(mean_tls),
        });
        out.add(files.next().expect("declared"), json::to_bytes(&doc));
        out.add(files.next().expect("declared"), render_density(&grid, args.width).into_bytes());
        out.add(files.next().expect("declared"), render_pgm(&grid).into_bytes());
        panels.insert(
            (*name).into(),
            json!({ "total": grid.total(), "data_box_mass": mass, "mean_tls": json::num(mean_tls) }),
        );
    }
    let summary = json!({
        "format_version": 1,
        "layer": args.layer,
        "seed": args.seed,
        "slice": slice_value(&slice),
        "data_box": bounds_value(&Bounds { s0: lo[0], s1: hi[0], t0: lo[1], t1: hi[1] }),
        "panels": panels,
    });
    out.add(&summary_path, json::to_bytes(&summary));
    out.commit(&manifest)?;
    println!("bn-density: panels written to {}", args.out_dir.display());
    Ok(())
}

pub fn sample(args: &SampleArgs) -> Result<()> {
    let mut outputs: Vec<&Path> = vec![&args.output];
    outputs.extend(args.report.as_deref());
    let manifest = prepare(&[&args.net], &outputs, args.manifest.as_deref())?;
    let gen = load_network(&args.net)?;
    let d = gen.input_dim();
    let base = match args.base {
        BaseArg::Uniform => BaseDistribution::Uniform,
        BaseArg::Normal => BaseDistribution::StandardNormal,
    };
    let domain = LatentDomain::new(vec![args.latent_lo; d], vec![args.latent_hi; d], base)?;
    let pool = build_pool(&gen, &domain, args.pool, args.rho, args.seed)?;
    let draws = resample(&pool, &gen, args.out, rng::derive(args.seed, 1))?;

    let mut out = Outputs::new("sample", config(args));
    out.input(&args.net)?;
    let c = gen.output_dim();
    let bytes = match args.format {
        FormatArg::Csv => {
            let mut header: Vec<String> = vec!["index".into()];
            header.extend((0..d).map(|j| format!("z_{j}")));
            header.extend((0..c).map(|j| format!("y_{j}")));
            header.push("volume".into());
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = draws.indices.iter().enumerate().map(|(r, &i)| {
                let mut row = vec![i.to_string()];
                row.extend(draws.latents.row(r).iter().map(|&v| float(v)));
                row.extend(draws.outputs.row(r).iter().map(|&v| float(v)));
                row.push(float(pool.volumes[i]));
                row
            });
            csv_bytes(&header_refs, rows)
        }
        FormatArg::Json => json::to_bytes(&json!({
            "format_version": 1,
            "rho": json::num(args.rho),
            "indices": draws.indices,
            "latents": json::matrix(&draws.latents),
            "outputs": json::matrix(&draws.outputs),
            "volumes": json::floats(&draws.indices.iter().map(|&i| pool.volumes[i]).collect::<Vec<_>>()),
        })),
    };
    out.add(&args.output, bytes);
    if let Some(p) = &args.report {
        let n = pool.len() as f64;
        let scaled: Vec<f64> = pool.weights.iter().map(|w| w * n).collect();
        let top = scaled.iter().copied().fold(0.0, f64::max);
        let bins = 16;
        let mut counts = vec![0usize; bins];
        for &w in &scaled {
            let k = if top > 0.0 { ((w / top) * bins as f64) as usize } else { 0 };
            counts[k.min(bins - 1)] += 1;
        }
        let edges: Vec<f64> = (0..=bins).map(|k| top * k as f64 / bins as f64).collect();
        let mean_resampled = draws.indices.iter().map(|&i| pool.volumes[i]).sum::<f64>() / args.out as f64;
        let mut doc = json!({
            "format_version": 1,
            "rho": json::num(args.rho),
            "pool": pool.len(),
            "out": args.out,
            "ess": json::num(pool.ess()),
            "native_mean_volume": json::num(pool.volumes.iter().sum::<f64>() / n),
            "weighted_mean_volume": json::num(pool.weighted_volume()),
            "resampled_mean_volume": json::num(mean_resampled),
            "zero_volume_proposals": pool.volumes.iter().filter(|&&v| v == 0.0).count(),
            "weight_histogram": { "scaled_weight_edges": json::floats(&edges), "counts": counts },
        });
        if let Some(rhos) = &args.sweep {
            let entries = polarity_sweep(&gen, &domain, rhos, args.pool, args.out, args.seed)?;
            doc["sweep"] = Value::Array(
                entries
                    .iter()
                    .map(|e| {
                        json!({
                            "rho": json::num(e.rho),
                            "ess": json::num(e.ess),
                            "mean_volume": json::num(e.mean_volume),
                            "expected_volume": json::num(e.expected_volume),
                        })
                    })
                    .collect(),
            );
        }
        out.add(p, json::to_bytes(&doc));
    }
    out.commit(&manifest)?;
    println!("sample: {} draws from a pool of {} (ESS {:.1}) → {}", args.out, pool.len(), pool.ess(), args.output.display());
    Ok(())
}

pub fn probe_landscape(args: &ProbeArgs) -> Result<()> {
    let manifest = prepare(&[&args.net, &args.data], &[&args.json], args.manifest.as_deref())?;
    let net = load_network(&args.net)?;
    let data = load_dataset(&args.data)?;
    let layers: Vec<usize> = match args.layer {
        Some(l) => {
            net.check_layer(l)?;
            vec![l]
        }
        None => (0..net.depth()).collect(),
    };
    let probe = RegionProbe::new(net, data.clone())?;
    let mut spectra = Vec::new();
    for &l in &layers {
        let h = layer_hessian(&probe, l)?;
        let s = spectrum(&h, args.cut)?;
        let lmax = s.eigenvalues[0];
        spectra.push(json!({
            "layer": l,
            "parameters": h.nrows(),
            "eigenvalues": json::floats(&s.eigenvalues),
            "condition": s.condition.map_or(Value::Null, json::num),
            "below_cut": s.below_cut,
            "flat": s.flat,
            "psd": s.eigenvalues.iter().all(|&v| v >= -1e-9 * lmax.abs().max(f64::MIN_POSITIVE)),
        }));
    }
    let mut r = rng::seeded(args.seed);
    let mut probes = Vec::new();
    for _ in 0..args.probes {
        let l = layers[rng::index(&mut r, layers.len())];
        let p = probe.net().layers()[l].param_count();
        let dir = DVector::from_fn(p, |_, _| rng::standard_normal(&mut r)).normalize();
        let entry = match quadraticity_check(&probe, l, &dir, args.radius, QuadraticityOptions::default()) {
            Ok(rep) => json!({
                "layer": l,
                "quadratic": rep.quadratic,
                "radius": json::num(rep.radius),
                "halvings": rep.halvings,
                "second_differences": json::floats(&rep.second_differences),
                "relative_spread": json::num(rep.relative_spread),
            }),
            Err(e @ tessera::Error::RegionTooSmall { .. }) => {
                json!({ "layer": l, "quadratic": false, "error": e.to_string() })
            }
            Err(e) => return Err(e.into()),
        };
        probes.push(entry);
    }
    let mut doc = json!({
        "format_version": 1,
        "cut": json::num(args.cut),
        "spectra": spectra,
        "quadraticity": probes,
    });
    if let Some(n) = args.seeds {
        let seeds: Vec<u64> = (0..n as u64).map(|k| args.seed.wrapping_add(k)).collect();
        let rep = compare_architectures(args.width, args.depth, &data, &seeds, args.cut)?;
        let opt = |v: &[Option<f64>]| Value::Array(v.iter().map(|k| k.map_or(Value::Null, json::num)).collect());
        doc["comparison"] = json!({
            "width": rep.width,
            "depth": rep.depth,
            "pairs": rep.pairs.iter().map(|p| json!({
                "seed": p.seed,
                "plain": opt(&p.plain),
                "residual": opt(&p.residual),
            })).collect::<Vec<_>>(),
            "median_plain": json::num(rep.median_plain),
            "median_residual": json::num(rep.median_residual),
            "layer_medians": rep.layer_medians.iter().map(|(a, b)| json!([
                a.map_or(Value::Null, json::num),
                b.map_or(Value::Null, json::num),
            ])).collect::<Vec<_>>(),
        });
    }
    let mut out = Outputs::new("probe-landscape", config(args));
    out.input(&args.net)?;
    out.input(&args.data)?;
    out.add(&args.json, json::to_bytes(&doc));
    out.commit(&manifest)?;
    println!("probe-landscape: {} layers, {} probes → {}", layers.len(), args.probes, args.json.display());
    Ok(())
}

pub fn version() {
    println!("tessera {VERSION}");
}
