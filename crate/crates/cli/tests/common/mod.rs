#![allow(dead_code)]

use std::path::{Path, PathBuf};

use tessera::nalgebra::{DMatrix, DVector};
use tessera::net::{init_network, BiasInit, InitOptions};
use tessera::{rng, Activation, Dataset, Layer, Network};
use tessera_cli::dataset_io::save_dataset;
use tessera_cli::network_io::save_network;

pub fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["tessera"];
    argv.extend_from_slice(args);
    tessera_cli::run(argv)
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub fn write_net(dir: &Path, name: &str, net: &Network) -> PathBuf {
    let p = dir.join(name);
    save_network(net, &p).unwrap();
    p
}

pub fn write_data(dir: &Path, name: &str, data: &Dataset) -> PathBuf {
    let p = dir.join(name);
    save_dataset(data, &p).unwrap();
    p
}

pub fn random_net(arch: &[usize], seed: u64) -> Network {
    let opts = InitOptions {
        bias: BiasInit::Uniform(0.5),
        ..InitOptions::default()
    };
    init_network(arch, &opts, seed).unwrap()
}

/// Three Gaussian clusters in 2D with two one-hot classes.
pub fn clusters(seed: u64, n: usize) -> Dataset {
    let mut r = rng::seeded(seed);
    let centers: Vec<[f64; 2]> = (0..3)
        .map(|_| [rng::uniform(&mut r, 1.0, 3.0), rng::uniform(&mut r, 1.0, 3.0)])
        .collect();
    let inputs = DMatrix::from_fn(n, 2, |i, j| centers[i % 3][j] + 0.3 * rng::standard_normal(&mut r));
    let labels = DMatrix::from_fn(n, 2, |i, j| f64::from(u8::from(i % 2 == j)));
    Dataset::new(inputs, labels).unwrap()
}

/// 1D → 2D generator with volume factor 1 on `x < 0` and 2 on `x > 0`.
pub fn two_tile_generator() -> Network {
    Network::new(
        1,
        vec![
            Layer::new(DMatrix::from_row_slice(2, 1, &[1.0, -1.0]), DVector::zeros(2), Activation::Relu),
            Layer::new(
                DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 3f64.sqrt(), 0.0]),
                DVector::zeros(2),
                Activation::Identity,
            ),
        ],
    )
    .unwrap()
}

pub fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Runs every subcommand once with outputs in `dir`; returns the exit codes.
pub fn run_all(dir: &Path, seed: u64) -> Vec<(&'static str, i32)> {
    let p = |name: &str| dir.join(name).to_str().unwrap().to_owned();
    let seed = seed.to_string();
    let data = write_data(dir, "data.csv", &clusters(7, 48));
    let gen = write_net(dir, "gen.json", &two_tile_generator());
    let data = s(&data).to_owned();
    let gen = s(&gen).to_owned();
    std::fs::create_dir_all(dir.join("bn")).unwrap();
    let mut codes = vec![("version", run(&["version"]))];
    codes.push((
        "init",
        run(&["init", "--arch", "2,12,12,2", "--seed", &seed, "--bias-scale", "0.5", "--output", &p("net.json")]),
    ));
    codes.push((
        "train",
        run(&[
            "train", "--net", &p("net.json"), "--data", &data, "--seed", &seed, "--steps", "40", "--batch-size", "8",
            "--output", &p("trained.json"), "--losses", &p("losses.csv"),
        ]),
    ));
    codes.push((
        "tessellate",
        run(&[
            "tessellate", "--net", &p("trained.json"), "--bounds=-1,4,-1,4", "--json", &p("tess.json"), "--svg",
            &p("tess.svg"), "--fill", "--boundary", "0,1", "--stats", &p("stats.json"),
        ]),
    ));
    codes.push((
        "tessellate-anchors",
        run(&[
            "tessellate", "--net", &p("trained.json"), "--data", &data, "--anchors", "0,1,2", "--json",
            &p("anchored.json"),
        ]),
    ));
    codes.push((
        "lc",
        run(&[
            "lc", "--net", &p("trained.json"), "--data", &data, "--csv", &p("lc.csv"), "--json", &p("lc.json"),
            "--tls", &p("tls.csv"),
        ]),
    ));
    codes.push((
        "bn-density",
        run(&[
            "bn-density", "--arch", "2,16,16,1", "--data", &data, "--seed", &seed, "--resolution", "12", "--out-dir",
            &p("bn"),
        ]),
    ));
    codes.push((
        "sample",
        run(&[
            "sample", "--net", &gen, "--rho", "0.5", "--pool", "2000", "--out", "200", "--seed", &seed, "--output",
            &p("samples.csv"), "--report", &p("report.json"), "--sweep=-2,0,2",
        ]),
    ));
    codes.push((
        "sample-json",
        run(&[
            "sample", "--net", &gen, "--rho", "-1", "--pool", "500", "--out", "50", "--seed", &seed, "--format", "json",
            "--base", "normal", "--output", &p("samples.json"),
        ]),
    ));
    codes.push((
        "probe-landscape",
        run(&[
            "probe-landscape", "--net", &p("trained.json"), "--data", &data, "--seed", &seed, "--probes", "6",
            "--seeds", "2", "--width", "6", "--depth", "2", "--json", &p("landscape.json"),
        ]),
    ));
    codes
}

/// Every regular file under `dir`, relative path → bytes.
pub fn snapshot(dir: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

pub fn is_manifest(name: &str) -> bool {
    name.ends_with("manifest.json")
}
