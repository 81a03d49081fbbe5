use super::*;
use crate::net::{init_network, Activation, BiasInit, InitOptions, Layer};
use crate::rng;
use alloc::collections::BTreeSet;
use alloc::vec;

fn bounds(h: f64) -> Bounds {
    Bounds::new(-h, h, -h, h).unwrap()
}

fn single_layer(lines: &[(f64, f64, f64)]) -> Network {
    let w = DMatrix::from_fn(lines.len(), 2, |k, j| if j == 0 { lines[k].0 } else { lines[k].1 });
    let b = DVector::from_fn(lines.len(), |k, _| lines[k].2);
    Network::new(2, vec![Layer::new(w, b, Activation::Relu)]).unwrap()
}

/// Tangents to the circle of radius 0.3 with normals spread over half a turn:
/// no two are parallel, no three concurrent, and every crossing lies within
/// 0.3 / sin(π / 2m) < 2 of the origin.
fn generic_lines(m: usize) -> Vec<(f64, f64, f64)> {
    (0..m)
        .map(|k| {
            let theta = core::f64::consts::PI * k as f64 / m as f64 + 0.05;
            (libm::cos(theta), libm::sin(theta), -0.3)
        })
        .collect()
}

/// Distinct activation patterns seen on a regular grid of points.
fn grid_pattern_count(net: &Network, b: Bounds, n: usize) -> usize {
    let mut seen = BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            let s = b.s0 + (b.s1 - b.s0) * (i as f64 + 0.5) / n as f64;
            let t = b.t0 + (b.t1 - b.t0) * (j as f64 + 0.5) / n as f64;
            seen.insert(net.activation_pattern(&DVector::from_vec(vec![s, t])).unwrap());
        }
    }
    seen.len()
}

fn fig3_net(seed: u64) -> Network {
    let opts = InitOptions {
        bias: BiasInit::Uniform(0.5),
        ..InitOptions::default()
    };
    init_network(&[2, 20, 20, 20, 20, 1], &opts, seed).unwrap()
}

#[test]
fn one_neuron_two_tiles() {
    let net = single_layer(&[(1.0, 0.3, -0.2)]);
    let tess = subdivide(&net, &Slice::identity_2d(bounds(1.0))).unwrap();
    assert_eq!(tess.tiles().len(), 2);
    assert!((tess.total_area() - 4.0).abs() < 1e-12);
}

#[test]
fn three_generic_lines_seven_tiles() {
    let net = single_layer(&generic_lines(3));
    let b = bounds(2.0);
    let tess = subdivide(&net, &Slice::identity_2d(b)).unwrap();
    assert_eq!(grid_pattern_count(&net, b, 300), 7);
    assert_eq!(tess.tiles().len(), 7);
}

#[test]
fn generic_arrangement_counts() {
    let b = bounds(2.0);
    for m in 1..=6 {
        let net = single_layer(&generic_lines(m));
        let tess = subdivide(&net, &Slice::identity_2d(b)).unwrap();
        let closed_form = 1 + m + m * (m - 1) / 2;
        assert_eq!(grid_pattern_count(&net, b, 400), closed_form, "m = {m}");
        assert_eq!(tess.tiles().len(), closed_form, "m = {m}");
    }
}

#[test]
fn tiles_are_exact_on_a_deep_net() {
    let net = fig3_net(7);
    let b = bounds(1.5);
    let slice = Slice::identity_2d(b);
    let tess = subdivide(&net, &slice).unwrap();
    assert!(tess.tiles().len() > 50);
    assert!((tess.total_area() - b.area()).abs() <= 1e-6 * b.area());
    let mut r = rng::seeded(3);
    for _ in 0..2000 {
        let p = [rng::uniform(&mut r, -1.5, 1.5), rng::uniform(&mut r, -1.5, 1.5)];
        let tile = tess.locate_tile(p).unwrap();
        if tile.polygon.boundary_distance(p) < 1e-9 {
            continue;
        }
        let x = slice.embed(p);
        assert_eq!(tile.pattern, net.activation_pattern(&x).unwrap());
        let y = net.output(&x).unwrap();
        assert!((tile.eval(p) - y).amax() < 1e-9);
    }
    for tile in tess.tiles() {
        assert!(tile.area > 0.0);
        let v = tile.polygon.vertices();
        for i in 0..v.len() {
            let (a, b, c) = (v[i], v[(i + 1) % v.len()], v[(i + 2) % v.len()]);
            assert!(crate::geometry::cross(sub(b, a), sub(c, b)) >= -1e-12, "non-convex tile");
        }
    }
}

#[test]
fn maps_agree_across_interior_edges() {
    let opts = InitOptions {
        bias: BiasInit::Uniform(0.5),
        ..InitOptions::default()
    };
    let net = init_network(&[2, 6, 6, 2], &opts, 5).unwrap();
    let tess = subdivide(&net, &Slice::identity_2d(bounds(2.0))).unwrap();
    let mut interior = 0;
    let mut layer1_edges = 0;
    for e in tess.edges() {
        let Some(nb) = e.neighbor else {
            assert_eq!(e.label, EdgeLabel::Boundary);
            continue;
        };
        interior += 1;
        if matches!(e.label, EdgeLabel::Neuron { layer: 1, .. }) {
            layer1_edges += 1;
        }
        let mid = [0.5 * (e.segment[0][0] + e.segment[1][0]), 0.5 * (e.segment[0][1] + e.segment[1][1])];
        let ya = tess.tiles()[e.tile].eval(mid);
        let yb = tess.tiles()[nb].eval(mid);
        assert!((&ya - &yb).amax() <= 1e-9 * ya.amax().max(1.0));
        // The two sides differ in the bit of the neuron that made the edge.
        if let EdgeLabel::Neuron { layer, neuron } = e.label {
            assert!(tess.tiles()[e.tile].pattern.bit(layer, neuron));
            assert!(!tess.tiles()[nb].pattern.bit(layer, neuron));
        }
    }
    assert!(interior > 10 && layer1_edges > 0);
}

#[test]
fn every_interior_edge_has_a_neighbor() {
    let net = fig3_net(2);
    let tess = subdivide(&net, &Slice::identity_2d(bounds(1.0))).unwrap();
    for e in tess.edges() {
        assert_eq!(e.neighbor.is_none(), e.label == EdgeLabel::Boundary, "{e:?}");
    }
    let boundary: f64 = tess
        .edges()
        .iter()
        .filter(|e| e.label == EdgeLabel::Boundary)
        .map(|e| libm::hypot(e.segment[1][0] - e.segment[0][0], e.segment[1][1] - e.segment[0][1]))
        .sum();
    assert!((boundary - 8.0).abs() < 1e-9);
}

#[test]
fn refinement_is_monotone() {
    let net = fig3_net(11);
    let slice = Slice::identity_2d(bounds(1.0));
    for l in 1..net.depth() {
        let coarse = subdivide(&net.truncated(l).unwrap(), &slice).unwrap();
        let fine = subdivide(&net.truncated(l + 1).unwrap(), &slice).unwrap();
        assert!(fine.tiles().len() >= coarse.tiles().len());
        for tile in fine.tiles() {
            let c = tile.polygon.centroid();
            let parent = coarse.locate_tile(c).unwrap();
            assert_eq!(&tile.pattern.layers()[..l], parent.pattern.layers());
            assert!(tile.polygon.vertices().iter().all(|&v| parent.polygon.contains(v, 1e-9)));
        }
    }
}

#[test]
fn locate_examples() {
    let single = Network::new(2, vec![Layer::new(DMatrix::zeros(1, 2), DVector::from_vec(vec![1.0]), Activation::Relu)]).unwrap();
    let tess = subdivide(&single, &Slice::identity_2d(Bounds::new(0.0, 1.0, 0.0, 1.0).unwrap())).unwrap();
    assert_eq!(tess.tiles().len(), 1);
    assert!(tess.locate_tile([0.3, 0.9]).is_ok());
    assert!(matches!(tess.locate_tile([1.5, 0.5]), Err(Error::OutOfRange(..))));

    let split = single_layer(&[(1.0, 0.0, -0.5)]);
    let tess = subdivide(&split, &Slice::identity_2d(Bounds::new(0.0, 1.0, 0.0, 1.0).unwrap())).unwrap();
    assert_eq!(tess.tiles().len(), 2);
    assert!(!tess.locate_tile([0.25, 0.25]).unwrap().pattern.bit(0, 0));
    // On the cut, the non-negative side wins.
    assert!(tess.locate_tile([0.5, 0.25]).unwrap().pattern.bit(0, 0));
}

#[test]
fn located_patterns_match_network() {
    let net = fig3_net(21);
    let slice = Slice::identity_2d(bounds(1.0));
    let tess = subdivide(&net, &slice).unwrap();
    let mut r = rng::seeded(22);
    for _ in 0..10 {
        let p = [rng::uniform(&mut r, -1.0, 1.0), rng::uniform(&mut r, -1.0, 1.0)];
        assert_eq!(tess.locate_tile(p).unwrap().pattern, net.activation_pattern(&slice.embed(p)).unwrap());
    }
}

#[test]
fn anchored_slice_in_higher_dimension() {
    let opts = InitOptions {
        bias: BiasInit::Uniform(0.5),
        ..InitOptions::default()
    };
    let net = init_network(&[5, 12, 12, 3], &opts, 4).unwrap();
    let p0 = DVector::from_vec(vec![0.1, 0.2, -0.3, 0.5, 0.0]);
    let p1 = DVector::from_vec(vec![1.0, -0.2, 0.3, 0.1, 0.4]);
    let p2 = DVector::from_vec(vec![-0.5, 0.9, 0.0, -0.2, 0.7]);
    let slice = Slice::from_anchors(&p0, &p1, &p2, Bounds::new(-0.25, 1.25, -0.25, 1.25).unwrap()).unwrap();
    assert!((slice.embed([1.0, 0.0]) - &p1).amax() < 1e-15);
    let tess = subdivide(&net, &slice).unwrap();
    for tile in tess.tiles() {
        let c = tile.polygon.centroid();
        assert!((tile.eval(c) - net.output(&slice.embed(c)).unwrap()).amax() < 1e-9);
    }
    assert!(Slice::from_anchors(&p0, &p1, &(&p1 * 2.0 - &p0), Bounds::new(0.0, 1.0, 0.0, 1.0).unwrap()).is_err());
}

#[test]
fn capacity_cap_fails_loudly() {
    let net = fig3_net(1);
    let err = subdivide_with(&net, &Slice::identity_2d(bounds(1.0)), SubdivideOptions { max_tiles: 20 }).unwrap_err();
    assert!(matches!(err, Error::Capacity { cap: 20, .. }));
}

#[test]
fn decision_boundary_of_a_linear_layer() {
    let net = Network::new(2, vec![Layer::new(DMatrix::from_row_slice(1, 2, &[1.0, -1.0]), DVector::from_vec(vec![0.25]), Activation::Identity)]).unwrap();
    let tess = subdivide(&net, &Slice::identity_2d(bounds(1.0))).unwrap();
    let segs = tess.decision_boundary(Logit::Single(0)).unwrap();
    assert_eq!(segs.len(), 1);
    let BoundaryPiece::Segment([p, q]) = segs[0].piece else { panic!() };
    for pt in [p, q] {
        assert!((pt[0] - pt[1] + 0.25).abs() < 1e-12);
    }
    // s − t = −0.25 meets the square at (−1, −0.75) and (0.75, 1).
    let len = libm::hypot(q[0] - p[0], q[1] - p[1]);
    assert!((len - 1.75 * core::f64::consts::SQRT_2).abs() < 1e-12);
    assert!(tess.decision_boundary(Logit::Single(1)).is_err());
    assert!(tess.decision_boundary(Logit::Pair(0, 3)).is_err());
}

#[test]
fn positive_output_has_no_boundary() {
    let net = Network::new(2, vec![Layer::new(DMatrix::from_row_slice(1, 2, &[0.1, 0.1]), DVector::from_vec(vec![5.0]), Activation::Relu)]).unwrap();
    let tess = subdivide(&net, &Slice::identity_2d(bounds(1.0))).unwrap();
    assert!(tess.decision_boundary(Logit::Single(0)).unwrap().is_empty());
}

#[test]
fn dead_output_is_degenerate() {
    let net = Network::new(2, vec![Layer::new(DMatrix::from_row_slice(1, 2, &[0.0, 0.0]), DVector::from_vec(vec![-1.0]), Activation::Relu)]).unwrap();
    let tess = subdivide(&net, &Slice::identity_2d(bounds(1.0))).unwrap();
    let segs = tess.decision_boundary(Logit::Single(0)).unwrap();
    assert_eq!(segs, vec![BoundarySegment { tile: 0, piece: BoundaryPiece::Degenerate }]);
}

#[test]
fn folded_boundary_is_continuous() {
    let opts = InitOptions {
        bias: BiasInit::Uniform(0.3),
        ..InitOptions::default()
    };
    let net = init_network(&[2, 10, 10, 2], &opts, 8).unwrap();
    let tess = subdivide(&net, &Slice::identity_2d(bounds(1.5))).unwrap();
    let segs = tess.decision_boundary(Logit::Pair(0, 1)).unwrap();
    assert!(segs.len() > 1);
    let ends: Vec<(usize, Point)> = segs
        .iter()
        .flat_map(|s| match s.piece {
            BoundaryPiece::Segment([p, q]) => vec![(s.tile, p), (s.tile, q)],
            BoundaryPiece::Degenerate => vec![],
        })
        .collect();
    let b = tess.slice().bounds();
    for &(tile, p) in &ends {
        let on_border = [p[0] - b.s0, b.s1 - p[0], p[1] - b.t0, b.t1 - p[1]].iter().any(|d| d.abs() < 1e-12);
        if on_border {
            continue;
        }
        let matched = ends
            .iter()
            .any(|&(t2, q)| t2 != tile && libm::hypot(p[0] - q[0], p[1] - q[1]) <= 1e-9);
        assert!(matched, "dangling boundary endpoint {p:?} in tile {tile}");
    }
}

#[test]
fn stats_of_a_single_tile() {
    let net = Network::new(2, vec![Layer::new(DMatrix::identity(2, 2), DVector::from_vec(vec![5.0, 5.0]), Activation::Relu)]).unwrap();
    let tess = subdivide(&net, &Slice::identity_2d(bounds(1.0))).unwrap();
    let stats = tess.stats(StatsOptions::default());
    assert_eq!(stats.tile_count, 1);
    assert_eq!(stats.density.total(), 0);
    assert_eq!(stats.area_histogram.counts.iter().sum::<usize>(), 1);
    // Identity linear part.
    assert!((stats.spectral_norms[0] - 1.0).abs() < 1e-15);
}

#[test]
fn stats_of_a_random_net() {
    let net = fig3_net(13);
    let tess = subdivide(&net, &Slice::identity_2d(bounds(1.0))).unwrap();
    let stats = tess.stats(StatsOptions::default());
    assert_eq!(stats.area_histogram.counts.iter().sum::<usize>(), stats.tile_count);
    let (imax, &nmax) = stats
        .spectral_norms
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    // Independent route: full SVD of that tile's linear part.
    let svd = tess.tiles()[imax].map2d.a.clone().svd(false, false);
    assert!((svd.singular_values.max() - nmax).abs() <= 1e-12 * nmax.max(1.0));
    assert!(stats.density.total() >= tess.interior_segments(None).count() as u64);
}

#[test]
fn tile_order_is_canonical() {
    let net = fig3_net(17);
    let tess = subdivide(&net, &Slice::identity_2d(bounds(1.0))).unwrap();
    assert!(tess.tiles().windows(2).all(|w| w[0].pattern < w[1].pattern));
    let again = subdivide(&net, &Slice::identity_2d(bounds(1.0))).unwrap();
    assert_eq!(tess.tiles(), again.tiles());
    assert_eq!(tess.edges(), again.edges());
    assert_eq!(tess.metadata().net_hash, network_hash(&net));
}
