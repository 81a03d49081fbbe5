use super::*;
use crate::rng;
use alloc::vec;
use alloc::string::ToString;
use alloc::vec::Vec;
use proptest::prelude::*;

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn dm(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, v)
}

fn two_layer() -> Network {
    Network::new(
        2,
        vec![
            Layer::new(dm(2, 2, &[1.0, 1.0, 1.0, -1.0]), dv(&[0.0, 0.0]), Activation::Relu),
            Layer::new(dm(1, 2, &[1.0, 2.0]), dv(&[1.0]), Activation::Identity),
        ],
    )
    .unwrap()
}

fn random_net(seed: u64, arch: &[usize], act: Activation) -> Network {
    let opts = InitOptions {
        hidden_activation: act,
        bias: BiasInit::Uniform(0.5),
        ..InitOptions::default()
    };
    init_network(arch, &opts, seed).unwrap()
}

/// Central finite-difference Jacobian of the network output.
fn fd_jacobian(net: &Network, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(net.output_dim(), net.input_dim());
    for j in 0..net.input_dim() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let col = (net.output(&xp).unwrap() - net.output(&xm).unwrap()) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

fn min_abs_preact(net: &Network, x: &DVector<f64>) -> f64 {
    let fwd = net.forward(x).unwrap();
    net.layers()
        .iter()
        .zip(&fwd.preacts)
        .filter(|(l, _)| l.activation.has_kink())
        .flat_map(|(_, p)| p.iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn scalar_relu_clips() {
    let net = Network::new(1, vec![Layer::new(dm(1, 1, &[1.0]), dv(&[0.0]), Activation::Relu)]).unwrap();
    assert_eq!(net.output(&dv(&[-3.0])).unwrap(), dv(&[0.0]));
}

#[test]
fn identity_weights_relu() {
    let net = Network::new(2, vec![Layer::new(DMatrix::identity(2, 2), dv(&[0.0, 0.0]), Activation::Relu)]).unwrap();
    let fwd = net.forward(&dv(&[1.0, -1.0])).unwrap();
    assert_eq!(fwd.output, dv(&[1.0, 0.0]));
    assert_eq!(fwd.preacts, vec![dv(&[1.0, -1.0])]);
}

#[test]
fn two_layer_hand_evaluation() {
    let net = two_layer();
    let fwd = net.forward(&dv(&[2.0, 1.0])).unwrap();
    assert_eq!(fwd.preacts[0], dv(&[3.0, 1.0]));
    // Scalar composition: relu(2+1)*1 + relu(2-1)*2 + 1.
    let oracle = 3.0_f64.max(0.0) + 2.0 * 1.0_f64.max(0.0) + 1.0;
    assert_eq!(fwd.output, dv(&[oracle]));
    assert_eq!(oracle, 6.0);
}

#[test]
fn shape_mismatch_is_reported() {
    let err = two_layer().forward(&dv(&[1.0])).unwrap_err();
    assert!(matches!(err, Error::Shape { expected: 2, found: 1, .. }));
}

#[test]
fn pattern_tie_rule() {
    let net = Network::new(2, vec![Layer::new(dm(1, 2, &[1.0, 0.0]), dv(&[0.0]), Activation::Relu)]).unwrap();
    let bits = |x: &[f64]| net.activation_pattern(&dv(x)).unwrap().layers()[0].clone();
    assert_eq!(bits(&[5.0, 2.0]), vec![true]);
    assert_eq!(bits(&[-5.0, 2.0]), vec![false]);
    assert_eq!(bits(&[0.0, 3.0]), vec![true]);
}

#[test]
fn identity_neurons_always_report_active() {
    let p = two_layer().activation_pattern(&dv(&[-4.0, 0.0])).unwrap();
    assert_eq!(p.layers()[1], vec![true]);
    assert_eq!(p.total_bits(), 3);
}

#[test]
fn local_affine_unclipped_composition() {
    let net = two_layer();
    let x = dv(&[2.0, 1.0]);
    let map = net.local_affine(&x).unwrap();
    assert_eq!(map.a, dm(1, 2, &[3.0, -1.0]));
    assert_eq!(map.c, dv(&[1.0]));
    assert_eq!(map.eval(&x), dv(&[6.0]));
    // All neurons active: A = W2 W1, c = W2 b1 + b2.
    let (l1, l2) = (&net.layers()[0], &net.layers()[1]);
    assert_eq!(map.a, &l2.weight * &l1.weight);
    assert_eq!(map.c, &l2.weight * &l1.bias + &l2.bias);
}

#[test]
fn local_affine_matches_finite_differences() {
    let acts = [Activation::Relu, Activation::Abs, Activation::LeakyRelu(0.1)];
    for seed in 0..6u64 {
        let net = random_net(seed, &[3, 8, 8, 2], acts[seed as usize % 3]);
        let mut r = rng::seeded(100 + seed);
        let mut checked = 0;
        while checked < 20 {
            let x = DVector::from_fn(3, |_, _| rng::uniform(&mut r, -2.0, 2.0));
            if min_abs_preact(&net, &x) <= 1e-3 {
                continue;
            }
            let jac = fd_jacobian(&net, &x, 1e-5);
            let map = net.local_affine(&x).unwrap();
            assert!((&map.a - &jac).amax() < 1e-4, "seed {seed}");
            checked += 1;
        }
    }
}

#[test]
fn residual_zero_branch_is_identity() {
    let net = Network::new(
        3,
        vec![Layer::new(DMatrix::zeros(3, 3), DVector::zeros(3), Activation::Relu).with_residual(true)],
    )
    .unwrap();
    let x = dv(&[0.3, -1.2, 4.0]);
    assert_eq!(net.output(&x).unwrap(), x);
    assert_eq!(net.local_affine(&x).unwrap().a, DMatrix::identity(3, 3));
}

#[test]
fn validation_messages_name_the_layer() {
    let bad = Network::new(
        2,
        vec![
            Layer::new(DMatrix::zeros(3, 2), DVector::zeros(3), Activation::Relu),
            Layer::new(DMatrix::zeros(4, 3), DVector::zeros(4), Activation::Relu),
            Layer::new(DMatrix::zeros(4, 4), DVector::zeros(5), Activation::Relu),
        ],
    )
    .unwrap_err();
    assert_eq!(bad.to_string(), "layer 2: bias length 5 ≠ rows 4");
    let bad = Network::new(2, vec![Layer::new(DMatrix::zeros(3, 2), DVector::zeros(3), Activation::Relu).with_residual(true)]);
    assert!(bad.is_err());
    let bad = Network::new(2, vec![Layer::new(DMatrix::zeros(1, 2), DVector::zeros(1), Activation::LeakyRelu(1.5))]);
    assert!(bad.is_err());
    let bad = Network::new(2, vec![Layer::new(dm(1, 2, &[f64::NAN, 0.0]), DVector::zeros(1), Activation::Relu)]);
    assert!(bad.is_err());
}

#[test]
fn squared_loss_examples() {
    let net = two_layer();
    let xs = [vec![2.0, 1.0], vec![-1.0, 0.5]];
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| net.output(&dv(x)).unwrap().as_slice().to_vec()).collect();
    let data = Dataset::from_rows(&xs, &ys).unwrap();
    assert_eq!(squared_loss(&net, &data).unwrap(), 0.0);

    let zero = Network::new(2, vec![Layer::new(DMatrix::zeros(2, 2), DVector::zeros(2), Activation::Identity)]).unwrap();
    let data = Dataset::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert_eq!(squared_loss(&zero, &data).unwrap(), 1.0);

    // Residuals (1, 0) and (0, 2).
    let data = Dataset::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]], &[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
    assert_eq!(squared_loss(&zero, &data).unwrap(), 2.5);
    assert!(squared_loss(&two_layer(), &data).is_err());
}

#[test]
fn gradients_match_finite_differences() {
    for (seed, bn) in [(1u64, false), (2, false), (3, true)] {
        let mut opts = InitOptions {
            bias: BiasInit::Uniform(0.3),
            residual: seed == 2,
            batch_norm: bn,
            ..InitOptions::default()
        };
        opts.hidden_activation = if seed == 1 { Activation::Abs } else { Activation::Relu };
        let net = init_network(&[2, 5, 5, 2], &opts, seed).unwrap();
        let mut r = rng::seeded(seed + 50);
        let xs: Vec<Vec<f64>> = (0..12).map(|_| vec![rng::uniform(&mut r, -1.0, 1.0), rng::uniform(&mut r, -1.0, 1.0)]).collect();
        let ys: Vec<Vec<f64>> = (0..12).map(|_| vec![rng::uniform(&mut r, -1.0, 1.0), rng::uniform(&mut r, -1.0, 1.0)]).collect();
        let data = Dataset::from_rows(&xs, &ys).unwrap();
        let net = if bn { batchnorm_update(&net, &data).unwrap() } else { net };
        let (_, grads) = gradients(&net, &data).unwrap();
        let h = 1e-6;
        for (l, g) in grads.iter().enumerate() {
            let theta = net.layers()[l].params();
            let mut analytic: Vec<f64> = Vec::new();
            for k in 0..g.weight.nrows() {
                analytic.extend(g.weight.row(k).iter());
            }
            analytic.extend(g.bias.iter());
            for p in 0..theta.len() {
                let eval = |delta: f64| {
                    let mut n2 = net.clone();
                    let mut t = theta.clone();
                    t[p] += delta;
                    n2.layers_mut()[l].set_params(&t);
                    squared_loss(&n2, &data).unwrap()
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let err = (fd - analytic[p]).abs();
                assert!(err <= 1e-4 * fd.abs().max(1e-2), "seed {seed} layer {l} param {p}: fd {fd} vs {}", analytic[p]);
            }
        }
    }
}

fn line_data() -> Dataset {
    let xs: Vec<Vec<f64>> = (0..9).map(|i| vec![-1.0 + 0.25 * i as f64]).collect();
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![2.0 * x[0]]).collect();
    Dataset::from_rows(&xs, &ys).unwrap()
}

#[test]
fn sgd_recovers_least_squares_slope() {
    let data = line_data();
    // Closed-form least squares: slope = cov(x, y) / var(x).
    let n = data.len() as f64;
    let mx = data.inputs().sum() / n;
    let my = data.labels().sum() / n;
    let cov: f64 = (0..data.len()).map(|i| (data.inputs()[(i, 0)] - mx) * (data.labels()[(i, 0)] - my)).sum();
    let var: f64 = (0..data.len()).map(|i| (data.inputs()[(i, 0)] - mx).powi(2)).sum();
    let slope = cov / var;

    let net = Network::new(1, vec![Layer::new(dm(1, 1, &[0.0]), dv(&[0.0]), Activation::Identity)]).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.1,
        batch_size: 9,
        steps: 2000,
        seed: 0,
        batch_norm: false,
    };
    let out = train_sgd(&net, &data, &cfg).unwrap();
    let w = out.network.layers()[0].weight[(0, 0)];
    assert!((w - slope).abs() < 1e-3 && (w - 2.0).abs() < 1e-3, "w = {w}");
    assert!(out.losses.last().unwrap() < &1e-10);
}

#[test]
fn zero_learning_rate_is_a_no_op() {
    let data = line_data();
    let net = random_net(4, &[1, 4, 1], Activation::Relu);
    let cfg = TrainConfig {
        learning_rate: 0.0,
        batch_size: 9,
        steps: 5,
        seed: 1,
        batch_norm: false,
    };
    let out = train_sgd(&net, &data, &cfg).unwrap();
    assert_eq!(out.network, net);
    assert!(out.losses.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn divergence_names_the_step() {
    let data = line_data();
    let net = Network::new(1, vec![Layer::new(dm(1, 1, &[0.0]), dv(&[0.0]), Activation::Identity)]).unwrap();
    let cfg = TrainConfig {
        learning_rate: 1e6,
        batch_size: 9,
        steps: 1000,
        seed: 0,
        batch_norm: false,
    };
    assert!(matches!(train_sgd(&net, &data, &cfg), Err(Error::Divergence { .. })));
}

#[test]
fn invalid_train_config() {
    let data = line_data();
    let net = random_net(4, &[1, 4, 1], Activation::Relu);
    let mut cfg = TrainConfig {
        learning_rate: 0.1,
        batch_size: 10,
        steps: 5,
        seed: 1,
        batch_norm: false,
    };
    assert!(train_sgd(&net, &data, &cfg).is_err());
    cfg.batch_size = 3;
    cfg.steps = 0;
    assert!(train_sgd(&net, &data, &cfg).is_err());
}

fn xor() -> Dataset {
    Dataset::from_rows(
        &[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
        &[vec![0.0], vec![0.0], vec![1.0], vec![1.0]],
    )
    .unwrap()
}

#[test]
fn xor_is_learned_for_most_seeds() {
    let data = xor();
    let cfg = |seed| TrainConfig {
        learning_rate: 0.1,
        batch_size: 4,
        steps: 2000,
        seed,
        batch_norm: false,
    };
    let solved = (0..10u64)
        .filter(|&seed| {
            let net = random_net(seed, &[2, 8, 1], Activation::Relu);
            let out = train_sgd(&net, &data, &cfg(seed)).unwrap();
            squared_loss(&out.network, &data).unwrap() < 1e-2
        })
        .count();
    assert!(solved >= 8, "solved {solved}/10");
}

#[test]
fn training_is_deterministic() {
    let data = xor();
    let net = random_net(3, &[2, 6, 6, 1], Activation::Relu);
    let cfg = TrainConfig {
        learning_rate: 0.05,
        batch_size: 2,
        steps: 50,
        seed: 9,
        batch_norm: true,
    };
    let net = Network::new(2, net.layers().iter().cloned().enumerate().map(|(i, l)| {
        if i < 2 { l.with_batch_norm(BatchNormState::identity(6)) } else { l }
    }).collect()).unwrap();
    let a = train_sgd(&net, &data, &cfg).unwrap();
    let b = train_sgd(&net, &data, &cfg).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.losses), bits(&b.losses));
    assert_eq!(a.network, b.network);
}

#[test]
fn batchnorm_symmetric_pair() {
    let net = Network::new(1, vec![Layer::new(dm(1, 1, &[1.0]), dv(&[0.0]), Activation::Identity).with_batch_norm(BatchNormState::identity(1))]).unwrap();
    let batch = Dataset::from_rows(&[vec![1.0], vec![-1.0]], &[vec![0.0], vec![0.0]]).unwrap();
    let upd = batchnorm_update(&net, &batch).unwrap();
    let bn = upd.layers()[0].batch_norm.as_ref().unwrap();
    assert_eq!((bn.mu[0], bn.nu[0]), (0.0, 1.0));
    assert_eq!(upd.forward(&dv(&[1.0])).unwrap().preacts[0], dv(&[1.0]));
    assert_eq!(upd.forward(&dv(&[-1.0])).unwrap().preacts[0], dv(&[-1.0]));
}

#[test]
fn batchnorm_degenerate_batch_clamps() {
    let net = Network::new(1, vec![Layer::new(dm(1, 1, &[2.0]), dv(&[0.0]), Activation::Relu).with_batch_norm(BatchNormState::identity(1))]).unwrap();
    let batch = Dataset::from_rows(&[vec![3.0], vec![3.0], vec![3.0]], &vec![vec![0.0]; 3]).unwrap();
    let upd = batchnorm_update(&net, &batch).unwrap();
    let bn = upd.layers()[0].batch_norm.as_ref().unwrap();
    assert_eq!(bn.mu[0], 6.0);
    assert_eq!(bn.nu[0], libm::sqrt(BN_EPSILON));
    assert!(upd.output(&dv(&[3.0])).unwrap()[0].is_finite());
}

#[test]
fn batchnorm_normalizes_every_layer() {
    let opts = InitOptions {
        batch_norm: true,
        bias: BiasInit::Uniform(0.2),
        ..InitOptions::default()
    };
    let net = init_network(&[2, 16, 16, 1], &opts, 11).unwrap();
    let mut r = rng::seeded(12);
    let xs: Vec<Vec<f64>> = (0..64).map(|_| vec![rng::uniform(&mut r, 1.0, 3.0), rng::uniform(&mut r, -2.0, 0.0)]).collect();
    let batch = Dataset::from_rows(&xs, &vec![vec![0.0]; 64]).unwrap();
    let upd = batchnorm_update(&net, &batch).unwrap();
    // Direct statistics of the normalized pre-activations.
    let fwds: Vec<Forward> = (0..64).map(|i| upd.forward(&batch.input(i)).unwrap()).collect();
    for l in 0..2 {
        for k in 0..16 {
            let vals: Vec<f64> = fwds.iter().map(|f| f.preacts[l][k]).collect();
            let mean = vals.iter().sum::<f64>() / 64.0;
            let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 64.0).sqrt();
            assert!(mean.abs() < 1e-6, "layer {l} neuron {k} mean {mean}");
            assert!((std - 1.0).abs() < 1e-6, "layer {l} neuron {k} std {std}");
        }
    }
    assert!(matches!(batchnorm_update(&net, &batch).map(|_| ()), Ok(())));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn affine_map_holds_across_the_tile(seed in 0u64..1000, x in prop::array::uniform2(-2.0f64..2.0), dx in prop::array::uniform2(-1e-3f64..1e-3)) {
        let net = random_net(seed, &[2, 6, 6, 1], Activation::Relu);
        let x = dv(&x);
        let x2 = &x + dv(&dx);
        let p = net.activation_pattern(&x).unwrap();
        prop_assume!(net.activation_pattern(&x2).unwrap() == p);
        let map = net.local_affine(&x).unwrap();
        let y = net.output(&x2).unwrap()[0];
        let yhat = map.eval(&x2)[0];
        prop_assert!((y - yhat).abs() <= 1e-9 * y.abs().max(1.0));
    }

    #[test]
    fn zero_bias_relu_is_positively_homogeneous(seed in 0u64..1000, x in prop::array::uniform3(-2.0f64..2.0), t in 0.01f64..10.0) {
        let net = init_network(&[3, 5, 4, 2], &InitOptions::default(), seed).unwrap();
        let x = dv(&x);
        let lhs = net.output(&(&x * t)).unwrap();
        let rhs = net.output(&x).unwrap() * t;
        prop_assert!((lhs - &rhs).amax() <= 1e-12 * rhs.amax().max(1.0));
    }

    #[test]
    fn pattern_has_one_bit_per_neuron(seed in 0u64..1000, x in prop::array::uniform2(-3.0f64..3.0)) {
        let net = random_net(seed, &[2, 7, 3, 2], Activation::LeakyRelu(0.2));
        let p = net.activation_pattern(&dv(&x)).unwrap();
        prop_assert_eq!(p.total_bits(), net.neuron_count());
        let lens: Vec<usize> = p.layers().iter().map(Vec::len).collect();
        prop_assert_eq!(lens, vec![7, 3, 2]);
    }
}
