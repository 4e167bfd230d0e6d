use proptest::prelude::*;
use qubit_readout::nn::{
    argmax, backprop, grad_check, mse_loss, train, Activation, AdamConfig, AdamState, DenseNetwork, LayerSpec,
    LossKind, MonitorMetric, Samples, Targets, TrainConfig,
};
use qubit_readout::rng::seeded_rng;
use qubit_readout::Matrix;
use rand::Rng;

/// Random network of at most four layers and at most 20 parameters.
fn random_net(seed: u64, loss: LossKind) -> (DenseNetwork, Matrix, Vec<f64>, Vec<usize>) {
    let mut rng = seeded_rng(seed);
    let hidden = [Activation::Sigmoid, Activation::Tanh, Activation::Linear];
    loop {
        let n_layers = rng.random_range(1..=4);
        let mut widths = vec![rng.random_range(1..=3)];
        for _ in 0..n_layers {
            widths.push(rng.random_range(1..=3));
        }
        if loss == LossKind::CrossEntropy {
            *widths.last_mut().unwrap() = rng.random_range(2..=3);
        }
        let specs: Vec<LayerSpec> = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let act = if l + 1 == n_layers {
                    match loss {
                        LossKind::CrossEntropy => Activation::Softmax,
                        LossKind::Mse => [Activation::Sigmoid, Activation::Tanh, Activation::Linear, Activation::Softmax]
                            [rng.random_range(0..4)],
                    }
                } else {
                    hidden[rng.random_range(0..3)]
                };
                LayerSpec::new(w[0], w[1], act)
            })
            .collect();
        let total: usize = specs.iter().map(LayerSpec::param_count).sum();
        if total > 20 {
            continue;
        }
        let mut net = DenseNetwork::glorot(&specs, &mut rng).unwrap();
        for layer in net.layers_mut() {
            for b in &mut layer.biases {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        let batch = 3;
        let inputs: Vec<f64> = (0..batch * widths[0]).map(|_| rng.random_range(-1.5..1.5)).collect();
        let inputs = Matrix::from_vec(batch, widths[0], inputs).unwrap();
        let out = *widths.last().unwrap();
        let dense: Vec<f64> = (0..batch * out).map(|_| rng.random_range(0.0..1.0)).collect();
        let classes: Vec<usize> = (0..batch).map(|_| rng.random_range(0..out)).collect();
        return (net, inputs, dense, classes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn backprop_matches_finite_differences(seed in any::<u64>(), use_ce in any::<bool>()) {
        let loss = if use_ce { LossKind::CrossEntropy } else { LossKind::Mse };
        let (net, x, dense, classes) = random_net(seed, loss);
        let dense = Matrix::from_vec(x.rows(), net.output_dim(), dense).unwrap();
        let targets = match loss {
            LossKind::Mse => Targets::Dense(&dense),
            LossKind::CrossEntropy => Targets::Classes(&classes),
        };
        let err = grad_check(&net, &x, targets, loss, 1e-5).unwrap();
        prop_assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn softmax_output_is_a_distribution(logits in prop::collection::vec(-15.0f64..15.0, 2..8), stretch in 1.0f64..40.0) {
        let n = logits.len();
        let mut eye = vec![0.0; n * n];
        for i in 0..n {
            eye[i * n + i] = 1.0;
        }
        let mut net = DenseNetwork::zeros(&[LayerSpec::new(n, n, Activation::Softmax)]).unwrap();
        net.layers_mut()[0].weights = eye;
        let p = net.predict(&logits).unwrap();
        prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // wide spreads saturate to exactly 0 or 1 in double precision
        let wide: Vec<f64> = logits.iter().map(|v| v * stretch).collect();
        let p = net.predict(&wide).unwrap();
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mse_is_nonnegative_and_zero_only_on_equality(
        pair in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..20)
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
        let l = mse_loss(&x, &y).unwrap();
        prop_assert!(l >= 0.0);
        prop_assert_eq!(l == 0.0, x == y);
        prop_assert_eq!(mse_loss(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn argmax_survives_monotone_transforms(p in prop::collection::vec(prop::sample::select(vec![0.1, 0.2, 0.3, 0.5]), 2..6)) {
        let k = argmax(&p);
        let logs: Vec<f64> = p.iter().map(|v| v.ln()).collect();
        let cubes: Vec<f64> = p.iter().map(|v| v.powi(3) - 7.0).collect();
        prop_assert_eq!(argmax(&logs), k);
        prop_assert_eq!(argmax(&cubes), k);
        prop_assert!(p[..k].iter().all(|&v| v < p[k]));
    }
}

fn adam_closed_form(steps: i32, cfg: AdamConfig) -> f64 {
    // constant gradient g = 1: every bias-corrected moment equals 1
    let mut theta = 0.0;
    let (mut m, mut v) = (0.0, 0.0);
    for t in 1..=steps {
        m = cfg.beta1 * m + (1.0 - cfg.beta1);
        v = cfg.beta2 * v + (1.0 - cfg.beta2);
        let m_hat = m / (1.0 - cfg.beta1.powi(t));
        let v_hat = v / (1.0 - cfg.beta2.powi(t));
        theta -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    theta
}

#[test]
fn adam_two_steps_match_closed_form() {
    let cfg = AdamConfig::default();
    let mut state = AdamState::new(cfg, &[1]);
    let mut p = [0.0];
    state.step(&mut [&mut p], &[&[1.0]]);
    assert!((p[0] - adam_closed_form(1, cfg)).abs() < 1e-12);
    assert!((p[0] - -9.99999990e-4).abs() < 1e-12);
    state.step(&mut [&mut p], &[&[1.0]]);
    assert!((p[0] - adam_closed_form(2, cfg)).abs() < 1e-12);
    assert!((p[0] - -2e-3 / (1.0 + 1e-8)).abs() < 1e-12);
    assert_eq!(state.step_count, 2);
}

fn toy_problem() -> (Matrix, Vec<usize>) {
    let mut rng = seeded_rng(11);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..300 {
        let c = i % 3;
        let centre = [c as f64 - 1.0, (c as f64 * 2.0).sin()];
        rows.push(vec![centre[0] + rng.random_range(-0.6..0.6), centre[1] + rng.random_range(-0.6..0.6)]);
        labels.push(c);
    }
    (Matrix::from_rows(rows.iter().map(Vec::as_slice)).unwrap(), labels)
}

fn fit(seed: u64) -> (DenseNetwork, qubit_readout::nn::TrainLog) {
    let (x, labels) = toy_problem();
    let specs = [LayerSpec::new(2, 6, Activation::Tanh), LayerSpec::new(6, 3, Activation::Softmax)];
    let net = DenseNetwork::glorot(&specs, &mut seeded_rng(seed)).unwrap();
    let cfg = TrainConfig {
        seed,
        max_epochs: 20,
        ..TrainConfig::default()
    };
    let (mx, ml) = (x.select_rows(&[0, 1, 2, 3, 4, 5]), vec![0, 1, 2, 0, 1, 2]);
    train(
        net,
        Samples::new(&x, Targets::Classes(&labels)),
        Samples::new(&mx, Targets::Classes(&ml)),
        LossKind::CrossEntropy,
        MonitorMetric::Loss,
        &cfg,
    )
    .unwrap()
}

#[test]
fn training_is_deterministic_given_seed() {
    let (a, la) = fit(5);
    let (b, lb) = fit(5);
    assert_eq!(a, b);
    assert!(la.same_trajectory(&lb));
    let (c, _) = fit(6);
    assert_ne!(a, c);
}

#[test]
fn training_lowers_the_loss() {
    let (net, log) = fit(1);
    let (x, labels) = toy_problem();
    let (before, _) = backprop(
        &DenseNetwork::glorot(
            &[LayerSpec::new(2, 6, Activation::Tanh), LayerSpec::new(6, 3, Activation::Softmax)],
            &mut seeded_rng(1),
        )
        .unwrap(),
        &x,
        Targets::Classes(&labels),
        LossKind::CrossEntropy,
    )
    .unwrap();
    let (after, _) = backprop(&net, &x, Targets::Classes(&labels), LossKind::CrossEntropy).unwrap();
    assert!(after < before, "{after} !< {before}");
    assert!(log.best_epoch >= 1 && log.stop_epoch >= log.best_epoch);
}
