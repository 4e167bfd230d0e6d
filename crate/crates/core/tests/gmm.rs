use qubit_readout::classifiers::{gmm_assign_labels, gmm_fit, gmm_predict, GmmConfig};
use qubit_readout::demod::{full_demod, IqPoint};
use qubit_readout::rng::seeded_rng;
use qubit_readout::sim::{generate_dataset, SimConfig};
use rand_distr::{Distribution, Normal};

fn two_blobs(n: usize, seed: u64) -> (Vec<IqPoint>, Vec<usize>) {
    let mut rng = seeded_rng(seed);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut points = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(2 * n);
    for label in [0, 1] {
        let cx = if label == 0 { -5.0 } else { 5.0 };
        for _ in 0..n {
            points.push(IqPoint {
                i: cx + noise.sample(&mut rng),
                q: noise.sample(&mut rng),
            });
            labels.push(label);
        }
    }
    (points, labels)
}

#[test]
fn recovers_separated_blobs_and_classifies_fresh_points() {
    let (train, labels) = two_blobs(1000, 1);
    let model = gmm_fit(&train, 2, 7, &GmmConfig::default()).unwrap();
    let mut means: Vec<[f64; 2]> = model.components.iter().map(|c| c.mean).collect();
    means.sort_by(|a, b| a[0].total_cmp(&b[0]));
    for (m, cx) in means.iter().zip([-5.0, 5.0]) {
        assert!((m[0] - cx).abs() < 0.05 && m[1].abs() < 0.05, "{m:?}");
    }
    for c in &model.components {
        assert!((c.weight - 0.5).abs() < 0.05);
    }
    for w in model.log_likelihood.windows(2) {
        assert!(w[1] >= w[0] - 1e-9);
    }

    let model = gmm_assign_labels(&model, &train, &labels).unwrap();
    let (fresh, truth) = two_blobs(5000, 2);
    let correct = fresh
        .iter()
        .zip(&truth)
        .filter(|(p, &l)| gmm_predict(&model, **p).unwrap() == l)
        .count();
    assert!(correct as f64 / fresh.len() as f64 >= 0.999);
}

#[test]
fn prediction_is_translation_invariant() {
    let (train, labels) = two_blobs(300, 3);
    let model = gmm_assign_labels(&gmm_fit(&train, 2, 1, &GmmConfig::default()).unwrap(), &train, &labels).unwrap();
    let shift = [123.5, -47.25];
    let mut moved = model.clone();
    for c in &mut moved.components {
        c.mean[0] += shift[0];
        c.mean[1] += shift[1];
    }
    let (probe, _) = two_blobs(200, 4);
    for p in probe.iter().chain(&[IqPoint { i: 0.0, q: 0.0 }, IqPoint { i: 0.3, q: 9.0 }]) {
        let q = IqPoint {
            i: p.i + shift[0],
            q: p.q + shift[1],
        };
        assert_eq!(gmm_predict(&model, *p).unwrap(), gmm_predict(&moved, q).unwrap());
    }
}

#[test]
fn three_state_simulation_maps_every_label() {
    let cfg = SimConfig::default();
    let shots = generate_dataset(&cfg, 400, &[0, 1, 2], 3200.0).unwrap();
    let points: Vec<IqPoint> = shots.iter().map(|s| full_demod(s, cfg.f_if_hz).unwrap()).collect();
    let labels: Vec<usize> = shots.iter().map(|s| s.prepared_label).collect();
    let model = gmm_assign_labels(&gmm_fit(&points, 3, 5, &GmmConfig::default()).unwrap(), &points, &labels).unwrap();
    let mut mapped = model.labels.clone().unwrap();
    mapped.sort_unstable();
    assert_eq!(mapped, vec![0, 1, 2]);
}
