use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use qubit_readout::demod::{flatten, full_demod, sliced_demod, smooth, unflatten, Trajectory};
use qubit_readout::rng::seeded_rng;
use qubit_readout::sim::{generate_dataset, simulate_shot, RawShot, SimConfig};
use rand::Rng;
use rand_distr::{Distribution, Exp};

fn tone_shot(samples: Vec<f64>, duration_ns: f64) -> RawShot {
    RawShot {
        samples,
        prepared_label: 0,
        actual_initial_state: 0,
        decay_events: vec![],
        duration_ns,
    }
}

/// Envelope relaxation written out independently of the simulator: amplitude
/// and phase each relax toward the current state's targets.
fn oracle_mean_i(cfg: &SimConfig, paths: usize, duration_ns: f64, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let rate = cfg.decay_rates.iter().find(|r| r.from == 1 && r.to == 0).unwrap().rate_per_ns;
    let decay = Exp::new(rate).unwrap();
    let step = 2.0;
    let n = (duration_ns / step) as usize;
    let mut total = 0.0;
    for _ in 0..paths {
        let start = if rng.random::<f64>() < cfg.prep_error_prob[1] { 0 } else { 1 };
        let t_decay = if start == 1 { decay.sample(&mut rng) } else { f64::INFINITY };
        let (a_s, p_s) = (cfg.amplitudes[start], cfg.phases_rad[start]);
        let tau = cfg.ring_up_tau_ns;
        let (a_at_decay, p_at_decay) = {
            let k = (-t_decay / tau).exp();
            (a_s * (1.0 - k), cfg.initial_phase_rad * k + p_s * (1.0 - k))
        };
        let mut acc = 0.0;
        for k in 0..n {
            let t = (k as f64 + 0.5) * step;
            let (a, p) = if t < t_decay {
                let e = (-t / tau).exp();
                (a_s * (1.0 - e), cfg.initial_phase_rad * e + p_s * (1.0 - e))
            } else {
                let e = (-(t - t_decay) / tau).exp();
                let (a0, p0) = (cfg.amplitudes[0], cfg.phases_rad[0]);
                (a0 + (a_at_decay - a0) * e, p0 + (p_at_decay - p0) * e)
            };
            acc += a * p.cos();
        }
        total += acc / n as f64;
    }
    total / paths as f64
}

#[test]
fn excited_state_mean_matches_template_oracle() {
    let cfg = SimConfig::default();
    let shots = generate_dataset(&cfg, 10_000, &[1], 8000.0).unwrap();
    let i: Vec<f64> = shots.iter().map(|s| full_demod(s, cfg.f_if_hz).unwrap().i).collect();
    let n = i.len() as f64;
    let mean = i.iter().sum::<f64>() / n;
    let se = (i.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let oracle = oracle_mean_i(&cfg, 100_000, 8000.0, 99);
    assert!((mean - oracle).abs() < 3.0 * se, "sim {mean} oracle {oracle} se {se}");
}

#[test]
fn generated_shots_are_reproducible() {
    let cfg = SimConfig::default();
    let a = generate_dataset(&cfg, 20, &[0, 1, 2], 800.0).unwrap();
    let b = generate_dataset(&cfg, 20, &[0, 1, 2], 800.0).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|s| s.samples.len() == 800));
    let other = SimConfig {
        master_seed: 1,
        ..SimConfig::default()
    };
    assert_ne!(generate_dataset(&other, 20, &[0], 800.0).unwrap()[0], a[0]);
}

#[test]
fn oversampled_quadrature_agrees() {
    // the same tone sampled ten times finer must demodulate to the same phasor
    let (a, phi) = (2.0, PI / 3.0);
    let f = 62.5e6;
    let shot = |rate: f64| {
        let n = (800.0 * rate / 1e9) as usize;
        let dt = 800.0 / n as f64;
        let s = (0..n).map(|k| a * (TAU * f * 1e-9 * (k as f64 + 0.5) * dt + phi).cos()).collect();
        tone_shot(s, 800.0)
    };
    let coarse = full_demod(&shot(1e9), f).unwrap();
    let fine = full_demod(&shot(1e10), f).unwrap();
    assert!((coarse.i - fine.i).abs() < 1e-6 && (coarse.q - fine.q).abs() < 1e-6);
    assert!((coarse.i - 1.0).abs() < 1e-6 && (coarse.q - 3f64.sqrt()).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn demodulation_is_linear_and_slices_average_to_the_whole(
        seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0
    ) {
        let cfg = SimConfig::default();
        let r1 = simulate_shot(&cfg, 1, 480.0, seed).unwrap();
        let r2 = simulate_shot(&cfg, 0, 480.0, seed ^ 1).unwrap();
        let mix: Vec<f64> = r1.samples.iter().zip(&r2.samples).map(|(x, y)| alpha * x + beta * y).collect();
        let m = full_demod(&tone_shot(mix, 480.0), cfg.f_if_hz).unwrap();
        let (d1, d2) = (full_demod(&r1, cfg.f_if_hz).unwrap(), full_demod(&r2, cfg.f_if_hz).unwrap());
        prop_assert!((m.i - (alpha * d1.i + beta * d2.i)).abs() < 1e-9);
        prop_assert!((m.q - (alpha * d1.q + beta * d2.q)).abs() < 1e-9);

        let traj = sliced_demod(&r1, cfg.f_if_hz, cfg.slice_ns).unwrap();
        let avg = traj.mean();
        prop_assert!((avg.i - d1.i).abs() < 1e-9 && (avg.q - d1.q).abs() < 1e-9);
    }

    #[test]
    fn smoothing_preserves_interior_sums(
        values in prop::collection::vec(-5.0f64..5.0, 10), offset in 60usize..130, window in 1usize..50
    ) {
        // support kept away from both ends so reflect padding never folds mass back
        let mut i = vec![0.0; 200];
        i[offset..offset + 10].copy_from_slice(&values);
        let traj = Trajectory { q_series: i.clone(), i_series: i, dt_ns: 16.0, label: None };
        let (s, clamp) = smooth(&traj, window).unwrap();
        prop_assert!(clamp.is_none());
        let before: f64 = values.iter().sum();
        prop_assert!((s.i_series.iter().sum::<f64>() - before).abs() < 1e-9);
        prop_assert!((s.q_series.iter().sum::<f64>() - before).abs() < 1e-9);
    }

    #[test]
    fn flatten_then_unflatten_is_identity(
        pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..40), label in prop::option::of(0usize..3)
    ) {
        let (i_series, q_series) = pairs.into_iter().unzip();
        let traj = Trajectory { i_series, q_series, dt_ns: 16.0, label };
        let fv = flatten(&traj);
        prop_assert_eq!(fv.values.len(), 2 * traj.len());
        prop_assert_eq!(unflatten(&fv, 16.0).unwrap(), traj);
    }
}
