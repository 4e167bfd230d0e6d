//! Phenomenological heterodyne readout simulator.
//!
//! A shot is the carrier `A(t) cos(2π f_IF t + φ(t))` plus white Gaussian
//! noise. The envelope amplitude and phase start at `(0, initial_phase_rad)`
//! and relax exponentially, with time constant `ring_up_tau_ns`, toward the
//! steady `(A_s, φ_s)` of the qubit's current state. Decay events switch the
//! target state mid-shot; the envelope then relaxes from wherever it is toward
//! the new target. State preparation can fail with a per-state probability.
//!
//! Raw samples sit at the midpoints `τ_k = (k + ½) / sample_rate`.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ReadoutError, Result};
use crate::rng::{derive_seed, derived_rng, stream};

/// Number of transmon levels the simulator knows about.
pub const MAX_STATES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRate {
    pub from: usize,
    pub to: usize,
    /// Transition rate in 1/ns.
    pub rate_per_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub sample_rate_hz: f64,
    pub f_if_hz: f64,
    /// Sliced-demodulation window Δt in ns.
    pub slice_ns: f64,
    /// Steady envelope amplitude per state (arb. units).
    pub amplitudes: [f64; MAX_STATES],
    /// Steady envelope phase per state.
    pub phases_rad: [f64; MAX_STATES],
    /// Envelope phase at the start of the ring-up.
    pub initial_phase_rad: f64,
    pub ring_up_tau_ns: f64,
    /// Standard deviation of the white noise added to each raw sample.
    pub noise_sigma: f64,
    pub decay_rates: Vec<DecayRate>,
    /// Probability that preparing state `s` actually leaves another state.
    pub prep_error_prob: [f64; MAX_STATES],
    /// Row `s`: distribution of the state left behind by a failed preparation of `s`.
    pub prep_error_target: [[f64; MAX_STATES]; MAX_STATES],
    pub master_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            sample_rate_hz: 1.0e9,
            f_if_hz: 62.5e6,
            slice_ns: 16.0,
            amplitudes: [1.0, 1.0, 1.6],
            phases_rad: [-0.5, 0.5, 0.0],
            initial_phase_rad: 0.0,
            ring_up_tau_ns: 400.0,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            decay_rates: vec![
                DecayRate { from: 1, to: 0, rate_per_ns: 1.0 / 40_000.0 },
                DecayRate { from: 2, to: 1, rate_per_ns: 1.0 / 40_000.0 },
                DecayRate { from: 2, to: 0, rate_per_ns: 1.0 / 80_000.0 },
            ],
            prep_error_prob: [0.0, 0.02, 0.02],
            prep_error_target: [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.5, 0.0]],
            master_seed: 20_240_601,
        }
    }
}

/// Default raw-sample noise. With the default envelopes the 3200 ns
/// full-demodulation clouds of states 0 and 1 sit about four and a half cloud
/// standard deviations from their midpoint, while at 800 ns they overlap
/// enough that a GMM misassigns roughly one shot in six.
pub const DEFAULT_NOISE_SIGMA: f64 = 3.7;

fn is_integral(x: f64) -> bool {
    (x - x.round()).abs() <= 1e-6 * x.abs().max(1.0)
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| ReadoutError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(crate::FormatError::from)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ReadoutError::InvalidConfig(msg));
        let positive = [
            ("sample_rate_hz", self.sample_rate_hz),
            ("f_if_hz", self.f_if_hz),
            ("slice_ns", self.slice_ns),
            ("ring_up_tau_ns", self.ring_up_tau_ns),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        for s in 0..MAX_STATES {
            if !self.amplitudes[s].is_finite() || self.amplitudes[s] < 0.0 {
                return bad(format!("amplitude of state {s} must be finite and >= 0"));
            }
            if !self.phases_rad[s].is_finite() {
                return bad(format!("phase of state {s} must be finite"));
            }
            let p = self.prep_error_prob[s];
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("prep_error_prob[{s}] = {p} is not a probability"));
            }
            let row = &self.prep_error_target[s];
            if row.iter().any(|q| !(0.0..=1.0).contains(q)) {
                return bad(format!("prep_error_target[{s}] has entries outside [0, 1]"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return bad(format!("prep_error_target[{s}] sums to {sum}, not 1"));
            }
        }
        if !self.initial_phase_rad.is_finite() {
            return bad("initial_phase_rad must be finite".into());
        }
        for r in &self.decay_rates {
            if r.from >= MAX_STATES || r.to >= MAX_STATES {
                return bad(format!("decay {} -> {} names an unknown state", r.from, r.to));
            }
            if r.to >= r.from {
                return bad(format!("decay {} -> {} must go to a lower state", r.from, r.to));
            }
            if !(r.rate_per_ns.is_finite() && r.rate_per_ns >= 0.0) {
                return bad(format!("decay rate {} -> {} must be >= 0", r.from, r.to));
            }
        }
        let slice_samples = self.slice_ns * self.sample_rate_hz / 1e9;
        if !is_integral(slice_samples) || slice_samples.round() < 1.0 {
            return bad(format!(
                "slice of {} ns is not a whole number of samples at {} Hz",
                self.slice_ns, self.sample_rate_hz
            ));
        }
        let periods = self.slice_ns * self.f_if_hz / 1e9;
        if !is_integral(periods) || periods.round() < 1.0 {
            return bad(format!(
                "slice of {} ns spans {periods} carrier periods at {} Hz; it must span a whole number",
                self.slice_ns, self.f_if_hz
            ));
        }
        Ok(())
    }

    pub fn samples_per_slice(&self) -> usize {
        (self.slice_ns * self.sample_rate_hz / 1e9).round() as usize
    }

    /// Raw sample count of a shot, checking that `duration_ns` is a positive
    /// whole number of slices.
    pub fn samples_for(&self, duration_ns: f64) -> Result<usize> {
        if !(duration_ns.is_finite() && duration_ns > 0.0) {
            return Err(ReadoutError::InvalidArgument(format!(
                "duration must be positive, got {duration_ns} ns"
            )));
        }
        let slices = duration_ns / self.slice_ns;
        if !is_integral(slices) {
            return Err(ReadoutError::InvalidArgument(format!(
                "duration {duration_ns} ns is not a whole number of {} ns slices",
                self.slice_ns
            )));
        }
        Ok(slices.round() as usize * self.samples_per_slice())
    }

    fn outgoing(&self, state: usize) -> impl Iterator<Item = &DecayRate> + '_ {
        self.decay_rates
            .iter()
            .filter(move |r| r.from == state && r.rate_per_ns > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEvent {
    pub time_ns: f64,
    pub new_state: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawShot {
    pub samples: Vec<f64>,
    pub prepared_label: usize,
    pub actual_initial_state: usize,
    pub decay_events: Vec<DecayEvent>,
    pub duration_ns: f64,
}

impl RawShot {
    /// Sample time of index `k` in ns (midpoint convention).
    pub fn sample_time_ns(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.duration_ns / self.samples.len() as f64
    }

    /// State occupied at the end of the shot.
    pub fn final_state(&self) -> usize {
        self.decay_events
            .last()
            .map_or(self.actual_initial_state, |e| e.new_state)
    }
}

fn check_state(state: usize) -> Result<()> {
    if state >= MAX_STATES {
        return Err(ReadoutError::InvalidArgument(format!(
            "state {state} out of range (0..{MAX_STATES})"
        )));
    }
    Ok(())
}

/// Competing exponential clocks: from the current state every allowed
/// downward transition draws an exponential waiting time and the earliest
/// one fires if it lands inside the shot.
pub fn sample_decay_path<R: Rng + ?Sized>(
    config: &SimConfig,
    initial_state: usize,
    duration_ns: f64,
    rng: &mut R,
) -> Vec<DecayEvent> {
    let mut events = Vec::new();
    let mut state = initial_state;
    let mut now = 0.0;
    loop {
        let mut best: Option<(f64, usize)> = None;
        for r in config.outgoing(state) {
            let e: f64 = Exp1.sample(rng);
            let wait = e / r.rate_per_ns;
            if best.is_none_or(|(w, _)| wait < w) {
                best = Some((wait, r.to));
            }
        }
        match best {
            Some((wait, to)) if now + wait < duration_ns => {
                now += wait;
                events.push(DecayEvent {
                    time_ns: now,
                    new_state: to,
                });
                state = to;
            }
            _ => break,
        }
    }
    events
}

fn sample_initial_state<R: Rng + ?Sized>(config: &SimConfig, prepared: usize, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if u >= config.prep_error_prob[prepared] {
        return prepared;
    }
    let v: f64 = rng.random();
    let row = &config.prep_error_target[prepared];
    let mut acc = 0.0;
    for (s, &p) in row.iter().enumerate() {
        acc += p;
        if v < acc {
            return s;
        }
    }
    // rounding left v just above the cumulative sum: take the last nonzero entry
    row.iter().rposition(|&p| p > 0.0).unwrap_or(prepared)
}

fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

/// One exponential-relaxation segment of the envelope.
#[derive(Debug, Clone, Copy)]
struct Segment {
    start_ns: f64,
    amp0: f64,
    phase0: f64,
    amp_target: f64,
    phase_target: f64,
}

impl Segment {
    fn new(start_ns: f64, amp0: f64, phase0: f64, state: usize, config: &SimConfig) -> Self {
        Segment {
            start_ns,
            amp0,
            phase0,
            amp_target: config.amplitudes[state],
            phase_target: phase0 + wrap_phase(config.phases_rad[state] - phase0),
        }
    }

    fn at(&self, t_ns: f64, tau_ns: f64) -> (f64, f64) {
        let k = (-(t_ns - self.start_ns) / tau_ns).exp();
        (
            self.amp_target + (self.amp0 - self.amp_target) * k,
            self.phase_target + (self.phase0 - self.phase_target) * k,
        )
    }
}

/// Noiseless envelope `(A(t), φ(t))` at the given times for a known state path.
pub fn envelope(
    config: &SimConfig,
    initial_state: usize,
    events: &[DecayEvent],
    times_ns: &[f64],
) -> Vec<(f64, f64)> {
    let tau = config.ring_up_tau_ns;
    let mut seg = Segment::new(0.0, 0.0, config.initial_phase_rad, initial_state, config);
    let mut next = 0;
    times_ns
        .iter()
        .map(|&t| {
            while next < events.len() && events[next].time_ns <= t {
                let ev = events[next];
                let (a, p) = seg.at(ev.time_ns, tau);
                seg = Segment::new(ev.time_ns, a, p, ev.new_state, config);
                next += 1;
            }
            seg.at(t, tau)
        })
        .collect()
}

/// Seed of shot `index` of `state`, independent of generation order.
pub fn shot_seed(config: &SimConfig, state: usize, index: usize) -> u64 {
    derive_seed(config.master_seed, &[stream::SHOT, state as u64, index as u64])
}

pub fn simulate_shot(
    config: &SimConfig,
    prepared_state: usize,
    duration_ns: f64,
    shot_seed: u64,
) -> Result<RawShot> {
    check_state(prepared_state)?;
    let n = config.samples_for(duration_ns)?;
    let master = config.master_seed;

    let mut prep_rng = derived_rng(master, &[stream::PREP, shot_seed]);
    let initial = sample_initial_state(config, prepared_state, &mut prep_rng);

    let mut decay_rng = derived_rng(master, &[stream::DECAY, shot_seed]);
    let events = sample_decay_path(config, initial, duration_ns, &mut decay_rng);

    let dt_ns = duration_ns / n as f64;
    let times: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * dt_ns).collect();
    let env = envelope(config, initial, &events, &times);
    let f_ghz = config.f_if_hz / 1e9;
    let mut samples: Vec<f64> = times
        .iter()
        .zip(&env)
        .map(|(&t, &(a, p))| a * (TAU * f_ghz * t + p).cos())
        .collect();

    if config.noise_sigma > 0.0 {
        let mut noise_rng = derived_rng(master, &[stream::NOISE, shot_seed]);
        for x in &mut samples {
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            *x += config.noise_sigma * z;
        }
    }

    Ok(RawShot {
        samples,
        prepared_label: prepared_state,
        actual_initial_state: initial,
        decay_events: events,
        duration_ns,
    })
}

/// `shots_per_state` shots for each listed state, grouped by state in list
/// order. Generation runs in parallel; output is schedule-independent.
pub fn generate_dataset(
    config: &SimConfig,
    shots_per_state: usize,
    states: &[usize],
    duration_ns: f64,
) -> Result<Vec<RawShot>> {
    if shots_per_state == 0 {
        return Err(ReadoutError::InvalidArgument("shots_per_state must be > 0".into()));
    }
    config.validate()?;
    for &s in states {
        check_state(s)?;
    }
    let jobs: Vec<(usize, usize)> = states
        .iter()
        .flat_map(|&s| (0..shots_per_state).map(move |i| (s, i)))
        .collect();
    jobs.par_iter()
        .map(|&(s, i)| simulate_shot(config, s, duration_ns, shot_seed(config, s, i)))
        .collect()
}
