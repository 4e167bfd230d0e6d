//! Simulated datasets at the trajectory level.
//!
//! Shots are simulated once at the longest window; shorter windows are
//! prefixes of the same records. Slices keep absolute time, so the first `n`
//! slices of a long shot are exactly the slices of the same shot simulated
//! for `n` slices.

use qubit_readout::demod::{flatten, sliced_demod, smooth, IqPoint, Trajectory, WindowClamped};
use qubit_readout::sim::{shot_seed, simulate_shot, RawShot, SimConfig};
use qubit_readout::Matrix;
use rayon::prelude::*;

use crate::error::{BenchError, Result};

/// Unsmoothed sliced trajectory of one shot.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub label: usize,
    pub i_series: Vec<f64>,
    pub q_series: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub dt_ns: f64,
    pub tm_ns: f64,
    pub records: Vec<ShotRecord>,
}

impl TrajectorySet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_slices(&self) -> usize {
        self.records.first().map_or(0, |r| r.i_series.len())
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn select(&self, idx: &[usize]) -> TrajectorySet {
        TrajectorySet {
            dt_ns: self.dt_ns,
            tm_ns: self.tm_ns,
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }
}

pub fn record_from_shot(shot: &RawShot, sim: &SimConfig) -> Result<ShotRecord> {
    let t = sliced_demod(shot, sim.f_if_hz, sim.slice_ns)?;
    Ok(ShotRecord {
        label: shot.prepared_label,
        i_series: t.i_series,
        q_series: t.q_series,
    })
}

/// Shot `(state, index)` pairs in state-major order.
pub fn shot_jobs(n_states: usize, indices: std::ops::Range<usize>) -> Vec<(usize, usize)> {
    (0..n_states)
        .flat_map(|s| indices.clone().map(move |i| (s, i)))
        .collect()
}

/// Simulate the given shots and keep only their sliced trajectories.
pub fn simulate_trajectories(sim: &SimConfig, jobs: &[(usize, usize)], tm_ns: f64) -> Result<TrajectorySet> {
    sim.validate()?;
    let records = jobs
        .par_iter()
        .map(|&(s, i)| {
            let shot = simulate_shot(sim, s, tm_ns, shot_seed(sim, s, i))?;
            record_from_shot(&shot, sim)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectorySet {
        dt_ns: sim.slice_ns,
        tm_ns,
        records,
    })
}

/// Inputs for all three classifiers at one measurement window.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub tm_ns: f64,
    /// Flattened smoothed trajectories, one row per shot.
    pub x: Matrix,
    /// Full-window demodulated points (mean of the unsmoothed slices).
    pub iq: Vec<IqPoint>,
    pub labels: Vec<usize>,
    pub clamp: Option<WindowClamped>,
}

impl Features {
    pub fn select(&self, idx: &[usize]) -> Features {
        Features {
            tm_ns: self.tm_ns,
            x: self.x.select_rows(idx),
            iq: idx.iter().map(|&i| self.iq[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            clamp: self.clamp,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Smoothed trajectory of the first `tm_ns` of a record.
pub fn prefix_trajectory(rec: &ShotRecord, dt_ns: f64, n: usize, window: usize) -> Result<(Trajectory, Option<WindowClamped>)> {
    let t = Trajectory {
        i_series: rec.i_series[..n].to_vec(),
        q_series: rec.q_series[..n].to_vec(),
        dt_ns,
        label: Some(rec.label),
    };
    Ok(smooth(&t, window)?)
}

pub fn slices_for(set: &TrajectorySet, tm_ns: f64) -> Result<usize> {
    let n = (tm_ns / set.dt_ns).round() as usize;
    if n == 0 || n > set.n_slices() || ((n as f64) * set.dt_ns - tm_ns).abs() > 1e-6 {
        return Err(BenchError::Data(format!(
            "window of {tm_ns} ns does not fit the {} ns dataset",
            set.tm_ns
        )));
    }
    Ok(n)
}

pub fn features_at(set: &TrajectorySet, tm_ns: f64, window: usize) -> Result<Features> {
    let n = slices_for(set, tm_ns)?;
    let rows = set
        .records
        .par_iter()
        .map(|rec| {
            let (t, clamp) = prefix_trajectory(rec, set.dt_ns, n, window)?;
            let iq = IqPoint {
                i: rec.i_series[..n].iter().sum::<f64>() / n as f64,
                q: rec.q_series[..n].iter().sum::<f64>() / n as f64,
            };
            Ok((flatten(&t).values, iq, clamp))
        })
        .collect::<Result<Vec<_>>>()?;
    let clamp = rows.first().and_then(|r| r.2);
    if let Some(c) = clamp {
        log::warn!(
            "smoothing window {} clamped to {} slices at T_m = {tm_ns} ns",
            c.requested,
            c.used
        );
    }
    let mut data = Vec::with_capacity(rows.len() * 2 * n);
    let mut iq = Vec::with_capacity(rows.len());
    for (v, p, _) in rows {
        data.extend_from_slice(&v);
        iq.push(p);
    }
    Ok(Features {
        tm_ns,
        x: Matrix::from_vec(set.len(), 2 * n, data)?,
        iq,
        labels: set.labels(),
        clamp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use qubit_readout::demod::full_demod;

    #[test]
    fn prefix_equals_shorter_simulation() {
        let sim = SimConfig::default();
        let long = simulate_trajectories(&sim, &[(1, 3)], 1600.0).unwrap();
        let short = simulate_trajectories(&sim, &[(1, 3)], 800.0).unwrap();
        let n = short.n_slices();
        assert_eq!(n, 50);
        for k in 0..n {
            assert!((long.records[0].i_series[k] - short.records[0].i_series[k]).abs() < 1e-12);
            assert!((long.records[0].q_series[k] - short.records[0].q_series[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn iq_is_full_window_demod() {
        let sim = SimConfig::default();
        let set = simulate_trajectories(&sim, &[(0, 0), (1, 0)], 800.0).unwrap();
        let f = features_at(&set, 800.0, 50).unwrap();
        for (k, &(s, i)) in [(0usize, 0usize), (1, 0)].iter().enumerate() {
            let shot = simulate_shot(&sim, s, 800.0, shot_seed(&sim, s, i)).unwrap();
            let p = full_demod(&shot, sim.f_if_hz).unwrap();
            assert!((p.i - f.iq[k].i).abs() < 1e-9 && (p.q - f.iq[k].q).abs() < 1e-9);
        }
        assert_eq!(f.x.cols(), 100);
        assert!(f.clamp.is_some());
    }

    #[test]
    fn feature_dim_at_2400() {
        let sim = SimConfig::default();
        let set = simulate_trajectories(&sim, &[(0, 0)], 2400.0).unwrap();
        let f = features_at(&set, 2400.0, 50).unwrap();
        assert_eq!((set.n_slices(), f.x.cols()), (150, 300));
        assert!(f.clamp.is_none());
        assert!(features_at(&set, 3200.0, 50).is_err());
    }
}
