//! Dataset generation: raw shots, smoothed trajectories and I/Q points.

use std::path::PathBuf;

use qubit_readout::demod::IqPoint;
use qubit_readout::sim::{shot_seed, simulate_shot};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::data::{features_at, record_from_shot, shot_jobs, TrajectorySet};
use crate::error::{BenchError, Result};
use crate::formats::{write_iq, write_traj, DatasetMeta, RawWriter, TrajFile};

const CHUNK: usize = 512;

pub fn traj_file_name(tm_ns: f64) -> String {
    format!("traj_tm{tm_ns}.qrd")
}

pub fn iq_file_name(tm_ns: f64) -> String {
    format!("iq_tm{tm_ns}.qrd")
}

pub const RAW_FILE_NAME: &str = "raw.qrd";

/// Simulate `shots_per_state` shots per state at the longest window, then
/// write the raw shots (unless disabled) and, for every window, the smoothed
/// trajectories and full-window I/Q points.
pub fn run_generate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
    let sim = cfg.sim_config();
    let tm_max = cfg.max_tm_ns();
    let hash = cfg.config_hash();
    let jobs = shot_jobs(cfg.n_states(), 0..cfg.shots_per_state);
    let n_samples = sim.samples_for(tm_max)?;
    let mut written = Vec::new();

    let mut raw = if cfg.save_raw {
        let p = dir.join(RAW_FILE_NAME);
        written.push(p.clone());
        Some(RawWriter::create(&p, &DatasetMeta::new(&sim, tm_max, cfg.n_states(), &hash), jobs.len(), n_samples)?)
    } else {
        None
    };
    let mut records = Vec::with_capacity(jobs.len());
    for chunk in jobs.chunks(CHUNK) {
        let shots = chunk
            .par_iter()
            .map(|&(s, i)| simulate_shot(&sim, s, tm_max, shot_seed(&sim, s, i)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        for shot in &shots {
            if let Some(w) = raw.as_mut() {
                w.push(shot)?;
            }
            records.push(record_from_shot(shot, &sim)?);
        }
    }
    if let Some(w) = raw {
        w.finish()?;
    }
    let set = TrajectorySet {
        dt_ns: sim.slice_ns,
        tm_ns: tm_max,
        records,
    };

    for &tm in &cfg.tm_list_ns {
        let meta = DatasetMeta::new(&sim, tm, cfg.n_states(), &hash);
        let f = features_at(&set, tm, cfg.smoothing_window)?;
        let n = f.x.cols() / 2;
        let trajectories = f
            .x
            .iter_rows()
            .zip(&f.labels)
            .map(|(row, &l)| qubit_readout::demod::Trajectory {
                i_series: row[..n].to_vec(),
                q_series: row[n..].to_vec(),
                dt_ns: sim.slice_ns,
                label: Some(l),
            })
            .collect();
        let traj = TrajFile {
            meta: meta.clone(),
            window_requested: cfg.smoothing_window,
            window_used: f.clamp.map_or(cfg.smoothing_window, |c| c.used),
            trajectories,
        };
        let tp = dir.join(traj_file_name(tm));
        write_traj(&tp, &traj)?;
        let points: Vec<(usize, IqPoint)> = f.labels.iter().copied().zip(f.iq.iter().copied()).collect();
        let ip = dir.join(iq_file_name(tm));
        write_iq(&ip, &meta, &points)?;
        written.push(tp);
        written.push(ip);
    }
    Ok(written)
}
