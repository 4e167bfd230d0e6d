//! Reconstructions obtained by sweeping one latent component of a trained
//! PreTraNN autoencoder.

use std::path::Path;

use qubit_readout::classifiers::{latent_probe, load_model, Model};
use qubit_readout::demod::flatten;

use crate::error::{BenchError, Result};
use crate::formats::read_traj;
use crate::report::{num, Table};

/// `count` evenly spaced values on `[lo, hi]`.
pub fn probe_values(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect(),
    }
}

/// Rows: the input, its unmodified reconstruction, then one row per probe
/// value. Columns hold the I part then the Q part, in feature units.
pub fn run_probe(model_path: &Path, traj_path: &Path, shot: usize, component: usize, values: &[f64]) -> Result<Table> {
    let (model, _) = load_model(model_path)?;
    let Model::PreTraNN(model) = model else {
        return Err(BenchError::Usage(format!(
            "{} is not a PreTraNN model",
            model_path.display()
        )));
    };
    let decoder = model.decoder.as_ref().ok_or_else(|| {
        BenchError::Usage("model was saved without its decoder; retrain with model saving enabled".into())
    })?;
    let file = read_traj(traj_path)?;
    let traj = file.trajectories.get(shot).ok_or_else(|| {
        BenchError::Usage(format!(
            "shot index {shot} out of range ({} shots)",
            file.trajectories.len()
        ))
    })?;
    let raw = flatten(traj).values;
    let mut scaled = raw.clone();
    model.scaler.apply_in_place(&mut scaled)?;
    let probe = latent_probe(&model.encoder, decoder, &scaled, component, values)?;

    let n = traj.len();
    let mut header = vec!["kind".to_string(), "value".to_string()];
    header.extend((0..n).map(|k| format!("i_{k}")));
    header.extend((0..n).map(|k| format!("q_{k}")));
    let mut t = Table::new(header);
    let mut push = |kind: &str, value: Option<f64>, v: &[f64]| {
        let mut row = vec![kind.to_string(), value.map(num).unwrap_or_default()];
        row.extend(v.iter().map(|&x| num(x)));
        t.push(row);
    };
    push("input", None, &raw);
    push("reconstruction", Some(probe.latent[component]), &model.scaler.invert(&probe.reconstruction));
    for (v, rec) in probe.values.iter().zip(&probe.family) {
        push("probe", Some(*v), &model.scaler.invert(rec));
    }
    Ok(t)
}
