//! Latent-size and training-set-size sweeps for PreTraNN.

use std::path::{Path, PathBuf};
use std::time::Instant;

use qubit_readout::classifiers::{train_pretrann, AutoencoderSpec, PreTraNNConfig, PreTraNNModel};
use qubit_readout::metrics::{global_accuracy, per_state_accuracy};
use qubit_readout::nn::TrainLog;
use qubit_readout::rng::{derive_seed, derived_rng, stream};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::benchmark::{split_seed, stratified_split};
use crate::config::ExperimentConfig;
use crate::data::{features_at, shot_jobs, simulate_trajectories, Features};
use crate::error::{BenchError, Result};
use crate::report::{mean_std, num, Table};

/// One trained-and-evaluated PreTraNN.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub key: f64,
    pub repeat: usize,
    pub seed: u64,
    pub latent_dim: usize,
    pub n_train: usize,
    pub accuracy: f64,
    pub final_loss: f64,
    pub train_s: f64,
    pub autoencoder_log: TrainLog,
    pub head_log: TrainLog,
}

fn fit_and_score(
    cfg: &ExperimentConfig,
    train: &Features,
    test: &Features,
    latent_fraction: f64,
    seed: u64,
) -> Result<(PreTraNNModel, f64, f64)> {
    let pc = PreTraNNConfig {
        latent_fraction,
        train: qubit_readout::nn::TrainConfig {
            seed,
            ..cfg.train.clone()
        },
        monitor: cfg.monitor,
        keep_decoder: false,
        ..PreTraNNConfig::default()
    };
    let start = Instant::now();
    let model = train_pretrann(&train.x, &train.labels, cfg.n_states(), &pc)?;
    let train_s = start.elapsed().as_secs_f64();
    let preds = model.predict_batch(&test.x)?.labels;
    let acc = global_accuracy(&per_state_accuracy(&preds, &test.labels, cfg.n_states())?)?;
    Ok((model, acc, train_s))
}

fn run_from(key: f64, repeat: usize, seed: u64, n_train: usize, fitted: (PreTraNNModel, f64, f64)) -> SweepRun {
    let (model, accuracy, train_s) = fitted;
    let autoencoder_log = model.autoencoder_log.clone().expect("fresh model has logs");
    SweepRun {
        key,
        repeat,
        seed,
        latent_dim: model.latent_dim(),
        n_train,
        accuracy,
        final_loss: autoencoder_log.final_loss(),
        train_s,
        autoencoder_log,
        head_log: model.head_log.clone().expect("fresh model has logs"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    /// Name of the swept quantity (`fraction` or `size`).
    pub key_name: &'static str,
    pub config_hash: String,
    pub runs: Vec<SweepRun>,
}

impl SweepOutput {
    fn keys(&self) -> Vec<f64> {
        let mut keys: Vec<f64> = Vec::new();
        for r in &self.runs {
            if !keys.contains(&r.key) {
                keys.push(r.key);
            }
        }
        keys
    }

    fn curve_id(&self, r: &SweepRun) -> String {
        format!("{}{}_r{}", self.key_name, r.key, r.repeat)
    }

    pub fn runs_table(&self) -> Table {
        let mut t = Table::new([
            self.key_name,
            "repeat",
            "seed",
            "config_hash",
            "latent_dim",
            "n_train",
            "accuracy",
            "final_loss",
            "curve_id",
            "train_s",
        ]);
        for r in &self.runs {
            t.push(vec![
                num(r.key),
                r.repeat.to_string(),
                r.seed.to_string(),
                self.config_hash.clone(),
                r.latent_dim.to_string(),
                r.n_train.to_string(),
                num(r.accuracy),
                num(r.final_loss),
                self.curve_id(r),
                num(r.train_s),
            ]);
        }
        t
    }

    /// Mean over repeats per swept value, in sweep order.
    pub fn summary(&self) -> Vec<SweepSummary> {
        self.keys()
            .into_iter()
            .map(|k| {
                let runs: Vec<&SweepRun> = self.runs.iter().filter(|r| r.key == k).collect();
                let col = |f: fn(&SweepRun) -> f64| runs.iter().map(|r| f(r)).collect::<Vec<_>>();
                SweepSummary {
                    key: k,
                    latent_dim: runs[0].latent_dim,
                    n: runs.len(),
                    accuracy: mean_std(&col(|r| r.accuracy)),
                    final_loss: mean_std(&col(|r| r.final_loss)).0,
                    train_s: mean_std(&col(|r| r.train_s)).0,
                }
            })
            .collect()
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new([
            self.key_name,
            "latent_dim",
            "repeats",
            "accuracy_mean",
            "accuracy_std",
            "final_loss_mean",
            "config_hash",
            "train_mean_s",
        ]);
        for s in self.summary() {
            t.push(vec![
                num(s.key),
                s.latent_dim.to_string(),
                s.n.to_string(),
                num(s.accuracy.0),
                num(s.accuracy.1),
                num(s.final_loss),
                self.config_hash.clone(),
                num(s.train_s),
            ]);
        }
        t
    }

    /// Per-epoch training loss and monitor value of both stages of every run.
    pub fn curves_table(&self) -> Table {
        let mut t = Table::new(["curve_id", "stage", "epoch", "loss", "monitor"]);
        for r in &self.runs {
            for (stage, log) in [("autoencoder", &r.autoencoder_log), ("head", &r.head_log)] {
                for (e, (l, m)) in log.epoch_loss.iter().zip(&log.monitor).enumerate() {
                    t.push(vec![self.curve_id(r), stage.into(), (e + 1).to_string(), num(*l), num(*m)]);
                }
            }
        }
        t
    }

    pub fn write(&self, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
        let paths = [
            dir.join(format!("{prefix}_summary.csv")),
            dir.join(format!("{prefix}_runs.csv")),
            dir.join(format!("{prefix}_loss_curves.csv")),
        ];
        self.summary_table().write(&paths[0])?;
        self.runs_table().write(&paths[1])?;
        self.curves_table().write(&paths[2])?;
        Ok(paths.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub key: f64,
    pub latent_dim: usize,
    pub n: usize,
    pub accuracy: (f64, f64),
    pub final_loss: f64,
    pub train_s: f64,
}

/// PreTraNN accuracy, reconstruction loss and training time per latent fraction.
pub fn sweep_latent(cfg: &ExperimentConfig, fractions: &[f64]) -> Result<SweepOutput> {
    cfg.validate()?;
    if fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) || fractions.is_empty() {
        return Err(BenchError::Usage("latent fractions must be a nonempty subset of (0, 1]".into()));
    }
    let tm = cfg.latent_tm_ns;
    let set = simulate_trajectories(&cfg.sim_config(), &shot_jobs(cfg.n_states(), 0..cfg.shots_per_state), tm)?;
    let feats = features_at(&set, tm, cfg.smoothing_window)?;
    let splits: Vec<_> = (0..cfg.repeats)
        .map(|r| stratified_split(&feats.labels, cfg.split_fraction, split_seed(cfg.master_seed, r)))
        .collect();
    let jobs: Vec<(f64, usize)> = fractions
        .iter()
        .flat_map(|&f| (0..cfg.repeats).map(move |r| (f, r)))
        .collect();
    for &f in fractions {
        let w = AutoencoderSpec::with_fraction(feats.x.cols(), f).widths();
        log::info!("fraction {f}: autoencoder widths {w:?}");
    }
    let runs = jobs
        .par_iter()
        .map(|&(f, r)| {
            let seed = derive_seed(cfg.master_seed, &[stream::TRAIN, r as u64, f.to_bits()]);
            let (tr, te) = &splits[r];
            let train = feats.select(tr);
            let fitted = fit_and_score(cfg, &train, &feats.select(te), f, seed)?;
            Ok(run_from(f, r, seed, train.len(), fitted))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepOutput {
        key_name: "fraction",
        config_hash: cfg.config_hash(),
        runs,
    })
}

/// Stratified draw of `size` indices from `labels` (as equal per label as possible).
fn stratified_subset(labels: &[usize], n_states: usize, size: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = derived_rng(seed, &[stream::DATA]);
    let mut out = Vec::with_capacity(size);
    for s in 0..n_states {
        let want = size / n_states + usize::from(s < size % n_states);
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == s).collect();
        if idx.len() < want {
            return Err(BenchError::Data(format!("pool holds {} shots of state {s}, need {want}", idx.len())));
        }
        idx.shuffle(&mut rng);
        out.extend_from_slice(&idx[..want]);
    }
    out.sort_unstable();
    Ok(out)
}

/// PreTraNN accuracy and training time per training-set size. Training sets
/// are stratified draws from one pool; all sizes share a fixed test set of
/// separate shots.
pub fn sweep_dataset(cfg: &ExperimentConfig, sizes: &[usize]) -> Result<SweepOutput> {
    cfg.validate()?;
    let n_states = cfg.n_states();
    if sizes.is_empty() || sizes.iter().any(|&s| s < n_states) {
        return Err(BenchError::Usage("dataset sizes must be at least the number of states".into()));
    }
    let max = *sizes.iter().max().expect("nonempty");
    let pool_per_state = max.div_ceil(n_states);
    let test_per_state = ((cfg.shots_per_state as f64) * (1.0 - cfg.split_fraction)).round().max(1.0) as usize;
    let tm = cfg.dataset_tm_ns;
    let sim = cfg.sim_config();
    let pool = features_at(
        &simulate_trajectories(&sim, &shot_jobs(n_states, 0..pool_per_state), tm)?,
        tm,
        cfg.smoothing_window,
    )?;
    let test = features_at(
        &simulate_trajectories(&sim, &shot_jobs(n_states, pool_per_state..pool_per_state + test_per_state), tm)?,
        tm,
        cfg.smoothing_window,
    )?;
    let jobs: Vec<(usize, usize)> = sizes.iter().flat_map(|&s| (0..cfg.repeats).map(move |r| (s, r))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(size, r)| {
            let idx = stratified_subset(
                &pool.labels,
                n_states,
                size,
                derive_seed(cfg.master_seed, &[stream::DATA, size as u64, r as u64]),
            )?;
            let seed = derive_seed(cfg.master_seed, &[stream::TRAIN, r as u64, size as u64]);
            let train = pool.select(&idx);
            let fitted = fit_and_score(cfg, &train, &test, AutoencoderSpec::DEFAULT_FRACTION, seed)?;
            Ok(run_from(size as f64, r, seed, size, fitted))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepOutput {
        key_name: "size",
        config_hash: cfg.config_hash(),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_is_stratified() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let idx = stratified_subset(&labels, 3, 10, 1).unwrap();
        assert_eq!(idx.len(), 10);
        let counts: Vec<usize> = (0..3).map(|s| idx.iter().filter(|&&i| labels[i] == s).count()).collect();
        assert_eq!(counts, vec![4, 3, 3]);
        assert!(stratified_subset(&labels, 3, 40, 1).is_err());
    }
}
