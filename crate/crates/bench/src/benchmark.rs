//! Accuracy benchmark over measurement windows, methods and repeats.
//!
//! Every `(repeat, T_m, method)` cell derives its own seed from the master
//! seed, so results do not depend on scheduling. Within a repeat all windows
//! and methods share the same train/test split.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qubit_readout::classifiers::{
    gmm_assign_labels, gmm_fit, gmm_predict, save_model, train_ffnn, train_pretrann, FfnnConfig, Model,
    PreTraNNConfig,
};
use qubit_readout::metrics::EvalReport;
use qubit_readout::rng::{derive_seed, derived_rng, stream};
use qubit_readout::ReadoutError;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Method};
use crate::data::{features_at, shot_jobs, simulate_trajectories, Features, TrajectorySet};
use crate::error::{BenchError, Result};
use crate::report::{mean_std, num, Table};

/// Stratified shuffle split: each label keeps `round(fraction * count)`
/// samples for training. Returns sorted (train, test) index sets.
pub fn stratified_split(labels: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n_labels = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = derived_rng(seed, &[stream::SPLIT]);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for l in 0..n_labels {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == l).collect();
        idx.shuffle(&mut rng);
        let k = (idx.len() as f64 * fraction).round() as usize;
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

pub fn split_seed(master: u64, repeat: usize) -> u64 {
    derive_seed(master, &[stream::SPLIT, repeat as u64])
}

pub fn cell_seed(master: u64, repeat: usize, tm_ns: f64, method: Method) -> u64 {
    derive_seed(master, &[stream::TRAIN, repeat as u64, tm_ns.to_bits(), method as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub method: Method,
    pub tm_ns: f64,
    pub repeat: usize,
    pub seed: u64,
    pub n_train: usize,
    pub outcome: std::result::Result<EvalReport, String>,
    /// True when the failure was numerical (rather than bad input).
    pub numeric_failure: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutput {
    pub config_hash: String,
    pub n_states: usize,
    pub timing_batches: Vec<usize>,
    pub cells: Vec<CellResult>,
}

/// A trained classifier behind one interface for evaluation and timing.
enum Trained {
    Gmm(qubit_readout::classifiers::GmmModel),
    Net(Model),
}

impl Trained {
    fn predict(&self, f: &Features) -> std::result::Result<Vec<usize>, ReadoutError> {
        match self {
            Trained::Gmm(m) => f.iq.iter().map(|&p| gmm_predict(m, p)).collect(),
            Trained::Net(Model::PreTraNN(m)) => Ok(m.predict_batch(&f.x)?.labels),
            Trained::Net(Model::Ffnn(m)) => Ok(m.predict_batch(&f.x)?.labels),
            Trained::Net(Model::Gmm(_)) => unreachable!("mixtures are stored as Trained::Gmm"),
        }
    }

    fn into_model(self) -> Model {
        match self {
            Trained::Gmm(m) => Model::Gmm(m),
            Trained::Net(m) => m,
        }
    }
}

fn train_method(
    cfg: &ExperimentConfig,
    method: Method,
    train: &Features,
    seed: u64,
) -> std::result::Result<Trained, ReadoutError> {
    let n_classes = cfg.n_states();
    let train_cfg = qubit_readout::nn::TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    Ok(match method {
        Method::Gmm => {
            let m = gmm_fit(&train.iq, n_classes, seed, &cfg.gmm)?;
            Trained::Gmm(gmm_assign_labels(&m, &train.iq, &train.labels)?)
        }
        Method::Pretrann => {
            let pc = PreTraNNConfig {
                train: train_cfg,
                monitor: cfg.monitor,
                keep_decoder: cfg.save_models,
                ..PreTraNNConfig::default()
            };
            Trained::Net(Model::PreTraNN(train_pretrann(&train.x, &train.labels, n_classes, &pc)?))
        }
        Method::Ffnn => {
            let fc = FfnnConfig {
                train: train_cfg,
                monitor: cfg.monitor,
            };
            Trained::Net(Model::Ffnn(train_ffnn(&train.x, &train.labels, n_classes, &fc)?))
        }
    })
}

/// Wall time to classify one batch of `b` test samples (cycled if the test set
/// is smaller), averaged over a few batches for small `b`.
fn time_batch(model: &Trained, test: &Features, b: usize) -> std::result::Result<f64, ReadoutError> {
    let idx: Vec<usize> = (0..b).map(|i| i % test.len()).collect();
    let batch = test.select(&idx);
    let reps = if b <= 100 { 10 } else { 1 };
    let start = Instant::now();
    for _ in 0..reps {
        model.predict(&batch)?;
    }
    Ok(start.elapsed().as_secs_f64() / reps as f64)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    cfg: &ExperimentConfig,
    method: Method,
    repeat: usize,
    feats: &Features,
    train_idx: &[usize],
    test_idx: &[usize],
    model_dir: Option<&Path>,
) -> CellResult {
    let seed = cell_seed(cfg.master_seed, repeat, feats.tm_ns, method);
    let train = feats.select(train_idx);
    let test = feats.select(test_idx);
    let outcome = (|| -> std::result::Result<EvalReport, ReadoutError> {
        let start = Instant::now();
        let model = train_method(cfg, method, &train, seed)?;
        let train_s = start.elapsed().as_secs_f64();
        let preds = model.predict(&test)?;
        let mut report = EvalReport::from_predictions(
            method.name(),
            feats.tm_ns,
            repeat,
            seed,
            &preds,
            &test.labels,
            cfg.n_states(),
        )?;
        report.timing.insert("train".into(), train_s);
        for &b in &cfg.timing_batches {
            report.timing.insert(format!("infer_b{b}"), time_batch(&model, &test, b)?);
        }
        if let Some(dir) = model_dir {
            let path = dir.join(format!("{}_tm{}_r{repeat}.qrdm", method.name(), feats.tm_ns));
            let meta = vec![
                ("seed".to_string(), seed.to_string()),
                ("tm_ns".to_string(), feats.tm_ns.to_string()),
                ("config_hash".to_string(), cfg.config_hash()),
            ];
            save_model(&path, &model.into_model(), &meta)?;
        }
        Ok(report)
    })();
    if let Err(e) = &outcome {
        log::warn!(
            "{method} at T_m = {} ns, repeat {repeat} failed and is excluded: {e}",
            feats.tm_ns
        );
    }
    CellResult {
        method,
        tm_ns: feats.tm_ns,
        repeat,
        seed,
        n_train: train.len(),
        numeric_failure: outcome.as_ref().err().is_some_and(|e| e.is_numeric()),
        outcome: outcome.map_err(|e| e.to_string()),
    }
}

/// Simulated trajectories for a repeat (shared across repeats unless `fresh_data`).
fn dataset(cfg: &ExperimentConfig, repeat: usize) -> Result<TrajectorySet> {
    let n = cfg.shots_per_state;
    let range = if cfg.fresh_data { repeat * n..(repeat + 1) * n } else { 0..n };
    simulate_trajectories(&cfg.sim_config(), &shot_jobs(cfg.n_states(), range), cfg.max_tm_ns())
}

/// Repeat index with its train and test row indices.
type Split = (usize, Vec<usize>, Vec<usize>);

pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkOutput> {
    cfg.validate()?;
    let model_dir = if cfg.save_models {
        let d = cfg.out_dir.join("models");
        std::fs::create_dir_all(&d).map_err(BenchError::io(&d))?;
        Some(d)
    } else {
        None
    };
    let n_sets = if cfg.fresh_data { cfg.repeats } else { 1 };
    let mut cells = Vec::new();
    for set_idx in 0..n_sets {
        let set = dataset(cfg, set_idx)?;
        let labels = set.labels();
        let repeats: Vec<usize> = if cfg.fresh_data { vec![set_idx] } else { (0..cfg.repeats).collect() };
        let splits: Vec<Split> = repeats
            .iter()
            .map(|&r| {
                let (tr, te) = stratified_split(&labels, cfg.split_fraction, split_seed(cfg.master_seed, r));
                (r, tr, te)
            })
            .collect();
        for &tm in &cfg.tm_list_ns {
            let feats = features_at(&set, tm, cfg.smoothing_window)?;
            log::info!("T_m = {tm} ns: {} shots, {} features", feats.len(), feats.x.cols());
            let jobs: Vec<(&Split, Method)> = splits
                .iter()
                .flat_map(|s| cfg.methods.iter().map(move |&m| (s, m)))
                .collect();
            let results: Vec<CellResult> = jobs
                .par_iter()
                .map(|&((r, tr, te), m)| run_cell(cfg, m, *r, &feats, tr, te, model_dir.as_deref()))
                .collect();
            cells.extend(results);
        }
    }
    let tm_pos = |tm: f64| cfg.tm_list_ns.iter().position(|&t| t == tm).unwrap_or(usize::MAX);
    cells.sort_by_key(|c| (tm_pos(c.tm_ns), c.method, c.repeat));
    Ok(BenchmarkOutput {
        config_hash: cfg.config_hash(),
        n_states: cfg.n_states(),
        timing_batches: cfg.timing_batches.clone(),
        cells,
    })
}

impl BenchmarkOutput {
    /// One row per cell. Timing columns end in `_s`.
    pub fn results_table(&self) -> Table {
        let n = self.n_states;
        let mut header: Vec<String> = [
            "method",
            "n_states",
            "tm_ns",
            "repeat",
            "seed",
            "config_hash",
            "status",
            "n_train",
            "n_test",
            "global_accuracy",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend((0..n).map(|s| format!("acc_state_{s}")));
        for a in 0..n {
            header.extend((0..n).map(|b| format!("conf_{a}_{b}")));
        }
        header.push("train_s".into());
        header.extend(self.timing_batches.iter().map(|b| format!("infer_b{b}_s")));
        header.push("error".into());
        let mut t = Table::new(header);
        for c in &self.cells {
            let mut row = vec![
                c.method.name().to_string(),
                n.to_string(),
                num(c.tm_ns),
                c.repeat.to_string(),
                c.seed.to_string(),
                self.config_hash.clone(),
            ];
            match &c.outcome {
                Ok(r) => {
                    row.extend([
                        "ok".to_string(),
                        c.n_train.to_string(),
                        r.n_test.to_string(),
                        num(r.global_accuracy),
                    ]);
                    row.extend(r.per_state_accuracy.iter().map(|&v| num(v)));
                    row.extend(r.confusion.rows.iter().flatten().map(|&v| num(v)));
                    row.push(num(r.timing["train"]));
                    row.extend(self.timing_batches.iter().map(|b| num(r.timing[&format!("infer_b{b}")])));
                    row.push(String::new());
                }
                Err(e) => {
                    row.extend(["failed".to_string(), c.n_train.to_string(), String::new(), String::new()]);
                    row.extend(std::iter::repeat_n(String::new(), n + n * n + 1 + self.timing_batches.len()));
                    row.push(e.clone());
                }
            }
            t.push(row);
        }
        t
    }

    fn groups(&self) -> BTreeMap<(usize, Method), Vec<&CellResult>> {
        let mut order: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !order.contains(&c.tm_ns) {
                order.push(c.tm_ns);
            }
        }
        let mut g: BTreeMap<(usize, Method), Vec<&CellResult>> = BTreeMap::new();
        for c in &self.cells {
            let pos = order.iter().position(|&t| t == c.tm_ns).expect("seen");
            g.entry((pos, c.method)).or_default().push(c);
        }
        g
    }

    /// Mean and standard deviation over successful repeats, per (T_m, method).
    pub fn summary(&self) -> Vec<SummaryRow> {
        self.groups()
            .into_values()
            .map(|cells| {
                let ok: Vec<&EvalReport> = cells.iter().filter_map(|c| c.outcome.as_ref().ok()).collect();
                let global: Vec<f64> = ok.iter().map(|r| r.global_accuracy).collect();
                let per_state = (0..self.n_states)
                    .map(|s| mean_std(&ok.iter().map(|r| r.per_state_accuracy[s]).collect::<Vec<_>>()))
                    .collect();
                let train: Vec<f64> = ok.iter().map(|r| r.timing["train"]).collect();
                SummaryRow {
                    method: cells[0].method,
                    tm_ns: cells[0].tm_ns,
                    n_ok: ok.len(),
                    n_failed: cells.len() - ok.len(),
                    global: mean_std(&global),
                    per_state,
                    train_s: mean_std(&train).0,
                }
            })
            .collect()
    }

    pub fn summary_table(&self) -> Table {
        let mut header: Vec<String> = ["method", "n_states", "tm_ns", "n_ok", "n_failed", "global_mean", "global_std"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for s in 0..self.n_states {
            header.push(format!("acc_state_{s}_mean"));
            header.push(format!("acc_state_{s}_std"));
        }
        header.push("config_hash".into());
        header.push("train_mean_s".into());
        let mut t = Table::new(header);
        for s in self.summary() {
            let mut row = vec![
                s.method.name().to_string(),
                self.n_states.to_string(),
                num(s.tm_ns),
                s.n_ok.to_string(),
                s.n_failed.to_string(),
                num(s.global.0),
                num(s.global.1),
            ];
            for (m, sd) in &s.per_state {
                row.push(num(*m));
                row.push(num(*sd));
            }
            row.push(self.config_hash.clone());
            row.push(num(s.train_s));
            t.push(row);
        }
        t
    }

    pub fn reports(&self) -> Vec<&EvalReport> {
        self.cells.iter().filter_map(|c| c.outcome.as_ref().ok()).collect()
    }

    /// Writes `results.csv`, `summary.csv` and `reports.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
        let results = dir.join("results.csv");
        let summary = dir.join("summary.csv");
        let json = dir.join("reports.json");
        self.results_table().write(&results)?;
        self.summary_table().write(&summary)?;
        let text = serde_json::to_string_pretty(&self.reports())?;
        std::fs::write(&json, text).map_err(BenchError::io(&json))?;
        Ok(vec![results, summary, json])
    }

    /// Number of cells that failed for numerical reasons.
    pub fn numeric_failures(&self) -> usize {
        self.cells.iter().filter(|c| c.numeric_failure).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub tm_ns: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub global: (f64, f64),
    pub per_state: Vec<(f64, f64)>,
    pub train_s: f64,
}
