use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{ReadoutError, Result};
use crate::matrix::Matrix;
use crate::rng::{derived_rng, stream};

use super::adam::{AdamConfig, AdamState};
use super::backprop::{backprop, batch_loss, check_batch, Targets};
use super::loss::LossKind;
use super::network::{argmax, DenseNetwork};

/// Inputs with their targets.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub inputs: &'a Matrix,
    pub targets: Targets<'a>,
}

impl<'a> Samples<'a> {
    pub fn new(inputs: &'a Matrix, targets: Targets<'a>) -> Self {
        Samples { inputs, targets }
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorMetric {
    /// Mean loss, lower is better.
    Loss,
    /// Argmax accuracy, higher is better.
    Accuracy,
}

/// Where the early-stopping metric is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorSource {
    /// Hold out this fraction of the training data.
    Holdout(f64),
    /// Monitor on the training data itself.
    TrainingSet,
}

impl Default for MonitorSource {
    fn default() -> Self {
        MonitorSource::Holdout(0.15)
    }
}

impl MonitorSource {
    /// Split `0..n` into (fit, monitor) index sets. With `TrainingSet` both are
    /// the full range.
    pub fn split(&self, n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        match *self {
            MonitorSource::TrainingSet => Ok(((0..n).collect(), (0..n).collect())),
            MonitorSource::Holdout(frac) => {
                if !(frac > 0.0 && frac < 1.0) {
                    return Err(ReadoutError::InvalidConfig(format!("monitor fraction {frac} not in (0, 1)")));
                }
                let n_mon = ((n as f64 * frac).round() as usize).max(1);
                if n_mon >= n {
                    return Err(ReadoutError::InvalidArgument(format!(
                        "{n} samples are too few to hold out a monitor set"
                    )));
                }
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut derived_rng(seed, &[stream::SPLIT]));
                let fit = idx.split_off(n_mon);
                Ok((fit, idx))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            patience: 2,
            max_epochs: 500,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epoch_loss: Vec<f64>,
    pub monitor: Vec<f64>,
    pub stop_epoch: usize,
    pub best_epoch: usize,
    pub wall_time_s: f64,
}

impl TrainLog {
    /// Training loss of the epoch whose parameters were kept.
    pub fn final_loss(&self) -> f64 {
        self.epoch_loss[self.best_epoch - 1]
    }

    /// Everything except the wall-clock time.
    pub fn same_trajectory(&self, other: &TrainLog) -> bool {
        self.epoch_loss == other.epoch_loss
            && self.monitor == other.monitor
            && self.stop_epoch == other.stop_epoch
            && self.best_epoch == other.best_epoch
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    NoImprovement,
    Stop,
}

/// Patience rule: stop once the metric has failed to beat the best value
/// (by at least 1e-12) for `patience` consecutive epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    higher_is_better: bool,
    best: Option<f64>,
    best_epoch: usize,
    epoch: usize,
}

impl EarlyStopping {
    pub const MIN_DELTA: f64 = 1e-12;

    pub fn new(patience: usize, higher_is_better: bool) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        EarlyStopping {
            patience,
            higher_is_better,
            best: None,
            best_epoch: 0,
            epoch: 0,
        }
    }

    pub fn observe(&mut self, value: f64) -> StopDecision {
        self.epoch += 1;
        let improved = match self.best {
            None => true,
            Some(best) if self.higher_is_better => value >= best + Self::MIN_DELTA,
            Some(best) => value <= best - Self::MIN_DELTA,
        };
        if improved {
            self.best = Some(value);
            self.best_epoch = self.epoch;
            StopDecision::Improved
        } else if self.epoch - self.best_epoch >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::NoImprovement
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }
}

enum BatchTargets {
    Dense(Matrix),
    Classes(Vec<usize>),
}

impl BatchTargets {
    fn gather(targets: Targets<'_>, idx: &[usize]) -> Self {
        match targets {
            Targets::Dense(m) => BatchTargets::Dense(m.select_rows(idx)),
            Targets::Classes(c) => BatchTargets::Classes(idx.iter().map(|&i| c[i]).collect()),
        }
    }

    fn view(&self) -> Targets<'_> {
        match self {
            BatchTargets::Dense(m) => Targets::Dense(m),
            BatchTargets::Classes(c) => Targets::Classes(c),
        }
    }
}

const EVAL_CHUNK: usize = 1024;

/// Evaluate the monitor metric over a sample set in fixed-size chunks.
pub(crate) fn evaluate(net: &DenseNetwork, set: Samples<'_>, loss: LossKind, metric: MonitorMetric) -> Result<f64> {
    let n = set.len();
    let mut total = 0.0;
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let x = set.inputs.select_rows(chunk);
        let t = BatchTargets::gather(set.targets, chunk);
        let out = net.forward_batch(&x)?;
        total += match metric {
            MonitorMetric::Loss => batch_loss(&out, t.view(), loss) * chunk.len() as f64,
            MonitorMetric::Accuracy => (0..chunk.len())
                .filter(|&r| {
                    let truth = match t.view() {
                        Targets::Classes(c) => c[r],
                        Targets::Dense(m) => argmax(m.row(r)),
                    };
                    argmax(out.row(r)) == truth
                })
                .count() as f64,
        };
    }
    Ok(total / n as f64)
}

/// Mini-batch Adam training with early stopping on `monitor`. Returns the
/// parameters of the best monitored epoch.
pub fn train(
    mut net: DenseNetwork,
    train_set: Samples<'_>,
    monitor_set: Samples<'_>,
    loss: LossKind,
    metric: MonitorMetric,
    config: &TrainConfig,
) -> Result<(DenseNetwork, TrainLog)> {
    if train_set.is_empty() || monitor_set.is_empty() {
        return Err(ReadoutError::InvalidArgument("training and monitor sets must be nonempty".into()));
    }
    if config.batch_size == 0 || config.patience == 0 || config.max_epochs == 0 {
        return Err(ReadoutError::InvalidConfig(
            "batch size, patience and max epochs must be at least 1".into(),
        ));
    }
    check_batch(&net, train_set.inputs, train_set.targets, loss)?;
    check_batch(&net, monitor_set.inputs, monitor_set.targets, loss)?;

    let start = Instant::now();
    let n = train_set.len();
    let sizes: Vec<usize> = net.param_slices().iter().map(|s| s.len()).collect();
    let mut adam = AdamState::new(config.adam, &sizes);
    let mut stopper = EarlyStopping::new(config.patience, metric == MonitorMetric::Accuracy);
    let mut order: Vec<usize> = (0..n).collect();
    let mut best_net = net.clone();
    let mut epoch_loss = Vec::new();
    let mut monitor = Vec::new();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut derived_rng(config.seed, &[stream::SHUFFLE, epoch as u64]));
        let mut acc = 0.0;
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            let x = train_set.inputs.select_rows(chunk);
            let t = BatchTargets::gather(train_set.targets, chunk);
            let (value, grads) = backprop(&net, &x, t.view(), loss)?;
            if !value.is_finite() || grads.flat().iter().any(|g| !g.is_finite()) {
                return Err(ReadoutError::NonFiniteLoss { epoch, batch: bi });
            }
            acc += value * chunk.len() as f64;
            adam.step(&mut net.param_slices_mut(), &grads.slices());
        }
        epoch_loss.push(acc / n as f64);
        let m = evaluate(&net, monitor_set, loss, metric)?;
        if !m.is_finite() {
            return Err(ReadoutError::NonFiniteLoss { epoch, batch: usize::MAX });
        }
        monitor.push(m);
        let decision = stopper.observe(m);
        log::debug!("epoch {epoch}: loss {:.6e} monitor {m:.6}", acc / n as f64);
        match decision {
            StopDecision::Improved => best_net = net.clone(),
            StopDecision::NoImprovement => {}
            StopDecision::Stop => break,
        }
    }

    let log = TrainLog {
        stop_epoch: stopper.epoch(),
        best_epoch: stopper.best_epoch(),
        epoch_loss,
        monitor,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((best_net, log))
}
