use serde::{Deserialize, Serialize};

use crate::demod::Scaler;
use crate::error::{ReadoutError, Result};
use crate::matrix::Matrix;
use crate::nn::{
    train, Activation, DenseNetwork, LayerSpec, LossKind, MonitorMetric, MonitorSource, Samples, Targets, TrainConfig,
    TrainLog,
};
use crate::rng::{derive_seed, derived_rng, stream};

use super::{check_labels, predictions, scale_matrix, Predictions};

/// Classifier head `d' -> d' -> 2d' -> d' -> C` (tanh, tanh, tanh, softmax).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierHeadSpec {
    pub input_dim: usize,
    pub n_classes: usize,
}

impl ClassifierHeadSpec {
    pub fn new(input_dim: usize, n_classes: usize) -> Self {
        ClassifierHeadSpec { input_dim, n_classes }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(ReadoutError::InvalidConfig("head input dimension must be positive".into()));
        }
        if self.n_classes < 2 {
            return Err(ReadoutError::InvalidConfig(format!(
                "need at least 2 classes, got {}",
                self.n_classes
            )));
        }
        Ok(())
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let d = self.input_dim;
        vec![
            LayerSpec::new(d, d, Activation::Tanh),
            LayerSpec::new(d, 2 * d, Activation::Tanh),
            LayerSpec::new(2 * d, d, Activation::Tanh),
            LayerSpec::new(d, self.n_classes, Activation::Softmax),
        ]
    }
}

/// Train a head network on `x` with cross-entropy, stopping on monitor accuracy.
pub(crate) fn train_head(
    x: &Matrix,
    labels: &[usize],
    spec: &ClassifierHeadSpec,
    config: &TrainConfig,
    fit_idx: &[usize],
    monitor_idx: &[usize],
    init_tag: u64,
) -> Result<(DenseNetwork, TrainLog)> {
    spec.validate()?;
    let net = DenseNetwork::glorot(&spec.layers(), &mut derived_rng(config.seed, &[stream::INIT, init_tag]))?;
    let fit = x.select_rows(fit_idx);
    let fit_labels: Vec<usize> = fit_idx.iter().map(|&i| labels[i]).collect();
    let mon = x.select_rows(monitor_idx);
    let mon_labels: Vec<usize> = monitor_idx.iter().map(|&i| labels[i]).collect();
    let stage = TrainConfig {
        seed: derive_seed(config.seed, &[stream::TRAIN, init_tag]),
        ..config.clone()
    };
    train(
        net,
        Samples::new(&fit, Targets::Classes(&fit_labels)),
        Samples::new(&mon, Targets::Classes(&mon_labels)),
        LossKind::CrossEntropy,
        MonitorMetric::Accuracy,
        &stage,
    )
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FfnnConfig {
    pub train: TrainConfig,
    pub monitor: MonitorSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnnModel {
    pub scaler: Scaler,
    pub net: DenseNetwork,
    pub n_classes: usize,
    pub log: Option<TrainLog>,
}

impl FfnnModel {
    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        let p = self.predict_batch(&m)?;
        Ok((p.labels[0], p.probabilities.row(0).to_vec()))
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Predictions> {
        predictions(&self.net, &scale_matrix(&self.scaler, x)?)
    }
}

/// Supervised training of a single head on the full (unscaled) feature vectors.
pub fn train_ffnn(x: &Matrix, labels: &[usize], n_classes: usize, config: &FfnnConfig) -> Result<FfnnModel> {
    check_labels(x, labels, n_classes)?;
    let scaler = Scaler::fit(x.iter_rows())?;
    let scaled = scale_matrix(&scaler, x)?;
    let (fit_idx, mon_idx) = config.monitor.split(x.rows(), config.train.seed)?;
    let spec = ClassifierHeadSpec::new(x.cols(), n_classes);
    let (net, log) = train_head(&scaled, labels, &spec, &config.train, &fit_idx, &mon_idx, 0)?;
    Ok(FfnnModel {
        scaler,
        net,
        n_classes,
        log: Some(log),
    })
}
