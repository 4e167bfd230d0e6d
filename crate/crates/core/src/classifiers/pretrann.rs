use serde::{Deserialize, Serialize};

use crate::demod::Scaler;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::nn::{
    train, DenseNetwork, LossKind, MonitorMetric, MonitorSource, Samples, Targets, TrainConfig, TrainLog,
};
use crate::rng::{derive_seed, stream};

use super::autoencoder::{encode_batch, pretrain_on_split, AutoencoderSpec};
use super::ffnn::{train_head, ClassifierHeadSpec};
use super::{check_labels, predictions, scale_matrix, Predictions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreTraNNConfig {
    pub latent_fraction: f64,
    pub train: TrainConfig,
    pub monitor: MonitorSource,
    /// After stage 2, train encoder and head jointly (off by default).
    pub fine_tune: bool,
    /// Keep the decoder in the model so latent probes can be run later.
    pub keep_decoder: bool,
}

impl Default for PreTraNNConfig {
    fn default() -> Self {
        PreTraNNConfig {
            latent_fraction: AutoencoderSpec::DEFAULT_FRACTION,
            train: TrainConfig::default(),
            monitor: MonitorSource::default(),
            fine_tune: false,
            keep_decoder: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreTraNNModel {
    pub scaler: Scaler,
    pub encoder: DenseNetwork,
    pub decoder: Option<DenseNetwork>,
    pub head: DenseNetwork,
    pub n_classes: usize,
    pub autoencoder_log: Option<TrainLog>,
    pub head_log: Option<TrainLog>,
}

impl PreTraNNModel {
    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    /// Label (lowest index on ties) and class probabilities for one raw feature vector.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        let p = self.predict_batch(&m)?;
        Ok((p.labels[0], p.probabilities.row(0).to_vec()))
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Predictions> {
        let h = encode_batch(&self.encoder, &scale_matrix(&self.scaler, x)?)?;
        predictions(&self.head, &h)
    }

    /// Latent representation of raw feature vectors.
    pub fn encode_raw(&self, x: &Matrix) -> Result<Matrix> {
        encode_batch(&self.encoder, &scale_matrix(&self.scaler, x)?)
    }
}

/// Two-stage training: the autoencoder learns to reconstruct the scaled
/// features, then a classifier head is trained on the frozen encoder output.
/// The scaler is fit on `x` and stored in the model.
pub fn train_pretrann(x: &Matrix, labels: &[usize], n_classes: usize, config: &PreTraNNConfig) -> Result<PreTraNNModel> {
    check_labels(x, labels, n_classes)?;
    let scaler = Scaler::fit(x.iter_rows())?;
    let scaled = scale_matrix(&scaler, x)?;
    let (fit_idx, mon_idx) = config.monitor.split(x.rows(), config.train.seed)?;

    let ae_spec = AutoencoderSpec::with_fraction(x.cols(), config.latent_fraction);
    let ae_train = TrainConfig {
        seed: derive_seed(config.train.seed, &[stream::TRAIN, 100]),
        ..config.train.clone()
    };
    let (encoder, decoder, ae_log) = pretrain_on_split(&scaled, &ae_spec, &ae_train, &fit_idx, &mon_idx)?;
    log::debug!(
        "autoencoder stopped at epoch {} (best {}), loss {:.4e}",
        ae_log.stop_epoch,
        ae_log.best_epoch,
        ae_log.final_loss()
    );

    // Encoder is frozen from here on, so the latent vectors are computed once.
    let h = encode_batch(&encoder, &scaled)?;
    let head_spec = ClassifierHeadSpec::new(encoder.output_dim(), n_classes);
    let (head, head_log) = train_head(&h, labels, &head_spec, &config.train, &fit_idx, &mon_idx, 1)?;
    log::debug!(
        "head stopped at epoch {} (best {}), monitor accuracy {:.4}",
        head_log.stop_epoch,
        head_log.best_epoch,
        head_log.monitor[head_log.best_epoch - 1]
    );

    let (encoder, head, head_log) = if config.fine_tune {
        let joint = encoder.chain(&head)?;
        let fit = scaled.select_rows(&fit_idx);
        let fit_labels: Vec<usize> = fit_idx.iter().map(|&i| labels[i]).collect();
        let mon = scaled.select_rows(&mon_idx);
        let mon_labels: Vec<usize> = mon_idx.iter().map(|&i| labels[i]).collect();
        let stage = TrainConfig {
            seed: derive_seed(config.train.seed, &[stream::TRAIN, 2]),
            ..config.train.clone()
        };
        let (joint, log) = train(
            joint,
            Samples::new(&fit, Targets::Classes(&fit_labels)),
            Samples::new(&mon, Targets::Classes(&mon_labels)),
            LossKind::CrossEntropy,
            MonitorMetric::Accuracy,
            &stage,
        )?;
        let (e, h) = joint.split_at(encoder.layers().len())?;
        (e, h, log)
    } else {
        (encoder, head, head_log)
    };

    Ok(PreTraNNModel {
        scaler,
        encoder,
        decoder: config.keep_decoder.then_some(decoder),
        head,
        n_classes,
        autoencoder_log: Some(ae_log),
        head_log: Some(head_log),
    })
}
