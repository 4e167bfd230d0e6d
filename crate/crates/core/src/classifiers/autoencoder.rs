use serde::{Deserialize, Serialize};

use crate::error::{ReadoutError, Result};
use crate::matrix::Matrix;
use crate::nn::{
    train, Activation, DenseNetwork, LayerSpec, LossKind, MonitorMetric, MonitorSource, Samples, Targets, TrainConfig,
    TrainLog,
};
use crate::rng::{derived_rng, stream};

use super::ceil_size;

/// Encoder `d -> d -> L1 -> L2 -> L_H` and its mirror image as decoder.
///
/// For the default fraction 1/4 the hidden widths are `3d/4`, `d/2`, `d/4`;
/// other fractions interpolate L1 and L2 linearly between `d` and `L_H`.
/// All sizes are rounded up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderSpec {
    pub input_dim: usize,
    pub latent_fraction: f64,
}

impl AutoencoderSpec {
    pub const DEFAULT_FRACTION: f64 = 0.25;

    pub fn new(input_dim: usize) -> Self {
        AutoencoderSpec {
            input_dim,
            latent_fraction: Self::DEFAULT_FRACTION,
        }
    }

    pub fn with_fraction(input_dim: usize, latent_fraction: f64) -> Self {
        AutoencoderSpec {
            input_dim,
            latent_fraction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 2 {
            return Err(ReadoutError::InvalidConfig("autoencoder input must have at least 2 dimensions".into()));
        }
        if !(self.latent_fraction > 0.0 && self.latent_fraction <= 1.0) {
            return Err(ReadoutError::InvalidConfig(format!(
                "latent fraction {} not in (0, 1]",
                self.latent_fraction
            )));
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        ceil_size(self.input_dim as f64 * self.latent_fraction).max(1)
    }

    /// `[d, L1, L2, L_H]`.
    pub fn widths(&self) -> [usize; 4] {
        let d = self.input_dim as f64;
        let f = self.latent_fraction;
        [
            self.input_dim,
            ceil_size(d * (2.0 + f) / 3.0),
            ceil_size(d * (1.0 + 2.0 * f) / 3.0),
            self.latent_dim(),
        ]
    }

    pub fn encoder_layers(&self) -> Vec<LayerSpec> {
        let [d, l1, l2, lh] = self.widths();
        vec![
            LayerSpec::new(d, d, Activation::Sigmoid),
            LayerSpec::new(d, l1, Activation::Tanh),
            LayerSpec::new(l1, l2, Activation::Tanh),
            LayerSpec::new(l2, lh, Activation::Tanh),
        ]
    }

    pub fn decoder_layers(&self) -> Vec<LayerSpec> {
        let [d, l1, l2, lh] = self.widths();
        vec![
            LayerSpec::new(lh, l2, Activation::Tanh),
            LayerSpec::new(l2, l1, Activation::Tanh),
            LayerSpec::new(l1, d, Activation::Sigmoid),
        ]
    }
}

fn check_unit_range(x: &Matrix) -> Result<()> {
    if x.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(ReadoutError::InvalidArgument("autoencoder inputs must be scaled to [0, 1]".into()));
    }
    Ok(())
}

/// Train the autoencoder on reconstruction mse and return (encoder, decoder, log).
/// `fit_idx` / `monitor_idx` select the rows used for gradient steps and for
/// early stopping.
pub(crate) fn pretrain_on_split(
    features: &Matrix,
    spec: &AutoencoderSpec,
    config: &TrainConfig,
    fit_idx: &[usize],
    monitor_idx: &[usize],
) -> Result<(DenseNetwork, DenseNetwork, TrainLog)> {
    spec.validate()?;
    if features.cols() != spec.input_dim {
        return Err(ReadoutError::DimensionMismatch {
            expected: spec.input_dim,
            got: features.cols(),
        });
    }
    check_unit_range(features)?;
    let mut layers = spec.encoder_layers();
    layers.extend(spec.decoder_layers());
    let net = DenseNetwork::glorot(&layers, &mut derived_rng(config.seed, &[stream::INIT, 0]))?;
    let fit = features.select_rows(fit_idx);
    let mon = features.select_rows(monitor_idx);
    let (net, log) = train(
        net,
        Samples::new(&fit, Targets::Dense(&fit)),
        Samples::new(&mon, Targets::Dense(&mon)),
        LossKind::Mse,
        MonitorMetric::Loss,
        config,
    )?;
    let (encoder, decoder) = net.split_at(4)?;
    Ok((encoder, decoder, log))
}

/// Train the autoencoder on already scaled features (labels are not used).
pub fn pretrain_autoencoder(
    features: &Matrix,
    spec: &AutoencoderSpec,
    config: &TrainConfig,
    monitor: MonitorSource,
) -> Result<(DenseNetwork, DenseNetwork, TrainLog)> {
    let (fit_idx, mon_idx) = monitor.split(features.rows(), config.seed)?;
    pretrain_on_split(features, spec, config, &fit_idx, &mon_idx)
}

pub fn encode(encoder: &DenseNetwork, x: &[f64]) -> Result<Vec<f64>> {
    encoder.predict(x)
}

pub fn encode_batch(encoder: &DenseNetwork, x: &Matrix) -> Result<Matrix> {
    encoder.forward_batch(x)
}

pub fn decode(decoder: &DenseNetwork, h: &[f64]) -> Result<Vec<f64>> {
    decoder.predict(h)
}

pub fn decode_batch(decoder: &DenseNetwork, h: &Matrix) -> Result<Matrix> {
    decoder.forward_batch(h)
}

/// Reconstructions obtained by overwriting one latent component.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentProbe {
    pub latent: Vec<f64>,
    pub reconstruction: Vec<f64>,
    pub values: Vec<f64>,
    pub family: Vec<Vec<f64>>,
}

pub fn latent_probe(
    encoder: &DenseNetwork,
    decoder: &DenseNetwork,
    x: &[f64],
    component: usize,
    values: &[f64],
) -> Result<LatentProbe> {
    let latent = encode(encoder, x)?;
    if component >= latent.len() {
        return Err(ReadoutError::InvalidArgument(format!(
            "latent component {component} out of range (latent size {})",
            latent.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(ReadoutError::InvalidArgument(format!("probe value {v} outside [-1, 1]")));
    }
    let reconstruction = decode(decoder, &latent)?;
    let family = values
        .iter()
        .map(|&v| {
            let mut h = latent.clone();
            h[component] = v;
            decode(decoder, &h)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LatentProbe {
        latent,
        reconstruction,
        values: values.to_vec(),
        family,
    })
}
