//! The three classifiers: a Gaussian mixture on full-window I/Q points, a
//! plain feed-forward network on the flattened trajectory, and PreTraNN
//! (autoencoder pre-training followed by a classifier head on the latent
//! representation).

mod autoencoder;
mod ffnn;
mod gmm;
mod io;
mod pretrann;

pub use autoencoder::{
    decode, decode_batch, encode, encode_batch, latent_probe, pretrain_autoencoder, AutoencoderSpec, LatentProbe,
};
pub use ffnn::{train_ffnn, ClassifierHeadSpec, FfnnConfig, FfnnModel};
pub use gmm::{gmm_assign_labels, gmm_fit, gmm_predict, GmmComponent, GmmConfig, GmmModel};
pub use io::{load_model, save_model, Model, MODEL_KIND, MODEL_VERSION};
pub use pretrann::{train_pretrann, PreTraNNConfig, PreTraNNModel};

use crate::demod::Scaler;
use crate::error::{ReadoutError, Result};
use crate::matrix::Matrix;
use crate::nn::{argmax, DenseNetwork};

/// Class probabilities for a batch, with the argmax label of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub labels: Vec<usize>,
    pub probabilities: Matrix,
}

pub(crate) fn scale_matrix(scaler: &Scaler, x: &Matrix) -> Result<Matrix> {
    let mut out = x.clone();
    for r in 0..out.rows() {
        scaler.apply_in_place(out.row_mut(r))?;
    }
    Ok(out)
}

pub(crate) fn check_labels(x: &Matrix, labels: &[usize], n_classes: usize) -> Result<()> {
    if n_classes < 2 {
        return Err(ReadoutError::InvalidArgument(format!("need at least 2 classes, got {n_classes}")));
    }
    if labels.len() != x.rows() {
        return Err(ReadoutError::DimensionMismatch {
            expected: x.rows(),
            got: labels.len(),
        });
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(ReadoutError::InvalidArgument(format!("label {l} out of range for {n_classes} classes")));
    }
    Ok(())
}

pub(crate) fn predictions(net: &DenseNetwork, x: &Matrix) -> Result<Predictions> {
    let probabilities = net.forward_batch(x)?;
    let labels = probabilities.iter_rows().map(argmax).collect();
    Ok(Predictions { labels, probabilities })
}

/// `ceil` that ignores floating-point noise just above an integer.
pub(crate) fn ceil_size(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}
