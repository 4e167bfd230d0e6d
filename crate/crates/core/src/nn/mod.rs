//! Dense feed-forward networks trained with backpropagation and Adam.

mod adam;
mod backprop;
mod gradcheck;
mod loss;
mod network;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use backprop::{backprop, Gradients, Targets};
pub use gradcheck::grad_check;
pub use loss::{cross_entropy_loss, mse_loss, LossKind, PROB_FLOOR};
pub use network::{argmax, Activation, DenseNetwork, Layer, LayerSpec};
pub use train::{
    train, EarlyStopping, MonitorMetric, MonitorSource, Samples, StopDecision, TrainConfig,
    TrainLog,
};
