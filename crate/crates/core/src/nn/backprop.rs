use crate::error::{ReadoutError, Result};
use crate::matrix::{gemm, Matrix};

use super::loss::{class_cross_entropy, mse_unchecked, LossKind};
use super::network::{Activation, DenseNetwork};

/// Training targets for a batch of inputs.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    /// One target row per input row (regression / reconstruction).
    Dense(&'a Matrix),
    /// One class index per input row.
    Classes(&'a [usize]),
}

impl Targets<'_> {
    pub fn len(&self) -> usize {
        match self {
            Targets::Dense(m) => m.rows(),
            Targets::Classes(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Gradient blocks with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn slices(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

pub(crate) fn check_batch(net: &DenseNetwork, inputs: &Matrix, targets: Targets<'_>, loss: LossKind) -> Result<()> {
    if inputs.rows() == 0 {
        return Err(ReadoutError::InvalidArgument("empty batch".into()));
    }
    if inputs.cols() != net.input_dim() {
        return Err(ReadoutError::DimensionMismatch {
            expected: net.input_dim(),
            got: inputs.cols(),
        });
    }
    if targets.len() != inputs.rows() {
        return Err(ReadoutError::DimensionMismatch {
            expected: inputs.rows(),
            got: targets.len(),
        });
    }
    match (loss, targets) {
        (LossKind::Mse, Targets::Dense(t)) if t.cols() != net.output_dim() => Err(ReadoutError::DimensionMismatch {
            expected: net.output_dim(),
            got: t.cols(),
        }),
        (LossKind::Mse, Targets::Classes(c)) | (LossKind::CrossEntropy, Targets::Classes(c)) => {
            match c.iter().find(|&&k| k >= net.output_dim()) {
                Some(&k) => Err(ReadoutError::InvalidArgument(format!(
                    "class {k} out of range for {} outputs",
                    net.output_dim()
                ))),
                None if loss == LossKind::CrossEntropy && net.output_activation() != Activation::Softmax => Err(
                    ReadoutError::InvalidArgument("cross-entropy needs a softmax output layer".into()),
                ),
                None => Ok(()),
            }
        }
        (LossKind::CrossEntropy, Targets::Dense(_)) => Err(ReadoutError::InvalidArgument(
            "cross-entropy needs class targets".into(),
        )),
        _ => Ok(()),
    }
}

/// Mean loss over a batch given the network outputs.
pub(crate) fn batch_loss(outputs: &Matrix, targets: Targets<'_>, loss: LossKind) -> f64 {
    let b = outputs.rows();
    let total: f64 = match (loss, targets) {
        (LossKind::Mse, Targets::Dense(t)) => (0..b).map(|r| mse_unchecked(t.row(r), outputs.row(r))).sum(),
        (LossKind::Mse, Targets::Classes(c)) => (0..b)
            .map(|r| {
                let row = outputs.row(r);
                row.iter()
                    .enumerate()
                    .map(|(j, &y)| {
                        let t = if j == c[r] { 1.0 } else { 0.0 };
                        (y - t) * (y - t)
                    })
                    .sum::<f64>()
                    / row.len() as f64
            })
            .sum(),
        (LossKind::CrossEntropy, Targets::Classes(c)) => (0..b).map(|r| class_cross_entropy(outputs.row(r), c[r])).sum(),
        (LossKind::CrossEntropy, Targets::Dense(_)) => unreachable!("rejected by check_batch"),
    };
    total / b as f64
}

/// Mean batch loss and its exact gradient with respect to every parameter.
pub fn backprop(net: &DenseNetwork, inputs: &Matrix, targets: Targets<'_>, loss: LossKind) -> Result<(f64, Gradients)> {
    check_batch(net, inputs, targets, loss)?;
    let acts = net.forward_cached(inputs)?;
    let b = inputs.rows();
    let output = &acts[acts.len() - 1];
    let value = batch_loss(output, targets, loss);
    let out_dim = net.output_dim();

    // dL/d(output) for mse, or dL/dz directly for fused softmax + cross-entropy.
    let mut delta = Matrix::zeros(b, out_dim);
    let fused = loss == LossKind::CrossEntropy;
    let scale = match loss {
        LossKind::Mse => 2.0 / (b * out_dim) as f64,
        LossKind::CrossEntropy => 1.0 / b as f64,
    };
    for r in 0..b {
        let y = output.row(r);
        let d = delta.row_mut(r);
        match targets {
            Targets::Dense(t) => {
                for j in 0..out_dim {
                    d[j] = scale * (y[j] - t.row(r)[j]);
                }
            }
            Targets::Classes(c) => {
                for j in 0..out_dim {
                    let t = if j == c[r] { 1.0 } else { 0.0 };
                    d[j] = scale * (y[j] - t);
                }
            }
        }
    }

    let layers = net.layers();
    let mut gw = vec![Vec::new(); layers.len()];
    let mut gb = vec![Vec::new(); layers.len()];
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let (inp, out) = (layer.spec.in_dim, layer.spec.out_dim);
        if !(fused && l + 1 == layers.len()) {
            activation_backward(layer.spec.activation, &acts[l + 1], &mut delta);
        }
        let a_prev = &acts[l];
        let mut w = vec![0.0; out * inp];
        gemm(
            out,
            b,
            inp,
            1.0,
            (delta.as_slice(), 1, out as isize),
            (a_prev.as_slice(), inp as isize, 1),
            0.0,
            (&mut w, inp as isize, 1),
        );
        let mut bias = vec![0.0; out];
        for r in 0..b {
            for (acc, d) in bias.iter_mut().zip(delta.row(r)) {
                *acc += d;
            }
        }
        gw[l] = w;
        gb[l] = bias;
        if l > 0 {
            let mut prev = Matrix::zeros(b, inp);
            gemm(
                b,
                out,
                inp,
                1.0,
                (delta.as_slice(), out as isize, 1),
                (&layer.weights, inp as isize, 1),
                0.0,
                (prev.as_mut_slice(), inp as isize, 1),
            );
            delta = prev;
        }
    }
    Ok((
        value,
        Gradients {
            weights: gw,
            biases: gb,
        },
    ))
}

/// Turn dL/da into dL/dz in place, given the activations `a`.
fn activation_backward(act: Activation, a: &Matrix, g: &mut Matrix) {
    for r in 0..a.rows() {
        let ar = a.row(r);
        let gr = g.row_mut(r);
        match act {
            Activation::Linear => {}
            Activation::Sigmoid => {
                for (gv, &av) in gr.iter_mut().zip(ar) {
                    *gv *= av * (1.0 - av);
                }
            }
            Activation::Tanh => {
                for (gv, &av) in gr.iter_mut().zip(ar) {
                    *gv *= 1.0 - av * av;
                }
            }
            Activation::Softmax => {
                let dot: f64 = gr.iter().zip(ar).map(|(g, a)| g * a).sum();
                for (gv, &av) in gr.iter_mut().zip(ar) {
                    *gv = av * (*gv - dot);
                }
            }
        }
    }
}
