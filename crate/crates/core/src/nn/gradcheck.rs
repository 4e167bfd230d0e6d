use crate::error::Result;
use crate::matrix::Matrix;

use super::backprop::{backprop, check_batch, Targets};
use super::loss::{class_cross_entropy, mse_unchecked, LossKind};
use super::network::{Activation, DenseNetwork};

/// Worst relative deviation `|a - n| / max(|a|, |n|, 1e-6)` between the
/// backprop gradient `a` and the central difference `n`, over all parameters.
///
/// The numerical side uses a plain loop forward pass that shares no code
/// with the batched one.
pub fn grad_check(net: &DenseNetwork, inputs: &Matrix, targets: Targets<'_>, loss: LossKind, epsilon: f64) -> Result<f64> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    check_batch(net, inputs, targets, loss)?;
    let (_, grads) = backprop(net, inputs, targets, loss)?;
    let analytic = grads.flat();

    let mut probe = net.clone();
    let mut worst = 0.0f64;
    let mut idx = 0;
    let n_blocks = probe.param_slices().len();
    for block in 0..n_blocks {
        let len = probe.param_slices()[block].len();
        for i in 0..len {
            let orig = probe.param_slices()[block][i];
            probe.param_slices_mut()[block][i] = orig + epsilon;
            let plus = naive_loss(&probe, inputs, targets, loss);
            probe.param_slices_mut()[block][i] = orig - epsilon;
            let minus = naive_loss(&probe, inputs, targets, loss);
            probe.param_slices_mut()[block][i] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            idx += 1;
        }
    }
    Ok(worst)
}

fn naive_forward(net: &DenseNetwork, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for layer in net.layers() {
        let inp = layer.spec.in_dim;
        let mut z: Vec<f64> = (0..layer.spec.out_dim)
            .map(|o| {
                let w = &layer.weights[o * inp..(o + 1) * inp];
                layer.biases[o] + w.iter().zip(&a).map(|(w, a)| w * a).sum::<f64>()
            })
            .collect();
        match layer.spec.activation {
            Activation::Linear => {}
            Activation::Sigmoid => z.iter_mut().for_each(|v| *v = 1.0 / (1.0 + (-*v).exp())),
            Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Softmax => {
                let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = z.iter().map(|v| (v - m).exp()).sum();
                z.iter_mut().for_each(|v| *v = (*v - m).exp() / s);
            }
        }
        a = z;
    }
    a
}

fn naive_loss(net: &DenseNetwork, inputs: &Matrix, targets: Targets<'_>, loss: LossKind) -> f64 {
    let b = inputs.rows();
    let mut total = 0.0;
    for r in 0..b {
        let y = naive_forward(net, inputs.row(r));
        total += match (loss, targets) {
            (LossKind::Mse, Targets::Dense(t)) => mse_unchecked(t.row(r), &y),
            (LossKind::Mse, Targets::Classes(c)) => {
                let mut onehot = vec![0.0; y.len()];
                onehot[c[r]] = 1.0;
                mse_unchecked(&onehot, &y)
            }
            (LossKind::CrossEntropy, Targets::Classes(c)) => class_cross_entropy(&y, c[r]),
            (LossKind::CrossEntropy, Targets::Dense(_)) => unreachable!("rejected by check_batch"),
        };
    }
    total / b as f64
}
