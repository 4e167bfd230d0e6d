use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ReadoutError, Result};
use crate::matrix::{gemm, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Softmax,
    Linear,
}

impl Activation {
    /// Apply the activation to one row of pre-activations in place.
    pub(crate) fn apply_row(self, z: &mut [f64]) {
        match self {
            Activation::Sigmoid => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Linear => {}
            Activation::Softmax => {
                let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in z.iter_mut() {
                    *v = (*v - m).exp();
                    sum += *v;
                }
                z.iter_mut().for_each(|v| *v /= sum);
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Softmax => "softmax",
            Activation::Linear => "linear",
        })
    }
}

impl FromStr for Activation {
    type Err = ReadoutError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "softmax" => Ok(Activation::Softmax),
            "linear" => Ok(Activation::Linear),
            other => Err(ReadoutError::InvalidArgument(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

/// One affine layer. `weights` is `out_dim x in_dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<Layer>,
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(ReadoutError::InvalidArgument("a network needs at least one layer".into()));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(ReadoutError::InvalidArgument(format!("layer {i} has a zero dimension")));
        }
        if s.activation == Activation::Softmax && i + 1 != specs.len() {
            return Err(ReadoutError::InvalidArgument(format!(
                "softmax is only allowed on the final layer (found on layer {i})"
            )));
        }
        if i > 0 && specs[i - 1].out_dim != s.in_dim {
            return Err(ReadoutError::InvalidArgument(format!(
                "layer {} outputs {} values but layer {i} expects {}",
                i - 1,
                specs[i - 1].out_dim,
                s.in_dim
            )));
        }
    }
    Ok(())
}

impl DenseNetwork {
    pub fn zeros(specs: &[LayerSpec]) -> Result<Self> {
        validate_specs(specs)?;
        Ok(DenseNetwork {
            layers: specs
                .iter()
                .map(|&spec| Layer {
                    spec,
                    weights: vec![0.0; spec.in_dim * spec.out_dim],
                    biases: vec![0.0; spec.out_dim],
                })
                .collect(),
        })
    }

    /// Glorot-uniform weights on `±sqrt(6 / (in + out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(specs)?;
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.spec.in_dim + layer.spec.out_dim) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        validate_specs(&specs)?;
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.spec.in_dim * l.spec.out_dim || l.biases.len() != l.spec.out_dim {
                return Err(ReadoutError::InvalidArgument(format!(
                    "layer {i} parameter block does not match its spec"
                )));
            }
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(ReadoutError::InvalidArgument(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(DenseNetwork { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].spec.activation
    }

    /// Layer widths starting with the input: `[in, out_1, out_2, ...]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.spec.out_dim))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.spec.param_count()).sum()
    }

    /// Parameter blocks in canonical order: weights then biases, layer by layer.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
            .collect()
    }

    /// Split into the first `n` layers and the rest.
    pub fn split_at(self, n: usize) -> Result<(DenseNetwork, DenseNetwork)> {
        if n == 0 || n >= self.layers.len() {
            return Err(ReadoutError::InvalidArgument(format!(
                "cannot split a {}-layer network at {n}",
                self.layers.len()
            )));
        }
        let mut front = self.layers;
        let back = front.split_off(n);
        Ok((DenseNetwork::from_layers(front)?, DenseNetwork::from_layers(back)?))
    }

    /// `self` followed by `next`.
    pub fn chain(&self, next: &DenseNetwork) -> Result<DenseNetwork> {
        let mut layers = self.layers.clone();
        layers.extend(next.layers.iter().cloned());
        DenseNetwork::from_layers(layers)
    }

    /// Single-sample forward pass. Returns the output and the activation of
    /// every layer (the last entry equals the output).
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let input = Matrix::from_vec(1, x.len(), x.to_vec())?;
        let acts = self.forward_cached(&input)?;
        let per_layer: Vec<Vec<f64>> = acts.into_iter().skip(1).map(Matrix::into_vec).collect();
        Ok((per_layer[per_layer.len() - 1].clone(), per_layer))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.0)
    }

    /// Forward pass over a batch (one sample per row).
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut a = x.clone();
        for layer in &self.layers {
            a = layer_forward(layer, &a);
        }
        Ok(a)
    }

    /// Forward pass keeping every activation, input included.
    pub(crate) fn forward_cached(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for layer in &self.layers {
            let next = layer_forward(layer, &acts[acts.len() - 1]);
            acts.push(next);
        }
        Ok(acts)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(ReadoutError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        Ok(())
    }
}

fn layer_forward(layer: &Layer, a: &Matrix) -> Matrix {
    let (inp, out) = (layer.spec.in_dim, layer.spec.out_dim);
    let b = a.rows();
    let mut z = Matrix::zeros(b, out);
    for r in 0..b {
        z.row_mut(r).copy_from_slice(&layer.biases);
    }
    gemm(
        b,
        inp,
        out,
        1.0,
        (a.as_slice(), inp as isize, 1),
        (&layer.weights, 1, inp as isize),
        1.0,
        (z.as_mut_slice(), out as isize, 1),
    );
    for r in 0..b {
        layer.spec.activation.apply_row(z.row_mut(r));
    }
    z
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    #[test]
    fn zero_tanh_net_outputs_zero() {
        let specs = [
            LayerSpec::new(4, 3, Activation::Tanh),
            LayerSpec::new(3, 2, Activation::Tanh),
        ];
        let net = DenseNetwork::zeros(&specs).unwrap();
        let (out, acts) = net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
        assert_eq!(acts.len(), 2);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let net = DenseNetwork::zeros(&[LayerSpec::new(2, 3, Activation::Softmax)]).unwrap();
        let out = net.predict(&[5.0, -1.0]).unwrap();
        for p in out {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_linear_layer() {
        let layer = Layer {
            spec: LayerSpec::new(2, 2, Activation::Linear),
            weights: vec![1.0, 0.0, 0.0, 1.0],
            biases: vec![0.0, 0.0],
        };
        let net = DenseNetwork::from_layers(vec![layer]).unwrap();
        assert_eq!(net.predict(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn rejects_bad_architectures() {
        assert!(DenseNetwork::zeros(&[]).is_err());
        assert!(DenseNetwork::zeros(&[
            LayerSpec::new(2, 3, Activation::Softmax),
            LayerSpec::new(3, 2, Activation::Tanh),
        ])
        .is_err());
        assert!(DenseNetwork::zeros(&[
            LayerSpec::new(2, 3, Activation::Tanh),
            LayerSpec::new(4, 2, Activation::Tanh),
        ])
        .is_err());
        let net = DenseNetwork::zeros(&[LayerSpec::new(2, 3, Activation::Tanh)]).unwrap();
        assert!(matches!(
            net.predict(&[1.0]),
            Err(ReadoutError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn batch_and_single_forward_agree() {
        let specs = [
            LayerSpec::new(5, 4, Activation::Sigmoid),
            LayerSpec::new(4, 3, Activation::Softmax),
        ];
        let net = DenseNetwork::glorot(&specs, &mut seeded_rng(1)).unwrap();
        let x = Matrix::from_vec(2, 5, (0..10).map(|i| i as f64 * 0.1).collect()).unwrap();
        let batch = net.forward_batch(&x).unwrap();
        for r in 0..2 {
            let single = net.predict(x.row(r)).unwrap();
            for (a, b) in single.iter().zip(batch.row(r)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn glorot_respects_limits() {
        let specs = [LayerSpec::new(10, 20, Activation::Tanh)];
        let net = DenseNetwork::glorot(&specs, &mut seeded_rng(7)).unwrap();
        let lim = (6.0f64 / 30.0).sqrt();
        assert!(net.layers()[0].weights.iter().all(|w| w.abs() <= lim));
        assert!(net.layers()[0].biases.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn split_and_chain_are_inverse() {
        let specs = [
            LayerSpec::new(3, 2, Activation::Tanh),
            LayerSpec::new(2, 3, Activation::Sigmoid),
        ];
        let net = DenseNetwork::glorot(&specs, &mut seeded_rng(2)).unwrap();
        let (a, b) = net.clone().split_at(1).unwrap();
        assert_eq!(a.chain(&b).unwrap(), net);
        assert_eq!(net.widths(), vec![3, 2, 3]);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let mut z = [1000.0, 999.0, -1000.0];
        Activation::Softmax.apply_row(&mut z);
        assert!(z.iter().all(|p| p.is_finite()));
        assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
