use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::seeded_rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub seed: u64,
}

impl MlpSpec {
    /// Two ReLU hidden layers of width 64.
    pub fn new(input_dim: usize, output_dim: usize, seed: u64) -> Self {
        Self {
            input_dim,
            hidden: vec![64, 64],
            output_dim,
            seed,
        }
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend_from_slice(&self.hidden);
        w.push(self.output_dim);
        w
    }
}

/// Fully connected ReLU network with a linear output layer. Parameters live in
/// one flat vector, layer by layer: weights (`out × in`, row-major) then biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<f64>,
}

/// Activations saved by the forward pass for backpropagation.
pub struct ForwardCache {
    /// Input to each layer; entry 0 is the network input.
    inputs: Vec<Matrix>,
}

impl Mlp {
    /// Uniform init in ±1/√fan_in for weights and biases.
    pub fn new(spec: &MlpSpec) -> Result<Self> {
        let widths = spec.widths();
        if widths.contains(&0) {
            return Err(Error::Config("every layer width must be at least 1".into()));
        }
        let mut rng = seeded_rng(spec.seed);
        let mut params = Vec::new();
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_out * (fan_in + 1) {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Ok(Self { widths, params })
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        self.widths[self.widths.len() - 1]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.widths.windows(2).map(move |pair| {
            let start = offset;
            offset += pair[1] * (pair[0] + 1);
            (start, pair[0], pair[1])
        })
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.input_dim() {
            return Err(Error::input(format!(
                "input has {} feature(s), network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let n_layers = self.widths.len() - 1;
        let mut inputs = vec![x.clone()];
        let mut h = x.clone();
        for (l, (start, fan_in, fan_out)) in self.layers().enumerate() {
            let w = &self.params[start..start + fan_out * fan_in];
            let b = &self.params[start + fan_out * fan_in..start + fan_out * (fan_in + 1)];
            let mut out = Matrix::zeros(h.rows(), fan_out);
            for i in 0..h.rows() {
                let row = h.row(i);
                for (o, v) in out.row_mut(i).iter_mut().enumerate() {
                    let dot: f64 = w[o * fan_in..(o + 1) * fan_in]
                        .iter()
                        .zip(row)
                        .map(|(a, b)| a * b)
                        .sum();
                    *v = dot + b[o];
                    if l + 1 < n_layers {
                        *v = v.max(0.0);
                    }
                }
            }
            if l + 1 < n_layers {
                inputs.push(out.clone());
            }
            h = out;
        }
        Ok((h, ForwardCache { inputs }))
    }

    /// Gradient of the loss with respect to every parameter, given
    /// `∂loss/∂outputs` for the batch that produced `cache`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Matrix) -> Vec<f64> {
        let mut grads = vec![0.0; self.params.len()];
        let layers: Vec<_> = self.layers().collect();
        let mut delta = grad_out.clone();
        for (l, &(start, fan_in, fan_out)) in layers.iter().enumerate().rev() {
            let input = &cache.inputs[l];
            let w = &self.params[start..start + fan_out * fan_in];
            let (gw, rest) =
                grads[start..start + fan_out * (fan_in + 1)].split_at_mut(fan_out * fan_in);
            let gb = rest;
            for i in 0..input.rows() {
                let d = delta.row(i);
                let a = input.row(i);
                for o in 0..fan_out {
                    if d[o] == 0.0 {
                        continue;
                    }
                    gb[o] += d[o];
                    for (g, x) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(a) {
                        *g += d[o] * x;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let mut next = Matrix::zeros(input.rows(), fan_in);
            for i in 0..input.rows() {
                let d = delta.row(i).to_vec();
                let a = input.row(i).to_vec();
                for (j, v) in next.row_mut(i).iter_mut().enumerate() {
                    // ReLU derivative: the stored input is the post-activation value.
                    if a[j] > 0.0 {
                        *v = (0..fan_out).map(|o| d[o] * w[o * fan_in + j]).sum();
                    }
                }
            }
            delta = next;
        }
        grads
    }
}
