//! Training losses with analytic gradients with respect to the model outputs.

mod contr;
mod r2ccp;

pub use contr::{contr_loss, ContrConfig};
pub use r2ccp::r2ccp_loss;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Loss value and `∂loss/∂outputs`, shaped like the outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEvaluation {
    pub value: f64,
    pub grad: Matrix,
}

impl LossEvaluation {
    /// `self + weight · other`.
    pub fn add_scaled(mut self, other: &LossEvaluation, weight: f64) -> LossEvaluation {
        self.value += weight * other.value;
        for (g, o) in self
            .grad
            .as_mut_slice()
            .iter_mut()
            .zip(other.grad.as_slice())
        {
            *g += weight * o;
        }
        self
    }
}

fn check_rows(outputs: &Matrix, n: usize) -> Result<()> {
    if outputs.rows() != n {
        return Err(Error::input(format!(
            "{} output row(s) for {n} target(s)",
            outputs.rows()
        )));
    }
    if n == 0 {
        return Err(Error::input("empty batch"));
    }
    Ok(())
}

/// Pinball loss averaged over items and quantile heads. Column `j` of
/// `predictions` is the head for `quantiles[j]`. The subgradient at a zero
/// residual is taken as 0.
pub fn quantile_loss(
    predictions: &Matrix,
    targets: &[f64],
    quantiles: &[f64],
) -> Result<LossEvaluation> {
    check_rows(predictions, targets.len())?;
    if quantiles.is_empty()
        || quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0))
        || quantiles.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::input(
            "quantile levels must be strictly increasing values in (0, 1)",
        ));
    }
    if predictions.cols() != quantiles.len() {
        return Err(Error::input(format!(
            "{} prediction head(s) for {} quantile level(s)",
            predictions.cols(),
            quantiles.len()
        )));
    }
    let scale = 1.0 / (targets.len() * quantiles.len()) as f64;
    let mut grad = Matrix::zeros(predictions.rows(), predictions.cols());
    let mut value = 0.0;
    for (i, &y) in targets.iter().enumerate() {
        for (j, &q) in quantiles.iter().enumerate() {
            let e = y - predictions.get(i, j);
            value += (q * e).max((q - 1.0) * e);
            let slope = if e > 0.0 {
                -q
            } else if e < 0.0 {
                1.0 - q
            } else {
                0.0
            };
            grad.set(i, j, slope * scale);
        }
    }
    Ok(LossEvaluation {
        value: value * scale,
        grad,
    })
}

/// Stable log-softmax of one row.
pub(crate) fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// Backpropagates `∂L/∂p` through `p = softmax(z)`.
pub(crate) fn softmax_backward(p: &[f64], grad_p: &[f64]) -> Vec<f64> {
    let inner: f64 = p.iter().zip(grad_p).map(|(a, b)| a * b).sum();
    p.iter()
        .zip(grad_p)
        .map(|(pk, gk)| pk * (gk - inner))
        .collect()
}

/// Mean negative log-likelihood of the labels under `softmax(logits)`.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<LossEvaluation> {
    check_rows(logits, labels.len())?;
    let n = labels.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut value = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= logits.cols() {
            return Err(Error::input(format!(
                "label {y} outside universe of {} classes",
                logits.cols()
            )));
        }
        let logp = log_softmax(logits.row(i));
        value -= logp[y];
        for (k, g) in grad.row_mut(i).iter_mut().enumerate() {
            *g = (logp[k].exp() - f64::from(u8::from(k == y))) / n;
        }
    }
    Ok(LossEvaluation {
        value: value / n,
        grad,
    })
}
