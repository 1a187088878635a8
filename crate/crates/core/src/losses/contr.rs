//! Conformal training size loss.
//!
//! The batch is split into a pseudo-calibration head and a pseudo-test tail.
//! The conformal order statistic of the head's true-label scores acts as the
//! threshold, and each tail label contributes a sigmoid-smoothed membership.
//! The loss is the mean smoothed set size over the tail. Gradients pass
//! through the selected order statistic only.

use serde::{Deserialize, Serialize};

use super::{check_rows, log_softmax, softmax_backward, LossEvaluation};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::quantile::{conformal_rank, Alpha};
use crate::scores::{score_and_grad, ScoreConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrConfig {
    /// Scores are always evaluated with `u = 1`.
    pub score: ScoreConfig,
    pub alpha: Alpha,
    pub sigmoid_temp: f64,
    pub split_fraction: f64,
}

impl ContrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigmoid_temp.is_finite() && self.sigmoid_temp > 0.0) {
            return Err(Error::Config(format!(
                "sigmoid temperature must be positive, got {}",
                self.sigmoid_temp
            )));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split fraction must lie in (0, 1), got {}",
                self.split_fraction
            )));
        }
        Ok(())
    }

    /// Number of leading items used as pseudo-calibration data.
    pub fn calibration_count(&self, n: usize) -> usize {
        ((self.split_fraction * n as f64).ceil() as usize).clamp(1, n - 1)
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

pub fn contr_loss(
    logits: &Matrix,
    labels: &[usize],
    config: &ContrConfig,
) -> Result<LossEvaluation> {
    check_rows(logits, labels.len())?;
    config.validate()?;
    let n = labels.len();
    if n < 4 {
        return Err(Error::input(format!(
            "conformal training needs at least 4 items, got {n}"
        )));
    }
    let k = logits.cols();
    if let Some(bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::input(format!(
            "label {bad} outside universe of {k} classes"
        )));
    }
    config.score.validate(k)?;

    let probs: Vec<Vec<f64>> = logits
        .iter_rows()
        .map(|z| log_softmax(z).into_iter().map(f64::exp).collect())
        .collect();
    let m = config.calibration_count(n);

    let cal: Vec<(f64, Vec<f64>)> = (0..m)
        .map(|i| score_and_grad(&config.score, &probs[i], labels[i]))
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| cal[a].0.total_cmp(&cal[b].0));
    // Too few pseudo-calibration items for the level: fall back to the maximum.
    let rank = conformal_rank(m, config.alpha).unwrap_or(m);
    let selected = order[rank - 1];
    let q = cal[selected].0;

    let tests = (n - m) as f64;
    let t = config.sigmoid_temp;
    let mut grad_probs = vec![vec![0.0; k]; n];
    let mut value = 0.0;
    let mut dq = 0.0;
    for i in m..n {
        for y in 0..k {
            let (s, ds) = score_and_grad(&config.score, &probs[i], y);
            let sig = sigmoid((q - s) / t);
            value += sig;
            let slope = sig * (1.0 - sig) / t / tests;
            dq += slope;
            for (g, d) in grad_probs[i].iter_mut().zip(&ds) {
                *g -= slope * d;
            }
        }
    }
    for (g, d) in grad_probs[selected].iter_mut().zip(&cal[selected].1) {
        *g += dq * d;
    }

    let mut grad = Matrix::zeros(n, k);
    for i in 0..n {
        grad.row_mut(i)
            .copy_from_slice(&softmax_backward(&probs[i], &grad_probs[i]));
    }
    Ok(LossEvaluation {
        value: value / tests,
        grad,
    })
}
