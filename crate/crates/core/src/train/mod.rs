//! Minibatch training of a small MLP against the conformal losses.

mod adam;
mod mlp;

pub use adam::Adam;
pub use mlp::{ForwardCache, Mlp, MlpSpec};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{
    contr_loss, cross_entropy, quantile_loss, r2ccp_loss, ContrConfig, LossEvaluation,
};
use crate::matrix::Matrix;
use crate::regression::BinGrid;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            epochs: 10,
            batch_size: 32,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be nonnegative, got {}",
                self.lr
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Quantile {
        quantiles: Vec<f64>,
    },
    R2ccp {
        grid: BinGrid,
        p_exponent: f64,
        tau: f64,
    },
    CrossEntropy,
    /// Conformal training size loss plus `ce_weight` times cross-entropy.
    Contr {
        config: ContrConfig,
        ce_weight: f64,
    },
}

#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Real(&'a [f64]),
    Labels(&'a [usize]),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Real(t) => t.len(),
            Targets::Labels(t) => t.len(),
        }
    }
}

impl Objective {
    fn min_batch(&self) -> usize {
        match self {
            Objective::Contr { .. } => 4,
            _ => 1,
        }
    }

    pub fn evaluate(&self, outputs: &Matrix, targets: Targets<'_>) -> Result<LossEvaluation> {
        match (self, targets) {
            (Objective::Quantile { quantiles }, Targets::Real(y)) => {
                quantile_loss(outputs, y, quantiles)
            }
            (
                Objective::R2ccp {
                    grid,
                    p_exponent,
                    tau,
                },
                Targets::Real(y),
            ) => r2ccp_loss(outputs, y, grid, *p_exponent, *tau),
            (Objective::CrossEntropy, Targets::Labels(y)) => cross_entropy(outputs, y),
            (Objective::Contr { config, ce_weight }, Targets::Labels(y)) => {
                let size = contr_loss(outputs, y, config)?;
                if *ce_weight == 0.0 {
                    Ok(size)
                } else {
                    Ok(size.add_scaled(&cross_entropy(outputs, y)?, *ce_weight))
                }
            }
            _ => Err(Error::Config(
                "objective does not match the target type".into(),
            )),
        }
    }
}

fn gather<'a>(
    targets: Targets<'a>,
    idx: &[usize],
    real: &'a mut Vec<f64>,
    labels: &'a mut Vec<usize>,
) -> Targets<'a> {
    match targets {
        Targets::Real(t) => {
            real.clear();
            real.extend(idx.iter().map(|&i| t[i]));
            Targets::Real(real)
        }
        Targets::Labels(t) => {
            labels.clear();
            labels.extend(idx.iter().map(|&i| t[i]));
            Targets::Labels(labels)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Mlp,
    /// Mean training loss per epoch, weighted by batch size.
    pub loss_curve: Vec<f64>,
}

/// Splits a shuffled index list into batches, folding a short tail into the
/// previous batch when it is below `min_batch`.
fn batches(order: &[usize], batch_size: usize, min_batch: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(batch_size).collect();
    if out.len() > 1 && out[out.len() - 1].len() < min_batch {
        out.pop();
        let start = (out.len() - 1) * batch_size;
        let last = out.len() - 1;
        out[last] = &order[start..];
    }
    out
}

pub fn train(
    spec: &MlpSpec,
    x: &Matrix,
    targets: Targets<'_>,
    objective: &Objective,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if x.rows() != targets.len() {
        return Err(Error::input(format!(
            "{} input row(s) for {} target(s)",
            x.rows(),
            targets.len()
        )));
    }
    if x.rows() < objective.min_batch() {
        return Err(Error::input("not enough training data for the objective"));
    }
    let mut model = Mlp::new(spec)?;
    let mut adam = Adam::new(
        model.params().len(),
        config.lr,
        config.adam_betas,
        config.adam_eps,
    );
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let (mut real_buf, mut label_buf) = (Vec::new(), Vec::new());

    for epoch in 0..config.epochs {
        order.shuffle(&mut stream_rng(config.seed, epoch as u64));
        let mut total = 0.0;
        for idx in batches(&order, config.batch_size, objective.min_batch()) {
            let xb = x.select_rows(idx);
            let tb = gather(targets, idx, &mut real_buf, &mut label_buf);
            let (out, cache) = model.forward_cached(&xb)?;
            let loss = objective.evaluate(&out, tb)?;
            if !loss.value.is_finite() || loss.grad.as_slice().iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    reason: format!("non-finite loss {}", loss.value),
                });
            }
            total += loss.value * idx.len() as f64;
            let grads = model.backward(&cache, &loss.grad);
            adam.step(model.params_mut(), &grads);
        }
        loss_curve.push(total / x.rows() as f64);
    }
    Ok(TrainOutcome { model, loss_curve })
}
