//! Synthetic data: a nonlinear regression series with ARMA(1,1) noise, and
//! Gaussian-noise classification logits.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stream_rng;

pub const NUM_FEATURES: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmaConfig {
    pub phi: f64,
    pub theta: f64,
    pub innovation_std: f64,
    pub seed: u64,
    pub t_total: usize,
    /// Noise steps generated and discarded before the first kept point.
    pub burn_in: usize,
}

impl Default for ArmaConfig {
    fn default() -> Self {
        Self {
            phi: 0.8,
            theta: 0.8,
            innovation_std: 1.0,
            seed: 0,
            t_total: 500,
            burn_in: 0,
        }
    }
}

impl ArmaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_total == 0 {
            return Err(Error::Config("t_total must be at least 1".into()));
        }
        if !(self.innovation_std.is_finite() && self.innovation_std >= 0.0) {
            return Err(Error::Config(format!(
                "innovation_std must be finite and nonnegative, got {}",
                self.innovation_std
            )));
        }
        if !(self.phi.is_finite() && self.theta.is_finite()) {
            return Err(Error::Config("ARMA coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Stationary variance σ²(1 + θ² + 2φθ) / (1 − φ²); requires |φ| < 1.
    pub fn stationary_variance(&self) -> f64 {
        let (p, t) = (self.phi, self.theta);
        self.innovation_std.powi(2) * (1.0 + t * t + 2.0 * p * t) / (1.0 - p * p)
    }

    /// Lag-1 autocorrelation (1 + φθ)(φ + θ) / (1 + 2φθ + θ²).
    pub fn lag1_autocorrelation(&self) -> f64 {
        let (p, t) = (self.phi, self.theta);
        (1.0 + p * t) * (p + t) / (1.0 + 2.0 * p * t + t * t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesBatch {
    /// `t_total × 6` features, uniform on `[0, 1]`.
    pub x: Matrix,
    pub y: Vec<f64>,
    /// The ARMA noise ε added to each target.
    pub noise: Vec<f64>,
}

/// Noise-free regression function. The sixth feature is ignored.
pub fn signal(x: &[f64]) -> f64 {
    10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
        + 20.0 * (x[2] - 0.5).powi(2)
        + 10.0 * x[3]
        + 5.0 * x[4]
        + 0.0 * x[5]
}

/// ε_{t+1} = φ ε_t + ξ_{t+1} + θ ξ_t with ε_0 = ξ_0.
pub fn arma_noise(config: &ArmaConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, 0);
    let total = config.burn_in + config.t_total;
    let mut out = Vec::with_capacity(total);
    let mut draw = || -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        config.innovation_std * z
    };
    let mut xi_prev = draw();
    let mut eps = xi_prev;
    out.push(eps);
    for _ in 1..total {
        let xi = draw();
        eps = config.phi * eps + xi + config.theta * xi_prev;
        xi_prev = xi;
        out.push(eps);
    }
    Ok(out.split_off(config.burn_in))
}

pub fn generate_time_series(config: &ArmaConfig) -> Result<TimeSeriesBatch> {
    let noise = arma_noise(config)?;
    let mut rng = stream_rng(config.seed, 1);
    let mut x = Matrix::zeros(config.t_total, NUM_FEATURES);
    for v in x.as_mut_slice() {
        *v = rng.random::<f64>();
    }
    let y = x
        .iter_rows()
        .zip(&noise)
        .map(|(row, e)| signal(row) + e)
        .collect();
    Ok(TimeSeriesBatch { x, y, noise })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticClassificationConfig {
    pub num_classes: usize,
    pub n: usize,
    pub class_separation: f64,
    pub seed: u64,
    /// Label distribution; uniform when absent. When present, `ln(prior)` is
    /// added to every logit so the scores favor frequent classes, as a model
    /// trained on the imbalanced data would.
    pub class_priors: Option<Vec<f64>>,
}

impl Default for SyntheticClassificationConfig {
    fn default() -> Self {
        Self {
            num_classes: 10,
            n: 1000,
            class_separation: 2.0,
            seed: 0,
            class_priors: None,
        }
    }
}

/// Priors proportional to `ratio^k`, normalized.
pub fn geometric_priors(num_classes: usize, ratio: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..num_classes).map(|k| ratio.powi(k as i32)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// Labels plus logits `separation · onehot(label) + N(0, I)` (plus log-priors
/// when configured).
pub fn generate_classification(
    config: &SyntheticClassificationConfig,
) -> Result<(Matrix, Vec<usize>)> {
    let k = config.num_classes;
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {k}")));
    }
    if !config.class_separation.is_finite() {
        return Err(Error::Config("class separation must be finite".into()));
    }
    let offsets = match &config.class_priors {
        Some(p) => {
            if p.len() != k || p.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::Config(format!(
                    "class priors must be {k} positive values"
                )));
            }
            let total: f64 = p.iter().sum();
            p.iter().map(|v| (v / total).ln()).collect()
        }
        None => vec![0.0; k],
    };
    let cumulative: Vec<f64> = offsets
        .iter()
        .scan(0.0, |acc, o| {
            *acc += if config.class_priors.is_some() {
                o.exp()
            } else {
                1.0 / k as f64
            };
            Some(*acc)
        })
        .collect();

    let mut rng = stream_rng(config.seed, 0);
    let mut logits = Matrix::zeros(config.n, k);
    let mut labels = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let u: f64 = rng.random::<f64>() * cumulative[k - 1];
        let label = cumulative.iter().position(|&c| u < c).unwrap_or(k - 1);
        labels.push(label);
        let row = logits.row_mut(i);
        for (j, z) in row.iter_mut().enumerate() {
            let noise: f64 = StandardNormal.sample(&mut rng);
            *z = noise
                + offsets[j]
                + if j == label {
                    config.class_separation
                } else {
                    0.0
                };
        }
    }
    Ok((logits, labels))
}
