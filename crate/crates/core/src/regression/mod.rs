//! Regression conformal predictors over scalar or flattened multi-dimensional
//! outputs. Every dimension is calibrated independently at the same level.

mod aci;
mod r2ccp;

pub use aci::{aci_predict_interval, aci_update, AciBase, AciState, AdaptivePredictor};
pub use r2ccp::{BinGrid, R2ccpPredictor, R2ccpSet, DEFAULT_GRID_RESOLUTION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::quantile::{conformal_quantile, Alpha};
use crate::sets::{Interval, PredictionInterval};

/// Lower/upper quantile predictions for one item, one entry per output dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantilePair {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl QuantilePair {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::input(format!(
                "quantile pair has {} lower and {} upper entries",
                lo.len(),
                hi.len()
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

fn check_same_shape(a: &Matrix, b: &Matrix, what: &str) -> Result<()> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::input(format!(
            "{what}: shape {}x{} does not match targets {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::input(format!("{what}: empty calibration set")));
    }
    if a.as_slice()
        .iter()
        .chain(b.as_slice())
        .any(|v| !v.is_finite())
    {
        return Err(Error::input(format!("{what}: non-finite value")));
    }
    Ok(())
}

/// Absolute residuals `|y - ŷ|`, grouped by dimension.
pub fn residual_scores(predictions: &Matrix, targets: &Matrix) -> Result<Vec<Vec<f64>>> {
    check_same_shape(predictions, targets, "point predictions")?;
    Ok((0..targets.cols())
        .map(|j| {
            (0..targets.rows())
                .map(|i| (targets.get(i, j) - predictions.get(i, j)).abs())
                .collect()
        })
        .collect())
}

/// CQR scores `max(lo - y, y - hi)`, grouped by dimension. Crossed bands are
/// scored as given.
pub fn cqr_scores(lo: &Matrix, hi: &Matrix, targets: &Matrix) -> Result<Vec<Vec<f64>>> {
    check_same_shape(lo, targets, "lower quantiles")?;
    check_same_shape(hi, targets, "upper quantiles")?;
    Ok((0..targets.cols())
        .map(|j| {
            (0..targets.rows())
                .map(|i| {
                    let y = targets.get(i, j);
                    (lo.get(i, j) - y).max(y - hi.get(i, j))
                })
                .collect()
        })
        .collect())
}

fn per_dimension_quantiles(scores: &[Vec<f64>], alpha: Alpha) -> Result<Vec<f64>> {
    scores
        .iter()
        .map(|s| conformal_quantile(s, alpha))
        .collect()
}

/// `[lo - q, hi + q]` per dimension. An infinite `q` gives the whole line and
/// an adjustment that inverts the band yields an empty set.
pub(crate) fn band_interval(lo: &[f64], hi: &[f64], q: &[f64]) -> PredictionInterval {
    let mut dims = Vec::with_capacity(lo.len());
    let mut empty = false;
    for ((&l, &h), &qj) in lo.iter().zip(hi).zip(q) {
        if qj == f64::INFINITY {
            dims.push(Interval::unbounded());
            continue;
        }
        let (a, b) = (l - qj, h + qj);
        if a <= b {
            dims.push(Interval { lo: a, hi: b });
        } else {
            empty = true;
            dims.push(Interval::point(0.5 * (l + h)));
        }
    }
    if empty {
        let centers: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
        PredictionInterval::empty_at(&centers)
    } else {
        PredictionInterval::new(dims)
    }
}

/// Split conformal regression on absolute residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRegressor {
    pub alpha: Alpha,
    #[serde(with = "crate::threshold::extended_f64::vec")]
    pub quantiles: Vec<f64>,
    pub scores: Vec<Vec<f64>>,
}

impl SplitRegressor {
    pub fn calibrate(predictions: &Matrix, targets: &Matrix, alpha: Alpha) -> Result<Self> {
        let scores = residual_scores(predictions, targets)?;
        Ok(Self {
            alpha,
            quantiles: per_dimension_quantiles(&scores, alpha)?,
            scores,
        })
    }

    pub fn dim(&self) -> usize {
        self.quantiles.len()
    }

    pub fn predict(&self, point: &[f64]) -> Result<PredictionInterval> {
        if point.len() != self.dim() {
            return Err(Error::input(format!(
                "prediction has {} dimension(s), calibrated on {}",
                point.len(),
                self.dim()
            )));
        }
        Ok(band_interval(point, point, &self.quantiles))
    }
}

/// Conformalized quantile regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqrRegressor {
    pub alpha: Alpha,
    #[serde(with = "crate::threshold::extended_f64::vec")]
    pub quantiles: Vec<f64>,
    pub scores: Vec<Vec<f64>>,
}

impl CqrRegressor {
    pub fn calibrate(lo: &Matrix, hi: &Matrix, targets: &Matrix, alpha: Alpha) -> Result<Self> {
        let scores = cqr_scores(lo, hi, targets)?;
        Ok(Self {
            alpha,
            quantiles: per_dimension_quantiles(&scores, alpha)?,
            scores,
        })
    }

    pub fn dim(&self) -> usize {
        self.quantiles.len()
    }

    pub fn predict(&self, pair: &QuantilePair) -> Result<PredictionInterval> {
        if pair.dim() != self.dim() {
            return Err(Error::input(format!(
                "quantile pair has {} dimension(s), calibrated on {}",
                pair.dim(),
                self.dim()
            )));
        }
        Ok(band_interval(&pair.lo, &pair.hi, &self.quantiles))
    }
}
