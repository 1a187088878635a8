//! Coverage rate, average set size / interval width, and class-conditional
//! coverage gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::Alpha;
use crate::regression::R2ccpSet;
use crate::sets::{PredictionInterval, PredictionSet};

/// Membership of a ground truth in a prediction.
pub trait Covers<T: ?Sized> {
    fn covers(&self, truth: &T) -> bool;
}

impl Covers<usize> for PredictionSet {
    fn covers(&self, truth: &usize) -> bool {
        self.contains(*truth)
    }
}

impl Covers<[f64]> for PredictionInterval {
    fn covers(&self, truth: &[f64]) -> bool {
        self.contains(truth)
    }
}

impl Covers<Vec<f64>> for PredictionInterval {
    fn covers(&self, truth: &Vec<f64>) -> bool {
        self.contains(truth)
    }
}

impl Covers<f64> for PredictionInterval {
    fn covers(&self, truth: &f64) -> bool {
        self.contains(std::slice::from_ref(truth))
    }
}

impl Covers<f64> for R2ccpSet {
    fn covers(&self, truth: &f64) -> bool {
        self.contains(*truth)
    }
}

fn check_lengths(predictions: usize, truths: usize) -> Result<()> {
    if predictions == 0 {
        return Err(Error::input("no predictions to evaluate"));
    }
    if predictions != truths {
        return Err(Error::input(format!(
            "{predictions} prediction(s) but {truths} ground truth value(s)"
        )));
    }
    Ok(())
}

pub fn coverage_rate<P: Covers<T>, T>(predictions: &[P], truths: &[T]) -> Result<f64> {
    check_lengths(predictions.len(), truths.len())?;
    let hits = predictions
        .iter()
        .zip(truths)
        .filter(|(p, t)| p.covers(t))
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

pub fn average_size(sets: &[PredictionSet]) -> Result<f64> {
    if sets.is_empty() {
        return Err(Error::input("no prediction sets"));
    }
    Ok(sets.iter().map(PredictionSet::len).sum::<usize>() as f64 / sets.len() as f64)
}

/// Mean summed width across dimensions; an unbounded interval makes it `+∞`.
pub fn average_width(intervals: &[PredictionInterval]) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::input("no prediction intervals"));
    }
    Ok(intervals.iter().map(PredictionInterval::width).sum::<f64>() / intervals.len() as f64)
}

/// Mean absolute gap, in percentage points, between each class's coverage and
/// `1 − α`, over classes that appear among `labels`.
pub fn cov_gap(
    sets: &[PredictionSet],
    labels: &[usize],
    alpha: Alpha,
    num_classes: usize,
) -> Result<f64> {
    check_lengths(sets.len(), labels.len())?;
    if num_classes == 0 {
        return Err(Error::input("num_classes must be at least 1"));
    }
    let mut hits = vec![0usize; num_classes];
    let mut counts = vec![0usize; num_classes];
    for (set, &y) in sets.iter().zip(labels) {
        if y >= num_classes {
            return Err(Error::input(format!(
                "label {y} outside universe of {num_classes} classes"
            )));
        }
        counts[y] += 1;
        hits[y] += usize::from(set.contains(y));
    }
    let target = 1.0 - alpha.value();
    let gaps: Vec<f64> = counts
        .iter()
        .zip(&hits)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &h)| (h as f64 / c as f64 - target).abs())
        .collect();
    if gaps.is_empty() {
        return Err(Error::input("no class present in the evaluation set"));
    }
    Ok(100.0 * gaps.iter().sum::<f64>() / gaps.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub coverage_rate: f64,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "crate::threshold::extended_f64::option"
    )]
    pub average_size: Option<f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "crate::threshold::extended_f64::option"
    )]
    pub average_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov_gap: Option<f64>,
    pub n_test: usize,
}

impl EvaluationReport {
    pub fn classification(
        sets: &[PredictionSet],
        labels: &[usize],
        alpha: Alpha,
        num_classes: usize,
    ) -> Result<Self> {
        Ok(Self {
            coverage_rate: coverage_rate(sets, labels)?,
            average_size: Some(average_size(sets)?),
            average_width: None,
            cov_gap: Some(cov_gap(sets, labels, alpha, num_classes)?),
            n_test: sets.len(),
        })
    }

    pub fn regression(intervals: &[PredictionInterval], truths: &[Vec<f64>]) -> Result<Self> {
        Ok(Self {
            coverage_rate: coverage_rate(intervals, truths)?,
            average_size: None,
            average_width: Some(average_width(intervals)?),
            cov_gap: None,
            n_test: intervals.len(),
        })
    }
}
