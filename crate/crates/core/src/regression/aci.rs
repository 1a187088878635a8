//! Adaptive conformal inference: the working level `α_t` moves by
//! `γ (α − err_t)` after every observation, against a fixed calibration set.

use serde::{Deserialize, Serialize};

use super::{band_interval, QuantilePair};
use crate::error::{Error, Result};
use crate::quantile::{conformal_quantile, Alpha};
use crate::sets::PredictionInterval;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AciState {
    pub alpha_target: Alpha,
    /// Current working level; unclamped.
    pub alpha_t: f64,
    pub gamma: f64,
    pub steps: usize,
}

impl AciState {
    pub fn new(alpha: Alpha, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::Config(format!(
                "ACI step size must be nonnegative, got {gamma}"
            )));
        }
        Ok(Self {
            alpha_target: alpha,
            alpha_t: alpha.value(),
            gamma,
            steps: 0,
        })
    }
}

/// `α_{t+1} = α_t + γ (α − 1[not covered])`.
pub fn aci_update(state: AciState, covered: bool) -> AciState {
    let err = if covered { 0.0 } else { 1.0 };
    AciState {
        alpha_t: state.alpha_t + state.gamma * (state.alpha_target.value() - err),
        steps: state.steps + 1,
        ..state
    }
}

/// The base prediction that the adaptive quantile widens.
#[derive(Debug, Clone, Copy)]
pub enum AciBase<'a> {
    Point(&'a [f64]),
    Quantiles(&'a QuantilePair),
}

impl AciBase<'_> {
    fn bounds(&self) -> (&[f64], &[f64]) {
        match self {
            AciBase::Point(p) => (p, p),
            AciBase::Quantiles(q) => (&q.lo, &q.hi),
        }
    }
}

/// Interval at the working level. `α_t <= 0` gives the whole space and
/// `α_t >= 1` an empty set anchored at the base prediction.
pub fn aci_predict_interval(
    state: &AciState,
    scores: &[Vec<f64>],
    base: AciBase<'_>,
) -> Result<PredictionInterval> {
    let (lo, hi) = base.bounds();
    if lo.len() != scores.len() {
        return Err(Error::input(format!(
            "base prediction has {} dimension(s), calibration scores have {}",
            lo.len(),
            scores.len()
        )));
    }
    if state.alpha_t <= 0.0 {
        return Ok(PredictionInterval::unbounded(lo.len()));
    }
    if state.alpha_t >= 1.0 {
        let centers: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
        return Ok(PredictionInterval::empty_at(&centers));
    }
    let level = Alpha::new(state.alpha_t)?;
    let q = scores
        .iter()
        .map(|s| conformal_quantile(s, level))
        .collect::<Result<Vec<_>>>()?;
    Ok(band_interval(lo, hi, &q))
}

/// Sequential owner of an ACI state and its calibration scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptivePredictor {
    pub state: AciState,
    pub scores: Vec<Vec<f64>>,
}

impl AdaptivePredictor {
    pub fn new(scores: Vec<Vec<f64>>, alpha: Alpha, gamma: f64) -> Result<Self> {
        if scores.is_empty() || scores.iter().any(Vec::is_empty) {
            return Err(Error::EmptyScores);
        }
        Ok(Self {
            state: AciState::new(alpha, gamma)?,
            scores,
        })
    }

    pub fn predict(&self, base: AciBase<'_>) -> Result<PredictionInterval> {
        aci_predict_interval(&self.state, &self.scores, base)
    }

    /// Predicts at the current level, then updates with the realized target.
    /// Returns the interval that was scored.
    pub fn step(&mut self, base: AciBase<'_>, target: &[f64]) -> Result<PredictionInterval> {
        let interval = self.predict(base)?;
        self.state = aci_update(self.state, interval.contains(target));
        Ok(interval)
    }
}
