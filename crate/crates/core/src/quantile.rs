//! Calibration quantiles.
//!
//! The split-conformal threshold is the ⌈(n+1)(1−α)⌉-th smallest calibration
//! score, or `+∞` when that index exceeds `n`. The weighted variant places
//! normalized mass on each calibration score plus the test point's mass at
//! `+∞` and returns the smallest score at which the cumulative mass reaches
//! `1−α`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack applied to the `1−α` mass target so that products like `10 * 0.9`
/// landing a hair above an integer do not push the order statistic up by one.
const MASS_TOLERANCE: f64 = 1e-12;

/// Significance level, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidAlpha(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Alpha::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(alpha: Alpha) -> f64 {
        alpha.0
    }
}

/// Calibration nonconformity scores. Every entry is finite.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        check_finite(&scores)?;
        Ok(Self(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn quantile(&self, alpha: Alpha) -> Result<f64> {
        conformal_quantile(&self.0, alpha)
    }
}

fn check_finite(scores: &[f64]) -> Result<()> {
    match scores.iter().position(|s| !s.is_finite()) {
        Some(i) => Err(Error::input(format!(
            "score {i} is not finite ({})",
            scores[i]
        ))),
        None => Ok(()),
    }
}

/// 1-based rank of the conformal order statistic for `n` scores, or `None`
/// when it exceeds `n`.
pub fn conformal_rank(n: usize, alpha: Alpha) -> Option<usize> {
    let m = (n + 1) as f64;
    let target = m * (1.0 - alpha.value()) - m * MASS_TOLERANCE;
    let rank = (target.ceil().max(1.0)) as usize;
    (rank <= n).then_some(rank)
}

/// The ⌈(n+1)(1−α)⌉-th smallest score, or `+∞` when `n` is too small for `alpha`.
pub fn conformal_quantile(scores: &[f64], alpha: Alpha) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    check_finite(scores)?;
    match conformal_rank(scores.len(), alpha) {
        Some(rank) => {
            let mut sorted = scores.to_vec();
            sorted.sort_by(f64::total_cmp);
            Ok(sorted[rank - 1])
        }
        None => Ok(f64::INFINITY),
    }
}

/// Weighted conformal quantile under covariate shift.
///
/// `weights[i]` is the (unnormalized) likelihood ratio of calibration point `i`
/// and `test_weight` that of the test point, whose mass sits at `+∞`.
pub fn weighted_conformal_quantile(
    scores: &[f64],
    weights: &[f64],
    test_weight: f64,
    alpha: Alpha,
) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    if scores.len() != weights.len() {
        return Err(Error::input(format!(
            "{} scores but {} weights",
            scores.len(),
            weights.len()
        )));
    }
    check_finite(scores)?;
    if let Some(w) = weights
        .iter()
        .chain(std::iter::once(&test_weight))
        .find(|w| !(w.is_finite() && **w >= 0.0))
    {
        return Err(Error::input(format!(
            "weight {w} is negative or not finite"
        )));
    }
    let total: f64 = weights.iter().sum::<f64>() + test_weight;
    if total <= 0.0 {
        return Err(Error::input("total weight is zero"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let target = 1.0 - alpha.value() - MASS_TOLERANCE;
    let mut cumulative = 0.0;
    for i in order {
        cumulative += weights[i];
        if cumulative / total >= target {
            return Ok(scores[i]);
        }
    }
    Ok(f64::INFINITY)
}
