//! Regression-as-classification conformal prediction.
//!
//! A model outputs probabilities over bins of the target range. The density
//! at `y` is the piecewise-linear interpolation of those probabilities between
//! bin midpoints, held constant beyond the outermost midpoints. Calibration
//! scores are negated densities at the true targets, and the prediction set is
//! every `y` in range whose density reaches the calibrated level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::quantile::{conformal_quantile, Alpha};
use crate::scores::check_probability_row;
use crate::sets::Interval;

pub const DEFAULT_GRID_RESOLUTION: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    midpoints: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl BinGrid {
    pub fn new(midpoints: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if midpoints.len() < 2 {
            return Err(Error::Config("a bin grid needs at least two bins".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("invalid bin range [{lo}, {hi}]")));
        }
        if midpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "bin midpoints must be strictly increasing".into(),
            ));
        }
        if midpoints[0] < lo || midpoints[midpoints.len() - 1] > hi {
            return Err(Error::Config(
                "bin midpoints must lie within the range".into(),
            ));
        }
        Ok(Self { midpoints, lo, hi })
    }

    /// `bins` equal-width bins over `[lo, hi]`, represented by their centers.
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        let width = (hi - lo) / bins as f64;
        let midpoints = (0..bins).map(|k| lo + (k as f64 + 0.5) * width).collect();
        Self::new(midpoints, lo, hi)
    }

    /// Uniform grid over the targets' span widened by `margin` (a fraction of
    /// the span) on each side.
    pub fn covering(targets: &[f64], bins: usize, margin: f64) -> Result<Self> {
        let (min, max) = targets
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| {
                (a.min(y), b.max(y))
            });
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::input(
                "cannot build a bin grid from empty or non-finite targets",
            ));
        }
        let span = (max - min).max(1e-9);
        Self::uniform(min - margin * span, max + margin * span, bins)
    }

    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    pub fn len(&self) -> usize {
        self.midpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.midpoints.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }

    /// Interpolated density of `probs` at `y`.
    pub fn density(&self, probs: &[f64], y: f64) -> f64 {
        let m = &self.midpoints;
        let last = m.len() - 1;
        if y <= m[0] {
            return probs[0];
        }
        if y >= m[last] {
            return probs[last];
        }
        // First midpoint strictly greater than y.
        let j = m.partition_point(|&x| x <= y);
        let t = (y - m[j - 1]) / (m[j] - m[j - 1]);
        probs[j - 1] + t * (probs[j] - probs[j - 1])
    }
}

/// Union of disjoint closed intervals, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R2ccpSet {
    pub intervals: Vec<Interval>,
}

impl R2ccpSet {
    pub fn contains(&self, y: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(y))
    }

    pub fn width(&self) -> f64 {
        self.intervals.iter().map(Interval::width).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R2ccpPredictor {
    pub grid: BinGrid,
    pub alpha: Alpha,
    #[serde(with = "crate::threshold::extended_f64")]
    pub quantile: f64,
}

impl R2ccpPredictor {
    pub fn calibrate(
        grid: BinGrid,
        bin_probs: &Matrix,
        targets: &[f64],
        alpha: Alpha,
    ) -> Result<Self> {
        if bin_probs.cols() != grid.len() {
            return Err(Error::input(format!(
                "{} bin probabilities per row, grid has {} bins",
                bin_probs.cols(),
                grid.len()
            )));
        }
        if bin_probs.rows() != targets.len() {
            return Err(Error::input(format!(
                "{} probability row(s) for {} target(s)",
                bin_probs.rows(),
                targets.len()
            )));
        }
        let scores = targets
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                if !grid.contains(y) {
                    return Err(Error::input(format!("target {y} outside the bin range")));
                }
                let row = bin_probs.row(i);
                check_probability_row(row).map_err(|e| Error::input(format!("row {i}: {e}")))?;
                Ok(-grid.density(row, y))
            })
            .collect::<Result<Vec<_>>>()?;
        let quantile = conformal_quantile(&scores, alpha)?;
        Ok(Self {
            grid,
            alpha,
            quantile,
        })
    }

    /// Minimum interpolated density admitted into a prediction set.
    pub fn density_threshold(&self) -> f64 {
        -self.quantile
    }

    /// Materializes `{y in range : density(y) >= threshold}`.
    ///
    /// Scans `resolution` evenly spaced points merged with the bin midpoints,
    /// so the density is linear between consecutive scan points and run
    /// boundaries can be placed exactly where the line crosses the threshold.
    pub fn predict(&self, probs: &[f64], resolution: usize) -> Result<R2ccpSet> {
        if probs.len() != self.grid.len() {
            return Err(Error::input(format!(
                "{} bin probabilities, grid has {} bins",
                probs.len(),
                self.grid.len()
            )));
        }
        check_probability_row(probs)?;
        if self.quantile == f64::INFINITY {
            return Ok(R2ccpSet {
                intervals: vec![Interval::unbounded()],
            });
        }
        let resolution = resolution.max(2);
        let tau = self.density_threshold();
        let (lo, hi) = self.grid.range();
        let step = (hi - lo) / (resolution - 1) as f64;
        let mut xs: Vec<f64> = (0..resolution).map(|i| lo + i as f64 * step).collect();
        xs[resolution - 1] = hi;
        xs.extend_from_slice(self.grid.midpoints());
        xs.sort_by(f64::total_cmp);
        xs.dedup();

        let crossing = |a: f64, b: f64, pa: f64, pb: f64| a + (tau - pa) / (pb - pa) * (b - a);
        let mut intervals = Vec::new();
        let mut start: Option<f64> = None;
        let mut prev = (xs[0], self.grid.density(probs, xs[0]));
        if prev.1 >= tau {
            start = Some(prev.0);
        }
        for &x in &xs[1..] {
            let p = self.grid.density(probs, x);
            match (start, p >= tau) {
                (None, true) => start = Some(crossing(prev.0, x, prev.1, p).clamp(prev.0, x)),
                (Some(s), false) => {
                    let end = crossing(prev.0, x, prev.1, p).clamp(prev.0, x);
                    intervals.push(Interval {
                        lo: s,
                        hi: end.max(s),
                    });
                    start = None;
                }
                _ => {}
            }
            prev = (x, p);
        }
        if let Some(s) = start {
            intervals.push(Interval { lo: s, hi });
        }
        Ok(R2ccpSet { intervals })
    }
}
