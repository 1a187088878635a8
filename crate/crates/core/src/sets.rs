use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label subset produced for one classification instance. Members are kept
/// sorted ascending and may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PredictionSet {
    members: Vec<usize>,
}

impl PredictionSet {
    pub fn new(mut members: Vec<usize>, num_classes: usize) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if let Some(&bad) = members.iter().find(|&&m| m >= num_classes) {
            return Err(Error::input(format!(
                "label {bad} outside universe of {num_classes} classes"
            )));
        }
        Ok(Self { members })
    }

    /// Builds a set from labels already known to be ascending, unique and in range.
    pub(crate) fn from_sorted(members: Vec<usize>) -> Self {
        Self { members }
    }

    pub fn full(num_classes: usize) -> Self {
        Self {
            members: (0..num_classes).collect(),
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, label: usize) -> bool {
        self.members.binary_search(&label).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn union(&self, other: &PredictionSet) -> PredictionSet {
        let mut members = self.members.clone();
        members.extend_from_slice(&other.members);
        members.sort_unstable();
        members.dedup();
        PredictionSet { members }
    }
}

/// Closed interval `[lo, hi]` with `lo <= hi`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "crate::threshold::extended_f64")]
    pub lo: f64,
    #[serde(with = "crate::threshold::extended_f64")]
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::input(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn unbounded() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }
}

/// Per-dimension bounds for one regression instance.
///
/// `empty` marks a set that contains nothing (for example an adaptive level
/// at or above one); its dims then hold zero-width points at the prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub dims: Vec<Interval>,
    #[serde(default)]
    pub empty: bool,
}

impl PredictionInterval {
    pub fn new(dims: Vec<Interval>) -> Self {
        Self { dims, empty: false }
    }

    pub fn empty_at(points: &[f64]) -> Self {
        Self {
            dims: points.iter().map(|&p| Interval::point(p)).collect(),
            empty: true,
        }
    }

    pub fn unbounded(dim: usize) -> Self {
        Self::new(vec![Interval::unbounded(); dim])
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    /// Closed membership in every dimension.
    pub fn contains(&self, y: &[f64]) -> bool {
        !self.empty
            && y.len() == self.dims.len()
            && self.dims.iter().zip(y).all(|(d, &v)| d.contains(v))
    }

    /// Sum of per-dimension widths; zero for an empty set.
    pub fn width(&self) -> f64 {
        if self.empty {
            0.0
        } else {
            self.dims.iter().map(Interval::width).sum()
        }
    }
}
