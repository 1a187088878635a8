//! Classification nonconformity scores: THR, APS, RAPS, SAPS and Margin.
//!
//! All scores take a row of class probabilities. Larger values mean the label
//! conforms less. APS, RAPS and SAPS use a uniform draw `u`; with
//! randomization disabled `u = 1`. One `u` is shared by every label of a row
//! so that thresholding yields nested sets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::quantile::ScoreVector;
use crate::rng::stream_rng;

const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ScoreKind {
    Thr,
    Aps,
    Raps,
    Saps,
    #[serde(rename = "Margin")]
    Margin,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 5] = [
        ScoreKind::Thr,
        ScoreKind::Aps,
        ScoreKind::Raps,
        ScoreKind::Saps,
        ScoreKind::Margin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Thr => "THR",
            ScoreKind::Aps => "APS",
            ScoreKind::Raps => "RAPS",
            ScoreKind::Saps => "SAPS",
            ScoreKind::Margin => "Margin",
        }
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "thr" => Ok(ScoreKind::Thr),
            "aps" => Ok(ScoreKind::Aps),
            "raps" => Ok(ScoreKind::Raps),
            "saps" => Ok(ScoreKind::Saps),
            "margin" => Ok(ScoreKind::Margin),
            other => Err(Error::Config(format!("unknown score function '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreConfig {
    pub kind: ScoreKind,
    /// RAPS penalty λ.
    pub raps_penalty: f64,
    /// RAPS rank offset k_reg.
    pub raps_kreg: usize,
    /// SAPS ranking weight.
    pub saps_weight: f64,
    pub randomized: bool,
    pub rng_seed: u64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            kind: ScoreKind::Thr,
            raps_penalty: 1.0,
            raps_kreg: 0,
            saps_weight: 0.25,
            randomized: true,
            rng_seed: 0,
        }
    }
}

impl ScoreConfig {
    pub fn new(kind: ScoreKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn deterministic(mut self) -> Self {
        self.randomized = false;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if !(self.raps_penalty.is_finite() && self.raps_penalty >= 0.0) {
            return Err(Error::Config(format!(
                "RAPS penalty must be finite and nonnegative, got {}",
                self.raps_penalty
            )));
        }
        if !(self.saps_weight.is_finite() && self.saps_weight > 0.0) {
            return Err(Error::Config(format!(
                "SAPS weight must be finite and positive, got {}",
                self.saps_weight
            )));
        }
        if self.kind == ScoreKind::Raps && self.raps_kreg >= num_classes.max(1) {
            return Err(Error::Config(format!(
                "RAPS k_reg {} must be below the number of classes {num_classes}",
                self.raps_kreg
            )));
        }
        Ok(())
    }

    /// The row's `u`: a seeded uniform draw when randomized, otherwise 1.
    pub fn noise(&self, stream: u64) -> f64 {
        if self.randomized {
            stream_rng(self.rng_seed, stream).random::<f64>()
        } else {
            1.0
        }
    }
}

/// Row-stochastic matrix of class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix(Matrix);

impl ProbabilityMatrix {
    pub fn new(matrix: Matrix) -> Result<Self> {
        for (i, row) in matrix.iter_rows().enumerate() {
            check_probability_row(row).map_err(|e| Error::input(format!("row {i}: {e}")))?;
        }
        Ok(Self(matrix))
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }
}

pub fn check_probability_row(row: &[f64]) -> Result<()> {
    if row.is_empty() {
        return Err(Error::input("probability row is empty"));
    }
    if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::input(format!("probability {p} outside [0, 1]")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(Error::input(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

/// 1-based descending rank of `label`; ties go to the lower label index.
pub fn descending_rank(probs: &[f64], label: usize) -> usize {
    let p = probs[label];
    1 + probs
        .iter()
        .enumerate()
        .filter(|&(i, &q)| q > p || (q == p && i < label))
        .count()
}

/// Label indices ordered by descending probability, ties by ascending index.
pub fn descending_order(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order
}

fn check_label(probs: &[f64], label: usize) -> Result<()> {
    if label >= probs.len() {
        return Err(Error::input(format!(
            "label {label} outside universe of {} classes",
            probs.len()
        )));
    }
    Ok(())
}

/// Score of a single label given an explicit `u`.
pub fn score_with_noise(config: &ScoreConfig, probs: &[f64], label: usize, u: f64) -> Result<f64> {
    check_probability_row(probs)?;
    check_label(probs, label)?;
    config.validate(probs.len())?;
    Ok(score_unchecked(config, probs, label, u))
}

fn score_unchecked(config: &ScoreConfig, probs: &[f64], label: usize, u: f64) -> f64 {
    let p = probs[label];
    match config.kind {
        ScoreKind::Thr => 1.0 - p,
        ScoreKind::Aps => mass_above(probs, p) + u * p,
        ScoreKind::Raps => {
            let rank = descending_rank(probs, label);
            mass_above(probs, p) + u * p + raps_penalty(config, rank)
        }
        ScoreKind::Saps => {
            let rank = descending_rank(probs, label);
            let top = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            saps_value(config, top, rank, u)
        }
        ScoreKind::Margin => max_other(probs, label) - p,
    }
}

fn mass_above(probs: &[f64], p: f64) -> f64 {
    probs.iter().filter(|&&q| q > p).sum()
}

fn raps_penalty(config: &ScoreConfig, rank: usize) -> f64 {
    config.raps_penalty * rank.saturating_sub(config.raps_kreg) as f64
}

fn saps_value(config: &ScoreConfig, top: f64, rank: usize, u: f64) -> f64 {
    if rank == 1 {
        u * top
    } else {
        top + (rank as f64 - 2.0 + u) * config.saps_weight
    }
}

fn max_other(probs: &[f64], label: usize) -> f64 {
    // A single-class universe has no competitor; its mass counts as zero.
    probs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label)
        .map(|(_, &q)| q)
        .reduce(f64::max)
        .unwrap_or(0.0)
}

/// Score of `label` with `u` drawn from `stream`.
pub fn score(config: &ScoreConfig, probs: &[f64], label: usize, stream: u64) -> Result<f64> {
    score_with_noise(config, probs, label, config.noise(stream))
}

/// Scores of every label with one shared `u`.
pub fn score_all_with_noise(config: &ScoreConfig, probs: &[f64], u: f64) -> Result<Vec<f64>> {
    check_probability_row(probs)?;
    config.validate(probs.len())?;
    Ok(score_all_unchecked(config, probs, u))
}

pub(crate) fn score_all_unchecked(config: &ScoreConfig, probs: &[f64], u: f64) -> Vec<f64> {
    let k = probs.len();
    match config.kind {
        ScoreKind::Thr => probs.iter().map(|p| 1.0 - p).collect(),
        ScoreKind::Margin => {
            let order = descending_order(probs);
            let first = order[0];
            let second = order.get(1).map_or(0.0, |&i| probs[i]);
            (0..k)
                .map(|y| {
                    if y == first {
                        second - probs[y]
                    } else {
                        probs[first] - probs[y]
                    }
                })
                .collect()
        }
        ScoreKind::Aps | ScoreKind::Raps | ScoreKind::Saps => {
            let order = descending_order(probs);
            let top = probs[order[0]];
            let mut out = vec![0.0; k];
            // Mass strictly above each tie group is the running sum before the group starts.
            let mut above = 0.0;
            let mut start = 0;
            while start < k {
                let p = probs[order[start]];
                let mut end = start;
                while end < k && probs[order[end]] == p {
                    end += 1;
                }
                for (pos, &y) in order.iter().enumerate().take(end).skip(start) {
                    let rank = pos + 1;
                    out[y] = match config.kind {
                        ScoreKind::Aps => above + u * p,
                        ScoreKind::Raps => above + u * p + raps_penalty(config, rank),
                        _ => saps_value(config, top, rank, u),
                    };
                }
                above += p * (end - start) as f64;
                start = end;
            }
            out
        }
    }
}

/// Scores of every label with `u` drawn from `stream`.
pub fn score_all(config: &ScoreConfig, probs: &[f64], stream: u64) -> Result<Vec<f64>> {
    score_all_with_noise(config, probs, config.noise(stream))
}

/// Scores of the true labels, row `i` drawing its `u` from stream `first_stream + i`.
pub fn score_batch(
    config: &ScoreConfig,
    probs: &ProbabilityMatrix,
    labels: &[usize],
    first_stream: u64,
) -> Result<ScoreVector> {
    if labels.len() != probs.rows() {
        return Err(Error::input(format!(
            "{} label(s) for {} probability row(s)",
            labels.len(),
            probs.rows()
        )));
    }
    config.validate(probs.num_classes())?;
    let scores = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let row = probs.row(i);
            check_label(row, y)?;
            Ok(score_unchecked(
                config,
                row,
                y,
                config.noise(first_stream + i as u64),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    ScoreVector::new(scores)
}

/// Deterministic (`u = 1`) score of `label` and its gradient with respect to the
/// probability row. Rank-dependent terms are piecewise constant and contribute
/// no gradient.
pub(crate) fn score_and_grad(config: &ScoreConfig, probs: &[f64], label: usize) -> (f64, Vec<f64>) {
    let k = probs.len();
    let mut grad = vec![0.0; k];
    let value = score_unchecked(config, probs, label, 1.0);
    let p = probs[label];
    match config.kind {
        ScoreKind::Thr => grad[label] = -1.0,
        ScoreKind::Aps | ScoreKind::Raps => {
            for (g, &q) in grad.iter_mut().zip(probs) {
                if q > p {
                    *g = 1.0;
                }
            }
            grad[label] = 1.0;
        }
        ScoreKind::Saps => {
            let top = descending_order(probs)[0];
            grad[top] = 1.0;
        }
        ScoreKind::Margin => {
            if let Some(other) = descending_order(probs).into_iter().find(|&i| i != label) {
                grad[other] = 1.0;
            }
            grad[label] = -1.0;
        }
    }
    (value, grad)
}
