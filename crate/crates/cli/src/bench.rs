//! Benchmark sweeps: conformal classification over scores, predictors and α,
//! and online regression on an ARMA-noise series.

use conformal_core::classification::{
    calculate_threshold, ClusterConfig, PredictorConfig, PredictorKind, Temperature,
};
use conformal_core::metrics::{average_size, average_width, cov_gap, coverage_rate};
use conformal_core::regression::{AciBase, AdaptivePredictor, CqrRegressor, QuantilePair};
use conformal_core::rng::stream_rng;
use conformal_core::scores::{ScoreConfig, ScoreKind};
use conformal_core::synth::{
    generate_classification, generate_time_series, geometric_priors, ArmaConfig,
    SyntheticClassificationConfig,
};
use conformal_core::train::{train, MlpSpec, Objective, Targets, TrainConfig};
use conformal_core::{Alpha, Matrix, PredictionInterval, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub fn default_alphas() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    stream_rng(seed, trial as u64).random()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassificationBench {
    pub num_classes: usize,
    pub class_separation: f64,
    /// Geometric prior ratio; uniform classes when absent.
    pub imbalance_ratio: Option<f64>,
    pub n_cal: usize,
    pub n_test: usize,
    pub scores: Vec<ScoreKind>,
    pub predictors: Vec<PredictorKind>,
    /// Hyperparameters shared by all scores; `kind` and `rng_seed` are set per run.
    pub score: ScoreConfig,
    pub temperature: f64,
    pub cluster: ClusterConfig,
    pub alphas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ClassificationBench {
    fn default() -> Self {
        Self {
            num_classes: 10,
            class_separation: 2.0,
            imbalance_ratio: None,
            n_cal: 2000,
            n_test: 2000,
            scores: ScoreKind::ALL.to_vec(),
            predictors: vec![
                PredictorKind::Split,
                PredictorKind::ClassWise,
                PredictorKind::Cluster,
            ],
            score: ScoreConfig::default(),
            temperature: 1.0,
            cluster: ClusterConfig::default(),
            alphas: default_alphas(),
            trials: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRow {
    pub score: String,
    pub predictor: String,
    pub alpha: f64,
    pub trial: usize,
    pub coverage: f64,
    pub size: f64,
    pub covgap: f64,
}

/// A calibration/test split for one trial.
pub struct Split {
    pub cal_logits: Matrix,
    pub cal_labels: Vec<usize>,
    pub test_logits: Matrix,
    pub test_labels: Vec<usize>,
}

impl ClassificationBench {
    fn synthetic_split(&self, seed: u64) -> Result<Split> {
        let config = SyntheticClassificationConfig {
            num_classes: self.num_classes,
            n: self.n_cal + self.n_test,
            class_separation: self.class_separation,
            seed,
            class_priors: self
                .imbalance_ratio
                .map(|r| geometric_priors(self.num_classes, r)),
        };
        let (logits, labels) = generate_classification(&config)?;
        let order: Vec<usize> = (0..labels.len()).collect();
        Ok(split_rows(&logits, &labels, &order, self.n_cal))
    }

    /// Runs every configured (score, predictor, α) on one split.
    pub fn evaluate_split(
        &self,
        split: &Split,
        trial: usize,
        seed: u64,
    ) -> Result<Vec<ClassificationRow>> {
        let num_classes = split.cal_logits.cols();
        let temperature = Temperature::new(self.temperature)?;
        let mut rows =
            Vec::with_capacity(self.alphas.len() * self.scores.len() * self.predictors.len());
        for &a in &self.alphas {
            let alpha = Alpha::new(a)?;
            for &score in &self.scores {
                for &predictor in &self.predictors {
                    let config = PredictorConfig::new(
                        predictor,
                        ScoreConfig {
                            kind: score,
                            rng_seed: seed,
                            ..self.score
                        },
                    )
                    .with_temperature(temperature)
                    .with_cluster(self.cluster.clone());
                    let calibrated =
                        calculate_threshold(&config, &split.cal_logits, &split.cal_labels, alpha)?;
                    let sets = calibrated.predict_with_logits(&split.test_logits, None)?;
                    rows.push(ClassificationRow {
                        score: score.name().to_string(),
                        predictor: predictor.name().to_string(),
                        alpha: a,
                        trial,
                        coverage: coverage_rate(&sets, &split.test_labels)?,
                        size: average_size(&sets)?,
                        covgap: cov_gap(&sets, &split.test_labels, alpha, num_classes)?,
                    });
                }
            }
        }
        Ok(rows)
    }

    /// Sweeps all trials in parallel. With `data`, each trial draws a seeded
    /// random split of the given logits into `n_cal` calibration rows and the
    /// rest for testing; otherwise synthetic logits are generated per trial.
    /// Rows come back in (trial, α) order.
    pub fn run(&self, data: Option<(&Matrix, &[usize])>) -> Result<Vec<ClassificationRow>> {
        if let Some((_, labels)) = data {
            if self.n_cal == 0 || self.n_cal >= labels.len() {
                return Err(conformal_core::Error::Config(format!(
                    "n_cal = {} must be between 1 and {} for {} rows of user data",
                    self.n_cal,
                    labels.len().saturating_sub(1),
                    labels.len()
                )));
            }
        }
        let per_trial: Vec<Result<Vec<ClassificationRow>>> = (0..self.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = trial_seed(self.seed, trial);
                let split = match data {
                    Some((logits, labels)) => {
                        let mut order: Vec<usize> = (0..labels.len()).collect();
                        order.shuffle(&mut stream_rng(seed, 0));
                        split_rows(
                            logits,
                            labels,
                            &order,
                            self.n_cal.min(labels.len().saturating_sub(1)),
                        )
                    }
                    None => self.synthetic_split(seed)?,
                };
                self.evaluate_split(&split, trial, seed)
            })
            .collect();
        let mut rows = Vec::new();
        for r in per_trial {
            rows.extend(r?);
        }
        Ok(rows)
    }
}

fn split_rows(logits: &Matrix, labels: &[usize], order: &[usize], n_cal: usize) -> Split {
    let (cal, test) = order.split_at(n_cal);
    Split {
        cal_logits: logits.select_rows(cal),
        cal_labels: cal.iter().map(|&i| labels[i]).collect(),
        test_logits: logits.select_rows(test),
        test_labels: test.iter().map(|&i| labels[i]).collect(),
    }
}

/// Mean of `value` over trials for each (score, predictor, α), in first-seen order.
pub fn mean_over_trials(
    rows: &[ClassificationRow],
    value: impl Fn(&ClassificationRow) -> f64,
) -> Vec<(String, String, f64, f64)> {
    let mut out: Vec<(String, String, f64, f64, usize)> = Vec::new();
    for r in rows {
        match out
            .iter_mut()
            .find(|o| o.0 == r.score && o.1 == r.predictor && o.2 == r.alpha)
        {
            Some(o) => {
                o.3 += value(r);
                o.4 += 1;
            }
            None => out.push((r.score.clone(), r.predictor.clone(), r.alpha, value(r), 1)),
        }
    }
    out.into_iter()
        .map(|(s, p, a, sum, n)| (s, p, a, sum / n as f64))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeSeriesBench {
    pub arma: ArmaConfig,
    pub n_train: usize,
    pub n_cal: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub trials: usize,
    /// Trial `i` uses series seed `seed + i`.
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    /// Fit the network on standardized targets.
    pub standardize: bool,
}

impl Default for TimeSeriesBench {
    fn default() -> Self {
        Self {
            arma: ArmaConfig::default(),
            n_train: 100,
            n_cal: 100,
            alpha: 0.1,
            gamma: 0.03,
            trials: 5,
            seed: 0,
            hidden: vec![64, 64],
            train: TrainConfig {
                batch_size: 4,
                ..TrainConfig::default()
            },
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRow {
    pub trial: usize,
    pub t: usize,
    pub method: String,
    pub lo: f64,
    pub hi: f64,
    pub y: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesSummary {
    pub trial: usize,
    pub method: String,
    pub coverage: f64,
    pub width: f64,
}

pub struct TimeSeriesOutcome {
    pub rows: Vec<TimeSeriesRow>,
    pub summary: Vec<TimeSeriesSummary>,
}

impl TimeSeriesBench {
    fn quantile_band(
        &self,
        x: &Matrix,
        y: &[f64],
        seed: u64,
    ) -> Result<impl Fn(&Matrix) -> Result<(Matrix, Matrix)>> {
        let alpha = self.alpha;
        let (mean, scale) = if self.standardize {
            let n = y.len() as f64;
            let mean = y.iter().sum::<f64>() / n;
            let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt().max(f64::EPSILON))
        } else {
            (0.0, 1.0)
        };
        let scaled: Vec<f64> = y.iter().map(|v| (v - mean) / scale).collect();
        let spec = MlpSpec {
            input_dim: x.cols(),
            hidden: self.hidden.clone(),
            output_dim: 2,
            seed,
        };
        let objective = Objective::Quantile {
            quantiles: vec![alpha / 2.0, 1.0 - alpha / 2.0],
        };
        let config = TrainConfig {
            seed,
            ..self.train.clone()
        };
        let model = train(&spec, x, Targets::Real(&scaled), &objective, &config)?.model;
        Ok(move |inputs: &Matrix| {
            let out = model.forward(inputs)?;
            let column = |j: usize| {
                let v = out.iter_rows().map(|r| r[j] * scale + mean).collect();
                Matrix::from_vec(out.rows(), 1, v)
            };
            Ok((column(0)?, column(1)?))
        })
    }

    /// Trains, calibrates and runs CQR and ACI over the test segment of one series.
    pub fn run_trial(&self, trial: usize) -> Result<TimeSeriesOutcome> {
        let seed = self.seed + trial as u64;
        let arma = ArmaConfig {
            seed,
            ..self.arma.clone()
        };
        let series = generate_time_series(&arma)?;
        let n_fit = self.n_train + self.n_cal;
        if series.y.len() <= n_fit {
            return Err(conformal_core::Error::Config(format!(
                "series of {} points leaves no test segment after {n_fit}",
                series.y.len()
            )));
        }
        let rows_of = |range: std::ops::Range<usize>| -> Vec<usize> { range.collect() };
        let train_idx = rows_of(0..self.n_train);
        let cal_idx = rows_of(self.n_train..n_fit);
        let test_idx = rows_of(n_fit..series.y.len());
        let pick = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| series.y[i]).collect() };
        let column = |v: Vec<f64>| Matrix::from_vec(v.len(), 1, v);

        let band =
            self.quantile_band(&series.x.select_rows(&train_idx), &pick(&train_idx), seed)?;
        let alpha = Alpha::new(self.alpha)?;
        let (cal_lo, cal_hi) = band(&series.x.select_rows(&cal_idx))?;
        let cqr = CqrRegressor::calibrate(&cal_lo, &cal_hi, &column(pick(&cal_idx))?, alpha)?;
        let mut aci = AdaptivePredictor::new(cqr.scores.clone(), alpha, self.gamma)?;

        let (test_lo, test_hi) = band(&series.x.select_rows(&test_idx))?;
        let mut rows = Vec::with_capacity(2 * test_idx.len());
        let (mut cqr_ivs, mut aci_ivs, mut truths) = (Vec::new(), Vec::new(), Vec::new());
        for (k, &t) in test_idx.iter().enumerate() {
            let y = series.y[t];
            let pair = QuantilePair::new(vec![test_lo.get(k, 0)], vec![test_hi.get(k, 0)])?;
            let c = cqr.predict(&pair)?;
            let a = aci.step(AciBase::Quantiles(&pair), &[y])?;
            for (method, iv) in [("CQR", &c), ("ACI", &a)] {
                let (lo, hi) = interval_bounds(iv);
                rows.push(TimeSeriesRow {
                    trial,
                    t,
                    method: method.into(),
                    lo,
                    hi,
                    y,
                    covered: iv.contains(&[y]),
                });
            }
            cqr_ivs.push(c);
            aci_ivs.push(a);
            truths.push(vec![y]);
        }
        let summary = [("CQR", &cqr_ivs), ("ACI", &aci_ivs)]
            .into_iter()
            .map(|(method, ivs)| {
                Ok(TimeSeriesSummary {
                    trial,
                    method: method.into(),
                    coverage: coverage_rate(ivs, &truths)?,
                    width: average_width(ivs)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(TimeSeriesOutcome { rows, summary })
    }

    pub fn run(&self) -> Result<TimeSeriesOutcome> {
        let outcomes: Vec<Result<TimeSeriesOutcome>> = (0..self.trials)
            .into_par_iter()
            .map(|t| self.run_trial(t))
            .collect();
        let mut all = TimeSeriesOutcome {
            rows: Vec::new(),
            summary: Vec::new(),
        };
        for o in outcomes {
            let o = o?;
            all.rows.extend(o.rows);
            all.summary.extend(o.summary);
        }
        Ok(all)
    }
}

/// Bounds of a one-dimensional interval; empty intervals report `(nan, nan)`.
fn interval_bounds(iv: &PredictionInterval) -> (f64, f64) {
    if iv.empty {
        (f64::NAN, f64::NAN)
    } else {
        (iv.dims[0].lo, iv.dims[0].hi)
    }
}

/// Mean coverage of `method` across trials.
pub fn mean_coverage(summary: &[TimeSeriesSummary], method: &str) -> f64 {
    let v: Vec<f64> = summary
        .iter()
        .filter(|s| s.method == method)
        .map(|s| s.coverage)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}
