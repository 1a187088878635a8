//! Classification predictors: calibrate a threshold on held-out logits, then
//! turn test logits into prediction sets.

mod cluster;
pub mod kmeans;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cluster::ClusterConfig;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::quantile::{conformal_quantile, weighted_conformal_quantile, Alpha};
use crate::scores::{score_all_unchecked, score_batch, ProbabilityMatrix, ScoreConfig};
use crate::sets::PredictionSet;
use crate::threshold::CalibratedThreshold;

/// Offset added to test-row indices when drawing score noise, keeping test
/// draws independent of calibration draws under the same seed.
pub const PREDICT_STREAM_OFFSET: u64 = 1 << 40;

/// Temperature-scaling parameter, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(t: f64) -> Result<Self> {
        if t.is_finite() && t > 0.0 {
            Ok(Self(t))
        } else {
            Err(Error::Config(format!(
                "temperature must be positive and finite, got {t}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Temperature {
    fn default() -> Self {
        Self(1.0)
    }
}

impl TryFrom<f64> for Temperature {
    type Error = Error;

    fn try_from(t: f64) -> Result<Self> {
        Temperature::new(t)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

/// Softmax of `logits / t` with max-subtraction.
pub fn softmax_with_temperature(logits: &[f64], temperature: Temperature) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::input("empty logit row"));
    }
    if let Some(z) = logits.iter().find(|z| !z.is_finite()) {
        return Err(Error::input(format!("non-finite logit {z}")));
    }
    Ok(softmax_unchecked(logits, temperature.value()))
}

pub(crate) fn softmax_unchecked(logits: &[f64], t: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| ((z - max) / t).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// Applies temperature softmax to every row of a logit matrix.
pub fn logits_to_probabilities(
    logits: &Matrix,
    temperature: Temperature,
) -> Result<ProbabilityMatrix> {
    let mut probs = Matrix::zeros(logits.rows(), logits.cols());
    for i in 0..logits.rows() {
        let row = softmax_with_temperature(logits.row(i), temperature)
            .map_err(|e| Error::input(format!("logit row {i}: {e}")))?;
        probs.row_mut(i).copy_from_slice(&row);
    }
    ProbabilityMatrix::new(probs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Split,
    ClassWise,
    Cluster,
    Weighted,
}

impl PredictorKind {
    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::Split => "Split",
            PredictorKind::ClassWise => "ClassWise",
            PredictorKind::Cluster => "Cluster",
            PredictorKind::Weighted => "Weighted",
        }
    }
}

impl std::str::FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "split" => Ok(PredictorKind::Split),
            "classwise" => Ok(PredictorKind::ClassWise),
            "cluster" => Ok(PredictorKind::Cluster),
            "weighted" => Ok(PredictorKind::Weighted),
            other => Err(Error::Config(format!("unknown predictor '{other}'"))),
        }
    }
}

/// Maps an instance, seen as its logit row, to a likelihood-ratio weight.
pub type WeightFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    pub score: ScoreConfig,
    #[serde(default)]
    pub temperature: Temperature,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(skip)]
    pub weight_fn: Option<WeightFn>,
}

impl fmt::Debug for PredictorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredictorConfig")
            .field("kind", &self.kind)
            .field("score", &self.score)
            .field("temperature", &self.temperature)
            .field("cluster", &self.cluster)
            .field("weight_fn", &self.weight_fn.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl PredictorConfig {
    pub fn new(kind: PredictorKind, score: ScoreConfig) -> Self {
        Self {
            kind,
            score,
            temperature: Temperature::default(),
            cluster: ClusterConfig::default(),
            weight_fn: None,
        }
    }

    pub fn with_temperature(mut self, temperature: Temperature) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_cluster(mut self, cluster: ClusterConfig) -> Self {
        self.cluster = cluster;
        self
    }

    pub fn with_weight_fn(mut self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.weight_fn = Some(Arc::new(f));
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibratedPredictor {
    pub config: PredictorConfig,
    pub threshold: CalibratedThreshold,
    pub alpha: Alpha,
    pub num_classes: usize,
}

fn check_labels(labels: &[usize], rows: usize, num_classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::input(format!(
            "{} label(s) for {rows} logit row(s)",
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::input(format!(
            "label {bad} outside universe of {num_classes} classes"
        )));
    }
    Ok(())
}

/// Calibrates `config` on precomputed logits. Weighted predictors draw their
/// calibration weights from `config.weight_fn`.
pub fn calculate_threshold(
    config: &PredictorConfig,
    cal_logits: &Matrix,
    cal_labels: &[usize],
    alpha: Alpha,
) -> Result<CalibratedPredictor> {
    let weights = match config.kind {
        PredictorKind::Weighted => {
            let f = config.weight_fn.as_ref().ok_or_else(|| {
                Error::Config("weighted predictor requires a weight function".into())
            })?;
            Some(cal_logits.iter_rows().map(|r| f(r)).collect::<Vec<_>>())
        }
        _ => None,
    };
    calibrate_inner(config, cal_logits, cal_labels, weights, alpha)
}

/// Calibrates a weighted predictor from explicit per-item weights.
pub fn calculate_threshold_with_weights(
    config: &PredictorConfig,
    cal_logits: &Matrix,
    cal_labels: &[usize],
    cal_weights: &[f64],
    alpha: Alpha,
) -> Result<CalibratedPredictor> {
    if config.kind != PredictorKind::Weighted {
        return Err(Error::Config(format!(
            "{} predictor does not take calibration weights",
            config.kind.name()
        )));
    }
    calibrate_inner(
        config,
        cal_logits,
        cal_labels,
        Some(cal_weights.to_vec()),
        alpha,
    )
}

fn calibrate_inner(
    config: &PredictorConfig,
    cal_logits: &Matrix,
    cal_labels: &[usize],
    weights: Option<Vec<f64>>,
    alpha: Alpha,
) -> Result<CalibratedPredictor> {
    if cal_logits.rows() == 0 {
        return Err(Error::input("empty calibration set"));
    }
    let num_classes = cal_logits.cols();
    check_labels(cal_labels, cal_logits.rows(), num_classes)?;
    config.score.validate(num_classes)?;

    let probs = logits_to_probabilities(cal_logits, config.temperature)?;
    let scores = score_batch(&config.score, &probs, cal_labels, 0)?.into_inner();

    let threshold = match config.kind {
        PredictorKind::Split => CalibratedThreshold::Scalar {
            value: conformal_quantile(&scores, alpha)?,
        },
        PredictorKind::ClassWise => {
            let mut by_class: Vec<Vec<f64>> = vec![Vec::new(); num_classes];
            for (&s, &y) in scores.iter().zip(cal_labels) {
                by_class[y].push(s);
            }
            let values = by_class
                .iter()
                .map(|s| {
                    if s.is_empty() {
                        Ok(f64::INFINITY)
                    } else {
                        conformal_quantile(s, alpha)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            CalibratedThreshold::PerClass { values }
        }
        PredictorKind::Cluster => {
            cluster::calibrate(&config.cluster, &scores, cal_labels, num_classes, alpha)?
        }
        PredictorKind::Weighted => {
            let weights = weights.ok_or_else(|| {
                Error::Config("weighted predictor requires calibration weights".into())
            })?;
            if weights.len() != scores.len() {
                return Err(Error::input(format!(
                    "{} weight(s) for {} calibration item(s)",
                    weights.len(),
                    scores.len()
                )));
            }
            // Validates weights up front rather than at the first prediction.
            weighted_conformal_quantile(&scores, &weights, 1.0, alpha)?;
            let mut order: Vec<usize> = (0..scores.len()).collect();
            order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
            CalibratedThreshold::Weighted {
                scores: order.iter().map(|&i| scores[i]).collect(),
                weights: order.iter().map(|&i| weights[i]).collect(),
            }
        }
    };

    Ok(CalibratedPredictor {
        config: config.clone(),
        threshold,
        alpha,
        num_classes,
    })
}

impl CalibratedPredictor {
    /// Prediction sets for test logits: `{y : score(x, y) <= q̂(y)}`.
    ///
    /// Weighted predictors need one weight per test row, taken from
    /// `test_weights` or else from the configured weight function.
    pub fn predict_with_logits(
        &self,
        test_logits: &Matrix,
        test_weights: Option<&[f64]>,
    ) -> Result<Vec<PredictionSet>> {
        if test_logits.cols() != self.num_classes {
            return Err(Error::input(format!(
                "test logits have {} columns, predictor was calibrated on {} classes",
                test_logits.cols(),
                self.num_classes
            )));
        }
        let row_weights: Option<Vec<f64>> = match (&self.threshold, test_weights) {
            (CalibratedThreshold::Weighted { .. }, Some(w)) => {
                if w.len() != test_logits.rows() {
                    return Err(Error::input(format!(
                        "{} test weight(s) for {} test row(s)",
                        w.len(),
                        test_logits.rows()
                    )));
                }
                Some(w.to_vec())
            }
            (CalibratedThreshold::Weighted { .. }, None) => match &self.config.weight_fn {
                Some(f) => Some(test_logits.iter_rows().map(|r| f(r)).collect()),
                None => return Err(Error::input("weighted predictor requires test weights")),
            },
            _ => None,
        };

        (0..test_logits.rows())
            .map(|i| {
                let probs = softmax_with_temperature(test_logits.row(i), self.config.temperature)?;
                let u = self.config.score.noise(PREDICT_STREAM_OFFSET + i as u64);
                let scores = score_all_unchecked(&self.config.score, &probs, u);
                let weight = row_weights.as_ref().map(|w| w[i]);
                self.set_from_scores(&scores, weight)
            })
            .collect()
    }

    fn set_from_scores(&self, scores: &[f64], test_weight: Option<f64>) -> Result<PredictionSet> {
        let members = match &self.threshold {
            CalibratedThreshold::Scalar { value } => {
                (0..scores.len()).filter(|&k| scores[k] <= *value).collect()
            }
            CalibratedThreshold::PerClass { values } => (0..scores.len())
                .filter(|&k| scores[k] <= values[k])
                .collect(),
            CalibratedThreshold::PerCluster {
                class_to_cluster,
                values,
                fallback,
            } => (0..scores.len())
                .filter(|&k| {
                    let q = class_to_cluster[k].map_or(*fallback, |c| values[c]);
                    scores[k] <= q
                })
                .collect(),
            CalibratedThreshold::Weighted {
                scores: cal,
                weights,
            } => {
                let w = test_weight.ok_or_else(|| Error::input("missing test weight"))?;
                let q = weighted_conformal_quantile(cal, weights, w, self.alpha)?;
                (0..scores.len()).filter(|&k| scores[k] <= q).collect()
            }
        };
        Ok(PredictionSet::from_sorted(members))
    }
}

/// Calibrate/predict pair over a caller-supplied model mapping an instance to logits.
pub struct Predictor<M> {
    config: PredictorConfig,
    model: M,
    calibrated: Option<CalibratedPredictor>,
}

impl<M> Predictor<M> {
    pub fn new(config: PredictorConfig, model: M) -> Self {
        Self {
            config,
            model,
            calibrated: None,
        }
    }

    pub fn calibrated(&self) -> Option<&CalibratedPredictor> {
        self.calibrated.as_ref()
    }

    fn logits<X>(&self, inputs: &[X]) -> Result<Matrix>
    where
        M: Fn(&X) -> Vec<f64>,
    {
        let rows: Vec<Vec<f64>> = inputs.iter().map(&self.model).collect();
        Matrix::from_rows(&rows)
    }

    pub fn calibrate<X>(
        &mut self,
        inputs: &[X],
        labels: &[usize],
        alpha: Alpha,
    ) -> Result<&CalibratedPredictor>
    where
        M: Fn(&X) -> Vec<f64>,
    {
        let logits = self.logits(inputs)?;
        let calibrated = calculate_threshold(&self.config, &logits, labels, alpha)?;
        Ok(self.calibrated.insert(calibrated))
    }

    pub fn predict<X>(&self, inputs: &[X]) -> Result<Vec<PredictionSet>>
    where
        M: Fn(&X) -> Vec<f64>,
    {
        let calibrated = self.calibrated.as_ref().ok_or(Error::NotCalibrated)?;
        calibrated.predict_with_logits(&self.logits(inputs)?, None)
    }
}
