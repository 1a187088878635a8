//! Clustered per-class calibration.
//!
//! Each class with enough calibration items is embedded as the vector of its
//! score quantiles; classes are grouped with k-means and each group shares one
//! conformal threshold computed on its pooled scores. Thin classes fall back
//! to the marginal threshold over all scores.

use serde::{Deserialize, Serialize};

use super::kmeans::kmeans;
use crate::error::{Error, Result};
use crate::quantile::{conformal_quantile, Alpha};
use crate::threshold::CalibratedThreshold;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    /// `None` picks ⌊eligible classes / 2⌋ clamped to [1, 10].
    pub num_clusters: Option<usize>,
    pub quantile_levels: Vec<f64>,
    pub min_class_count: usize,
    pub kmeans_iters: usize,
    pub kmeans_seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            num_clusters: None,
            quantile_levels: vec![0.5, 0.6, 0.7, 0.8, 0.9],
            min_class_count: 20,
            kmeans_iters: 100,
            kmeans_seed: 0,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quantile_levels.is_empty()
            || self.quantile_levels.iter().any(|q| !(*q > 0.0 && *q < 1.0))
            || self.quantile_levels.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(
                "cluster quantile levels must be strictly increasing values in (0, 1)".into(),
            ));
        }
        if self.min_class_count == 0 {
            return Err(Error::Config("min_class_count must be at least 1".into()));
        }
        if self.num_clusters == Some(0) {
            return Err(Error::Config("num_clusters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Linear-interpolation empirical quantile of sorted data.
pub(crate) fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    let pos = level * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub(crate) fn calibrate(
    config: &ClusterConfig,
    scores: &[f64],
    labels: &[usize],
    num_classes: usize,
    alpha: Alpha,
) -> Result<CalibratedThreshold> {
    config.validate()?;
    let fallback = conformal_quantile(scores, alpha)?;

    let mut by_class: Vec<Vec<f64>> = vec![Vec::new(); num_classes];
    for (&s, &y) in scores.iter().zip(labels) {
        by_class[y].push(s);
    }
    let eligible: Vec<usize> = (0..num_classes)
        .filter(|&k| by_class[k].len() >= config.min_class_count)
        .collect();

    let mut class_to_cluster = vec![None; num_classes];
    if eligible.is_empty() {
        return Ok(CalibratedThreshold::PerCluster {
            class_to_cluster,
            values: Vec::new(),
            fallback,
        });
    }

    let k = config
        .num_clusters
        .unwrap_or_else(|| (eligible.len() / 2).clamp(1, 10))
        .min(eligible.len());
    let embeddings: Vec<Vec<f64>> = eligible
        .iter()
        .map(|&c| {
            let mut sorted = by_class[c].clone();
            sorted.sort_by(f64::total_cmp);
            config
                .quantile_levels
                .iter()
                .map(|&q| empirical_quantile(&sorted, q))
                .collect()
        })
        .collect();
    let clustering = kmeans(&embeddings, k, config.kmeans_iters, config.kmeans_seed)?;

    let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (&class, &cluster) in eligible.iter().zip(&clustering.assignments) {
        class_to_cluster[class] = Some(cluster);
        pooled[cluster].extend_from_slice(&by_class[class]);
    }
    let values = pooled
        .iter()
        .map(|s| {
            if s.is_empty() {
                Ok(fallback)
            } else {
                conformal_quantile(s, alpha)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibratedThreshold::PerCluster {
        class_to_cluster,
        values,
        fallback,
    })
}
