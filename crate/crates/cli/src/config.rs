//! Run configuration: a JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};

use conformal_core::classification::{ClusterConfig, PredictorKind};
use conformal_core::scores::ScoreConfig;
use conformal_core::synth::{ArmaConfig, SyntheticClassificationConfig};
use conformal_core::Alpha;
use serde::{Deserialize, Serialize};

use crate::bench::{ClassificationBench, TimeSeriesBench};
use crate::error::{CliError, CliResult};
use crate::io::read_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionMethod {
    Split,
    Cqr,
}

/// Input files. Relative paths in a config file resolve against its directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub logits: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Calibration weights when calibrating, test weights when predicting.
    pub weights: Option<PathBuf>,
    pub artifact: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    /// Point predictions for split regression.
    pub point: Option<PathBuf>,
    pub lower: Option<PathBuf>,
    pub upper: Option<PathBuf>,
}

impl Inputs {
    fn paths_mut(&mut self) -> [&mut Option<PathBuf>; 9] {
        [
            &mut self.logits,
            &mut self.labels,
            &mut self.weights,
            &mut self.artifact,
            &mut self.predictions,
            &mut self.targets,
            &mut self.point,
            &mut self.lower,
            &mut self.upper,
        ]
    }

    fn rebase(&mut self, base: &Path) {
        for p in self.paths_mut().into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn require(&self, path: &Option<PathBuf>, name: &str) -> CliResult<PathBuf> {
        path.clone().ok_or_else(|| {
            CliError::input(format!(
                "missing input: {name} (set --{name} or inputs.{name})"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    #[default]
    Classification,
    Timeseries,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub kind: GenKind,
    pub classification: SyntheticClassificationConfig,
    /// Geometric prior ratio applied to `classification` when set.
    pub imbalance_ratio: Option<f64>,
    pub timeseries: ArmaConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    /// One level for calibrate and eval; a grid for the benchmarks.
    pub alpha: Option<Vec<f64>>,
    pub seed: u64,
    pub trials: Option<usize>,
    /// Score function and hyperparameters. When set at predict time it must
    /// match the artifact.
    pub score: Option<ScoreConfig>,
    /// `split`, `class_wise`, `cluster`, `weighted`, or `split`/`cqr` for regression.
    pub predictor: Option<String>,
    pub temperature: f64,
    pub cluster: ClusterConfig,
    pub gamma: Option<f64>,
    /// Number of classes for `eval` without an artifact; inferred when absent.
    pub num_classes: Option<usize>,
    pub inputs: Inputs,
    pub out: PathBuf,
    pub bench_classification: ClassificationBench,
    pub bench_timeseries: TimeSeriesBench,
    pub gen: GenConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: Task::Classification,
            alpha: None,
            seed: 0,
            trials: None,
            score: None,
            predictor: None,
            temperature: 1.0,
            cluster: ClusterConfig::default(),
            gamma: None,
            num_classes: None,
            inputs: Inputs::default(),
            out: PathBuf::from("out"),
            bench_classification: ClassificationBench::default(),
            bench_timeseries: TimeSeriesBench::default(),
            gen: GenConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let mut config: RunConfig = read_json(path)?;
        if let Some(base) = path.parent() {
            config.inputs.rebase(base);
            if config.out.is_relative() && !base.as_os_str().is_empty() {
                config.out = base.join(&config.out);
            }
        }
        Ok(config)
    }

    /// Checks α values and that every referenced input exists.
    pub fn validate(&mut self) -> CliResult<()> {
        for &a in self.alpha.iter().flatten() {
            Alpha::new(a)?;
        }
        if matches!(&self.alpha, Some(v) if v.is_empty()) {
            return Err(CliError::input("alpha list is empty"));
        }
        for p in self.inputs.paths_mut().into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::input(format!("{}: no such file", p.display())));
            }
        }
        Ok(())
    }

    /// The single level used by calibrate and eval; defaults to 0.1.
    pub fn single_alpha(&self) -> CliResult<Alpha> {
        match self.alpha.as_deref() {
            None => Ok(Alpha::new(0.1)?),
            Some([a]) => Ok(Alpha::new(*a)?),
            Some(v) => Err(CliError::input(format!(
                "expected a single alpha, got {}",
                v.len()
            ))),
        }
    }

    pub fn predictor_kind(&self) -> CliResult<PredictorKind> {
        Ok(self.predictor.as_deref().unwrap_or("split").parse()?)
    }

    pub fn regression_method(&self) -> CliResult<RegressionMethod> {
        match self
            .predictor
            .as_deref()
            .unwrap_or("split")
            .to_ascii_lowercase()
            .as_str()
        {
            "split" => Ok(RegressionMethod::Split),
            "cqr" => Ok(RegressionMethod::Cqr),
            other => Err(CliError::input(format!(
                "unknown regression predictor '{other}'"
            ))),
        }
    }

    pub fn score_config(&self) -> ScoreConfig {
        let mut score = self.score.unwrap_or_default();
        score.rng_seed = self.seed;
        score
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn file_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("l.csv"), "1,2\n").unwrap();
        let cfg_path = dir.path().join("run.json");
        fs::write(
            &cfg_path,
            r#"{"alpha": [0.2], "inputs": {"logits": "l.csv"}, "score": {"kind": "APS"}}"#,
        )
        .unwrap();
        let mut cfg = RunConfig::from_file(&cfg_path).unwrap();
        cfg.validate().unwrap();
        assert_eq!(
            cfg.inputs.logits.as_deref(),
            Some(dir.path().join("l.csv").as_path())
        );
        assert_eq!(cfg.single_alpha().unwrap().value(), 0.2);
        assert_eq!(cfg.score.unwrap().raps_penalty, 1.0);
    }

    #[test]
    fn validation_rejects_bad_alpha_and_missing_paths() {
        let mut cfg = RunConfig {
            alpha: Some(vec![0.1, 1.0]),
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.inputs.labels = Some(PathBuf::from("/definitely/missing.csv"));
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("/definitely/missing.csv"));
    }

    #[test]
    fn unknown_fields_are_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, "{\n  \"alpha\": [0.1],\n  \"bogus\": 1\n}").unwrap();
        assert!(matches!(
            RunConfig::from_file(&p).unwrap_err(),
            CliError::Parse { line: 3, .. }
        ));
    }

    #[test]
    fn defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.single_alpha().unwrap().value(), 0.1);
        assert_eq!(cfg.predictor_kind().unwrap(), PredictorKind::Split);
        assert_eq!(cfg.regression_method().unwrap(), RegressionMethod::Split);
        assert_eq!(cfg.bench_timeseries.gamma, 0.03);
        assert_eq!(cfg.bench_classification.trials, 5);
        assert!(RunConfig {
            alpha: Some(vec![0.1, 0.2]),
            ..cfg
        }
        .single_alpha()
        .is_err());
    }
}
