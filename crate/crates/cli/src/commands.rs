//! The subcommands, each driven by a validated [`RunConfig`].

use std::path::PathBuf;

use conformal_core::classification::{
    calculate_threshold, calculate_threshold_with_weights, CalibratedPredictor, PredictorConfig,
    PredictorKind, Temperature,
};
use conformal_core::metrics::EvaluationReport;
use conformal_core::regression::{CqrRegressor, QuantilePair, SplitRegressor};
use conformal_core::synth::{generate_classification, generate_time_series, geometric_priors};
use conformal_core::{Matrix, PredictionInterval};
use log::info;
use serde::{Deserialize, Serialize};

use crate::bench::mean_over_trials;
use crate::config::{GenKind, RegressionMethod, RunConfig, Task};
use crate::error::{CliError, CliResult};
use crate::io::{
    read_interval_predictions, read_json, read_labels, read_matrix, read_set_predictions,
    read_vector, write_csv, write_interval_predictions, write_json, write_labels, write_lines,
    write_matrix, write_set_predictions,
};

pub const ARTIFACT_FILE: &str = "threshold.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const BENCH_CLASSIFICATION_FILE: &str = "bench_classification.csv";
pub const BENCH_CLASSIFICATION_SUMMARY: &str = "bench_classification_summary.csv";
pub const BENCH_TIMESERIES_FILE: &str = "bench_timeseries.csv";
pub const BENCH_TIMESERIES_SUMMARY: &str = "bench_timeseries_summary.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum RegressionArtifact {
    Split(SplitRegressor),
    Cqr(CqrRegressor),
}

/// Everything needed to rebuild a calibrated predictor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Artifact {
    Classification {
        seed: u64,
        predictor: CalibratedPredictor,
    },
    Regression {
        seed: u64,
        regressor: RegressionArtifact,
    },
}

fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    config.out.join(name)
}

fn predictor_config(config: &RunConfig) -> CliResult<PredictorConfig> {
    Ok(
        PredictorConfig::new(config.predictor_kind()?, config.score_config())
            .with_temperature(Temperature::new(config.temperature)?)
            .with_cluster(config.cluster.clone()),
    )
}

fn read_pair(config: &RunConfig) -> CliResult<(Matrix, Matrix)> {
    let lo = read_matrix(&config.inputs.require(&config.inputs.lower, "lower")?)?;
    let hi = read_matrix(&config.inputs.require(&config.inputs.upper, "upper")?)?;
    Ok((lo, hi))
}

pub fn calibrate(config: &RunConfig) -> CliResult<PathBuf> {
    let inputs = &config.inputs;
    let alpha = config.single_alpha()?;
    let artifact = match config.task {
        Task::Classification => {
            let logits = read_matrix(&inputs.require(&inputs.logits, "logits")?)?;
            let labels = read_labels(&inputs.require(&inputs.labels, "labels")?)?;
            let pc = predictor_config(config)?;
            let predictor = if pc.kind == PredictorKind::Weighted {
                let weights = read_vector(&inputs.require(&inputs.weights, "weights")?)?;
                calculate_threshold_with_weights(&pc, &logits, &labels, &weights, alpha)?
            } else {
                calculate_threshold(&pc, &logits, &labels, alpha)?
            };
            info!(
                "calibrated {} threshold on {} items",
                predictor.threshold.kind_name(),
                labels.len()
            );
            Artifact::Classification {
                seed: config.seed,
                predictor,
            }
        }
        Task::Regression => {
            let targets = read_matrix(&inputs.require(&inputs.targets, "targets")?)?;
            let regressor = match config.regression_method()? {
                RegressionMethod::Split => {
                    let point = read_matrix(&inputs.require(&inputs.point, "point")?)?;
                    RegressionArtifact::Split(SplitRegressor::calibrate(&point, &targets, alpha)?)
                }
                RegressionMethod::Cqr => {
                    let (lo, hi) = read_pair(config)?;
                    RegressionArtifact::Cqr(CqrRegressor::calibrate(&lo, &hi, &targets, alpha)?)
                }
            };
            Artifact::Regression {
                seed: config.seed,
                regressor,
            }
        }
    };
    let path = out_path(config, ARTIFACT_FILE);
    write_json(&path, &artifact)?;
    Ok(path)
}

fn load_artifact(config: &RunConfig) -> CliResult<Artifact> {
    read_json(&config.inputs.require(&config.inputs.artifact, "artifact")?)
}

fn check_matches(config: &RunConfig, predictor: &CalibratedPredictor) -> CliResult<()> {
    if let Some(score) = &config.score {
        let stored = &predictor.config.score;
        let mut wanted = *score;
        wanted.rng_seed = stored.rng_seed;
        if wanted != *stored {
            return Err(CliError::input(format!(
                "score config {:?} does not match the artifact's {:?}",
                score, stored
            )));
        }
    }
    if config.predictor.is_some() && config.predictor_kind()? != predictor.config.kind {
        return Err(CliError::input(format!(
            "predictor {} does not match the artifact's {}",
            config.predictor_kind()?.name(),
            predictor.config.kind.name()
        )));
    }
    Ok(())
}

pub fn predict(config: &RunConfig) -> CliResult<PathBuf> {
    let inputs = &config.inputs;
    let path = out_path(config, PREDICTIONS_FILE);
    match load_artifact(config)? {
        Artifact::Classification { predictor, .. } => {
            check_matches(config, &predictor)?;
            let logits = read_matrix(&inputs.require(&inputs.logits, "logits")?)?;
            let weights = inputs
                .weights
                .as_ref()
                .map(|p| read_vector(p))
                .transpose()?;
            let sets = predictor.predict_with_logits(&logits, weights.as_deref())?;
            write_set_predictions(&path, &sets)?;
        }
        Artifact::Regression { regressor, .. } => {
            let intervals = match regressor {
                RegressionArtifact::Split(r) => {
                    let point = read_matrix(&inputs.require(&inputs.point, "point")?)?;
                    point
                        .iter_rows()
                        .map(|p| r.predict(p))
                        .collect::<Result<Vec<_>, _>>()?
                }
                RegressionArtifact::Cqr(r) => {
                    let (lo, hi) = read_pair(config)?;
                    if lo.rows() != hi.rows() {
                        return Err(CliError::input("lower and upper files differ in length"));
                    }
                    lo.iter_rows()
                        .zip(hi.iter_rows())
                        .map(|(l, h)| r.predict(&QuantilePair::new(l.to_vec(), h.to_vec())?))
                        .collect::<Result<Vec<_>, _>>()?
                }
            };
            write_interval_predictions(&path, &intervals)?;
        }
    }
    Ok(path)
}

/// Rows of a matrix as owned vectors, for interval coverage checks.
fn row_vectors(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

pub fn eval(config: &RunConfig) -> CliResult<EvaluationReport> {
    let inputs = &config.inputs;
    let predictions = inputs.require(&inputs.predictions, "predictions")?;
    let artifact = inputs
        .artifact
        .as_ref()
        .map(|_| load_artifact(config))
        .transpose()?;
    let task = match &artifact {
        Some(Artifact::Classification { .. }) => Task::Classification,
        Some(Artifact::Regression { .. }) => Task::Regression,
        None => config.task,
    };
    let report = match task {
        Task::Classification => {
            let labels = read_labels(&inputs.require(&inputs.labels, "labels")?)?;
            let (alpha, num_classes) = match &artifact {
                Some(Artifact::Classification { predictor, .. }) => {
                    (predictor.alpha, predictor.num_classes)
                }
                _ => {
                    let k = match config.num_classes {
                        Some(k) => k,
                        None => infer_num_classes(&predictions, &labels)?,
                    };
                    (config.single_alpha()?, k)
                }
            };
            let sets = read_set_predictions(&predictions, num_classes)?;
            EvaluationReport::classification(&sets, &labels, alpha, num_classes)?
        }
        Task::Regression => {
            let targets = read_matrix(&inputs.require(&inputs.targets, "targets")?)?;
            let intervals: Vec<PredictionInterval> =
                read_interval_predictions(&predictions, targets.cols())?;
            EvaluationReport::regression(&intervals, &row_vectors(&targets))?
        }
    };
    write_json(&out_path(config, REPORT_JSON), &report)?;
    write_lines(&out_path(config, REPORT_CSV), |w| {
        writeln!(w, "coverage_rate,average_size,average_width,cov_gap,n_test")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{}",
            report.coverage_rate,
            opt(report.average_size),
            opt(report.average_width),
            opt(report.cov_gap),
            report.n_test
        )
    })?;
    Ok(report)
}

/// Largest label seen in either file, plus one.
fn infer_num_classes(predictions: &std::path::Path, labels: &[usize]) -> CliResult<usize> {
    let sets = read_set_predictions(predictions, usize::MAX)?;
    let max_member = sets
        .iter()
        .filter_map(|s| s.members().last().copied())
        .max();
    let max_label = labels.iter().copied().max();
    Ok(max_member.max(max_label).map_or(1, |m| m + 1))
}

pub fn bench_classification(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let mut bench = config.bench_classification.clone();
    bench.seed = config.seed;
    if let Some(a) = &config.alpha {
        bench.alphas = a.clone();
    }
    if let Some(t) = config.trials {
        bench.trials = t;
    }
    if let Some(s) = &config.score {
        bench.scores = vec![s.kind];
        bench.score = *s;
    }
    if config.predictor.is_some() {
        bench.predictors = vec![config.predictor_kind()?];
    }
    let data = match (&config.inputs.logits, &config.inputs.labels) {
        (Some(l), Some(y)) => Some((read_matrix(l)?, read_labels(y)?)),
        (None, None) => None,
        _ => return Err(CliError::input("user data needs both logits and labels")),
    };
    let rows = bench.run(data.as_ref().map(|(l, y)| (l, y.as_slice())))?;
    info!("bench-classification produced {} rows", rows.len());

    #[derive(Serialize)]
    struct SummaryRow {
        score: String,
        predictor: String,
        alpha: f64,
        coverage: f64,
        size: f64,
        covgap: f64,
    }
    let cov = mean_over_trials(&rows, |r| r.coverage);
    let size = mean_over_trials(&rows, |r| r.size);
    let gap = mean_over_trials(&rows, |r| r.covgap);
    let summary: Vec<SummaryRow> = cov
        .into_iter()
        .zip(size)
        .zip(gap)
        .map(|(((score, predictor, alpha, coverage), s), g)| SummaryRow {
            score,
            predictor,
            alpha,
            coverage,
            size: s.3,
            covgap: g.3,
        })
        .collect();

    let paths = vec![
        out_path(config, BENCH_CLASSIFICATION_FILE),
        out_path(config, BENCH_CLASSIFICATION_SUMMARY),
    ];
    write_csv(&paths[0], &rows)?;
    write_csv(&paths[1], &summary)?;
    Ok(paths)
}

pub fn bench_timeseries(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let mut bench = config.bench_timeseries.clone();
    bench.seed = config.seed;
    if config.alpha.is_some() {
        bench.alpha = config.single_alpha()?.value();
    }
    if let Some(g) = config.gamma {
        bench.gamma = g;
    }
    if let Some(t) = config.trials {
        bench.trials = t;
    }
    let outcome = bench.run()?;
    for s in &outcome.summary {
        info!(
            "trial {} {}: coverage {:.3}, width {:.3}",
            s.trial, s.method, s.coverage, s.width
        );
    }
    let paths = vec![
        out_path(config, BENCH_TIMESERIES_FILE),
        out_path(config, BENCH_TIMESERIES_SUMMARY),
    ];
    write_csv(&paths[0], &outcome.rows)?;
    write_csv(&paths[1], &outcome.summary)?;
    Ok(paths)
}

pub fn gen_data(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let gen = &config.gen;
    match gen.kind {
        GenKind::Classification => {
            let mut c = gen.classification.clone();
            c.seed = config.seed;
            if let Some(r) = gen.imbalance_ratio {
                c.class_priors = Some(geometric_priors(c.num_classes, r));
            }
            let (logits, labels) = generate_classification(&c)?;
            let paths = vec![
                out_path(config, "logits.csv"),
                out_path(config, "labels.csv"),
            ];
            write_matrix(&paths[0], &logits)?;
            write_labels(&paths[1], &labels)?;
            Ok(paths)
        }
        GenKind::Timeseries => {
            let mut a = gen.timeseries.clone();
            a.seed = config.seed;
            let series = generate_time_series(&a)?;
            let column = |v: &[f64]| Matrix::from_vec(v.len(), 1, v.to_vec());
            let paths = vec![
                out_path(config, "features.csv"),
                out_path(config, "targets.csv"),
                out_path(config, "noise.csv"),
            ];
            write_matrix(&paths[0], &series.x)?;
            write_matrix(&paths[1], &column(&series.y)?)?;
            write_matrix(&paths[2], &column(&series.noise)?)?;
            Ok(paths)
        }
    }
}
