use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use conformal_core::scores::{ScoreConfig, ScoreKind};
use conformal_kit::commands;
use conformal_kit::config::{RunConfig, Task};
use conformal_kit::error::CliResult;

#[derive(Parser)]
#[command(
    name = "conformal-kit",
    version,
    about = "Conformal prediction: calibrate, predict, evaluate, benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a threshold artifact from calibration data.
    Calibrate(Common),
    /// Emit prediction sets or intervals from an artifact.
    Predict(Common),
    /// Score predictions against ground truth.
    Eval(Common),
    /// Sweep scores x predictors x alpha over trials.
    BenchClassification(Common),
    /// CQR and ACI on an ARMA-noise series.
    BenchTimeseries(Common),
    /// Write synthetic classification logits or a time series.
    GenData(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Miscoverage level(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// THR, APS, RAPS, SAPS or Margin.
    #[arg(long)]
    score: Option<ScoreKind>,
    /// split, class_wise, cluster, weighted; split or cqr for regression.
    #[arg(long)]
    predictor: Option<String>,
    /// ACI step size.
    #[arg(long)]
    gamma: Option<f64>,
    /// classification or regression.
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    #[arg(long)]
    logits: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    artifact: Option<PathBuf>,
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long)]
    point: Option<PathBuf>,
    #[arg(long)]
    lower: Option<PathBuf>,
    #[arg(long)]
    upper: Option<PathBuf>,
}

fn parse_task(s: &str) -> Result<Task, String> {
    match s {
        "classification" => Ok(Task::Classification),
        "regression" => Ok(Task::Regression),
        other => Err(format!("unknown task '{other}'")),
    }
}

impl Common {
    fn into_config(self) -> CliResult<RunConfig> {
        let mut config = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = Some(v); })*
            };
        }
        set!(
            alpha => config.alpha,
            trials => config.trials,
            predictor => config.predictor,
            gamma => config.gamma,
            logits => config.inputs.logits,
            labels => config.inputs.labels,
            weights => config.inputs.weights,
            artifact => config.inputs.artifact,
            predictions => config.inputs.predictions,
            targets => config.inputs.targets,
            point => config.inputs.point,
            lower => config.inputs.lower,
            upper => config.inputs.upper,
        );
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = self.out {
            config.out = out;
        }
        if let Some(task) = self.task {
            config.task = task;
        }
        if let Some(kind) = self.score {
            config.score = Some(ScoreConfig {
                kind,
                ..config.score.unwrap_or_default()
            });
        }
        config.validate()?;
        Ok(config)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let print_paths = |paths: Vec<PathBuf>| paths.iter().for_each(|p| println!("{}", p.display()));
    match cli.command {
        Command::Calibrate(c) => println!("{}", commands::calibrate(&c.into_config()?)?.display()),
        Command::Predict(c) => println!("{}", commands::predict(&c.into_config()?)?.display()),
        Command::Eval(c) => {
            let report = commands::eval(&c.into_config()?)?;
            println!(
                "{}",
                serde_json::to_string(&report).expect("report serializes")
            );
        }
        Command::BenchClassification(c) => {
            print_paths(commands::bench_classification(&c.into_config()?)?)
        }
        Command::BenchTimeseries(c) => print_paths(commands::bench_timeseries(&c.into_config()?)?),
        Command::GenData(c) => print_paths(commands::gen_data(&c.into_config()?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CONFORMAL_KIT_LOG", "warn"))
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
