use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use conformal_kit::error::exit;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_conformal-kit"));
    c.env_remove("CONFORMAL_KIT_LOG");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

/// Rows whose softmax puts probability `p` on label 0 and the rest evenly on the others.
fn logit_rows(p: f64, k: usize, n: usize) -> String {
    let rest = ((1.0 - p) / (k - 1) as f64).ln();
    let row: Vec<String> = (0..k)
        .map(|j| if j == 0 { p.ln() } else { rest }.to_string())
        .collect();
    (0..n).map(|_| row.join(",") + "\n").collect()
}

fn artifact_value(dir: &Path) -> f64 {
    let json: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/threshold.json")).unwrap()).unwrap();
    assert_eq!(json["predictor"]["threshold"]["kind"], "scalar");
    json["predictor"]["threshold"]["value"].as_f64().unwrap()
}

#[test]
fn constant_score_fixture_calibrates_to_common_value() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "cal.csv", &logit_rows(0.9, 2, 9));
    write(d, "y.csv", &"0\n".repeat(9));
    for alpha in ["0.1", "0.5"] {
        ok(
            d,
            &[
                "calibrate",
                "--logits",
                "cal.csv",
                "--labels",
                "y.csv",
                "--alpha",
                alpha,
                "--out",
                "out",
            ],
        );
        assert!((artifact_value(d) - 0.1).abs() < 1e-12);
    }
    let json: Value =
        serde_json::from_str(&fs::read_to_string(d.join("out/threshold.json")).unwrap()).unwrap();
    assert_eq!(json["predictor"]["alpha"], 0.5);
    assert_eq!(json["predictor"]["config"]["score"]["kind"], "THR");
}

#[test]
fn missing_labels_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cal.csv", &logit_rows(0.9, 2, 3));
    let out = run(
        dir.path(),
        &["calibrate", "--logits", "cal.csv", "--labels", "absent.csv"],
    );
    assert_eq!(code(&out), exit::INPUT);
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));
}

#[test]
fn singleton_empty_and_full_sets() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // THR scores on calibration are all 0.3.
    let cal: String = (0..9)
        .map(|_| format!("{},{},{}\n", 0.7f64.ln(), 0.2f64.ln(), 0.1f64.ln()))
        .collect();
    write(d, "cal.csv", &cal);
    write(d, "y.csv", &"0\n".repeat(9));
    let test = format!("{},{},{}\n0,0,0\n", 0.8f64.ln(), 0.15f64.ln(), 0.05f64.ln());
    write(d, "test.csv", &test);
    ok(
        d,
        &[
            "calibrate",
            "--logits",
            "cal.csv",
            "--labels",
            "y.csv",
            "--out",
            "out",
        ],
    );
    assert!((artifact_value(d) - 0.3).abs() < 1e-12);
    ok(
        d,
        &[
            "predict",
            "--logits",
            "test.csv",
            "--artifact",
            "out/threshold.json",
            "--out",
            "out",
        ],
    );
    assert_eq!(
        fs::read_to_string(d.join("out/predictions.csv")).unwrap(),
        "0,0\n1\n"
    );

    // n = 9 at α = 0.05 needs rank 10, so the threshold is infinite.
    ok(
        d,
        &[
            "calibrate",
            "--logits",
            "cal.csv",
            "--labels",
            "y.csv",
            "--alpha",
            "0.05",
            "--out",
            "inf",
        ],
    );
    let text = fs::read_to_string(d.join("inf/threshold.json")).unwrap();
    assert!(text.contains("\"inf\""), "{text}");
    ok(
        d,
        &[
            "predict",
            "--logits",
            "test.csv",
            "--artifact",
            "inf/threshold.json",
            "--out",
            "inf",
        ],
    );
    assert_eq!(
        fs::read_to_string(d.join("inf/predictions.csv")).unwrap(),
        "0,0,1,2\n1,0,1,2\n"
    );
}

#[test]
fn eval_routes_metrics_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "pred.csv", "0,0,1\n1,2\n2\n3,0,1,2\n");
    write(d, "y.csv", "1\n0\n2\n2\n");
    let stdout = ok(
        d,
        &[
            "eval",
            "--predictions",
            "pred.csv",
            "--labels",
            "y.csv",
            "--alpha",
            "0.5",
            "--out",
            "out",
        ],
    );
    let report: Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(report["coverage_rate"], 0.5);
    assert_eq!(report["average_size"], 1.5);
    assert_eq!(report["n_test"], 4);
    // Class 0: 0/1 covered, class 1: 1/1, class 2: 1/2; gaps 0.5, 0.5, 0 around 0.5.
    assert!((report["cov_gap"].as_f64().unwrap() - 100.0 / 3.0).abs() < 1e-9);
    let csv = fs::read_to_string(d.join("out/report.csv")).unwrap();
    assert!(csv.starts_with("coverage_rate,average_size,average_width,cov_gap,n_test\n0.5,1.5,,"));

    write(d, "short.csv", "1\n0\n");
    let out = run(
        d,
        &["eval", "--predictions", "pred.csv", "--labels", "short.csv"],
    );
    assert_eq!(code(&out), exit::INPUT);
}

#[test]
fn malformed_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "cal.csv", "0.1,0.2\n0.3,abc\n");
    write(d, "y.csv", "0\n1\n");
    let out = run(
        d,
        &["calibrate", "--logits", "cal.csv", "--labels", "y.csv"],
    );
    assert_eq!(code(&out), exit::PARSE);
    assert!(String::from_utf8_lossy(&out.stderr).contains("cal.csv:2"));
}

#[test]
fn label_count_and_range_mismatches_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "cal.csv", &logit_rows(0.6, 3, 4));
    write(d, "three.csv", "0\n1\n2\n");
    write(d, "big.csv", "0\n1\n2\n3\n");
    for labels in ["three.csv", "big.csv"] {
        let out = run(d, &["calibrate", "--logits", "cal.csv", "--labels", labels]);
        assert_eq!(code(&out), exit::INPUT, "{labels}");
    }
    write(d, "y.csv", "0\n1\n2\n0\n");
    ok(
        d,
        &[
            "calibrate",
            "--logits",
            "cal.csv",
            "--labels",
            "y.csv",
            "--out",
            "out",
        ],
    );
    write(d, "test2.csv", &logit_rows(0.6, 2, 2));
    let out = run(
        d,
        &[
            "predict",
            "--logits",
            "test2.csv",
            "--artifact",
            "out/threshold.json",
        ],
    );
    assert_eq!(code(&out), exit::INPUT);
}

#[test]
fn artifact_score_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "cal.csv", &logit_rows(0.6, 3, 10));
    write(d, "y.csv", "0\n1\n2\n0\n1\n2\n0\n1\n2\n0\n");
    ok(
        d,
        &[
            "calibrate",
            "--logits",
            "cal.csv",
            "--labels",
            "y.csv",
            "--score",
            "APS",
            "--out",
            "out",
        ],
    );
    let args = [
        "predict",
        "--logits",
        "cal.csv",
        "--artifact",
        "out/threshold.json",
        "--out",
        "out",
    ];
    ok(d, &args);
    let mut mismatched = args.to_vec();
    mismatched.extend(["--score", "RAPS"]);
    assert_eq!(code(&run(d, &mismatched)), exit::INPUT);
    let mut wrong_predictor = args.to_vec();
    wrong_predictor.extend(["--predictor", "class_wise"]);
    assert_eq!(code(&run(d, &wrong_predictor)), exit::INPUT);
}

#[test]
fn calibrate_predict_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-data", "--seed", "4", "--out", "data"]);
    for predictor in ["split", "class_wise", "cluster"] {
        let mut outputs = Vec::new();
        for run_dir in ["a", "b"] {
            let args = [
                "--score",
                "RAPS",
                "--predictor",
                predictor,
                "--seed",
                "11",
                "--out",
                run_dir,
            ];
            let mut cal = vec![
                "calibrate",
                "--logits",
                "data/logits.csv",
                "--labels",
                "data/labels.csv",
            ];
            cal.extend(args);
            ok(d, &cal);
            let artifact = format!("{run_dir}/threshold.json");
            let mut pred = vec![
                "predict",
                "--logits",
                "data/logits.csv",
                "--artifact",
                &artifact,
            ];
            pred.extend(args);
            ok(d, &pred);
            outputs.push((
                fs::read(d.join(&artifact)).unwrap(),
                fs::read(d.join(run_dir).join("predictions.csv")).unwrap(),
            ));
        }
        assert_eq!(outputs[0], outputs[1], "{predictor}");
    }
}

#[test]
fn weighted_predictor_uses_weight_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-data", "--seed", "2", "--out", "data"]);
    write(d, "w.csv", &"1\n".repeat(1000));
    let base = [
        "--logits",
        "data/logits.csv",
        "--score",
        "APS",
        "--seed",
        "5",
    ];
    let run_pair = |predictor: &str, out: &str, weights: bool| {
        let mut cal = vec![
            "calibrate",
            "--labels",
            "data/labels.csv",
            "--predictor",
            predictor,
            "--out",
            out,
        ];
        cal.extend(base);
        let mut pred = vec![
            "predict",
            "--artifact",
            "",
            "--predictor",
            predictor,
            "--out",
            out,
        ];
        pred.extend(base);
        if weights {
            cal.extend(["--weights", "w.csv"]);
            pred.extend(["--weights", "w.csv"]);
        }
        ok(d, &cal);
        let artifact = format!("{out}/threshold.json");
        pred[2] = &artifact;
        ok(d, &pred);
        fs::read_to_string(d.join(out).join("predictions.csv")).unwrap()
    };
    assert_eq!(
        run_pair("weighted", "w", true),
        run_pair("split", "s", false)
    );
    let out = run(
        d,
        &[
            "calibrate",
            "--logits",
            "data/logits.csv",
            "--labels",
            "data/labels.csv",
            "--predictor",
            "weighted",
        ],
    );
    assert_eq!(code(&out), exit::INPUT);
}

#[test]
fn regression_split_and_cqr() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "point.csv", "1\n2\n3\n4\n");
    write(d, "y.csv", "1.5\n1\n3.25\n4\n");
    ok(
        d,
        &[
            "calibrate",
            "--task",
            "regression",
            "--point",
            "point.csv",
            "--targets",
            "y.csv",
            "--alpha",
            "0.2",
            "--out",
            "s",
        ],
    );
    write(d, "tp.csv", "10\n-1\n");
    ok(
        d,
        &[
            "predict",
            "--point",
            "tp.csv",
            "--artifact",
            "s/threshold.json",
            "--out",
            "s",
        ],
    );
    // Residuals (0.5, 1, 0.25, 0): rank ceil(5 * 0.8) = 4 gives 1.
    assert_eq!(
        fs::read_to_string(d.join("s/predictions.csv")).unwrap(),
        "0,9,11\n1,-2,0\n"
    );

    write(d, "lo.csv", "0\n0\n0\n0\n");
    write(d, "hi.csv", "2\n2\n2\n2\n");
    write(d, "yc.csv", "1\n3\n-0.5\n2.5\n");
    ok(
        d,
        &[
            "calibrate",
            "--task",
            "regression",
            "--predictor",
            "cqr",
            "--lower",
            "lo.csv",
            "--upper",
            "hi.csv",
            "--targets",
            "yc.csv",
            "--alpha",
            "0.2",
            "--out",
            "c",
        ],
    );
    ok(
        d,
        &[
            "predict",
            "--lower",
            "lo.csv",
            "--upper",
            "hi.csv",
            "--artifact",
            "c/threshold.json",
            "--out",
            "c",
        ],
    );
    // Scores (-1, 1, 0.5, 0.5): the fourth smallest is 1.
    assert_eq!(
        fs::read_to_string(d.join("c/predictions.csv")).unwrap(),
        "0,-1,3\n1,-1,3\n2,-1,3\n3,-1,3\n"
    );
    let stdout = ok(
        d,
        &[
            "eval",
            "--predictions",
            "c/predictions.csv",
            "--targets",
            "yc.csv",
            "--artifact",
            "c/threshold.json",
            "--out",
            "c",
        ],
    );
    let report: Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(report["coverage_rate"], 1.0);
    assert_eq!(report["average_width"], 4.0);
}

#[test]
fn gen_data_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "ts.json",
        r#"{"gen": {"kind": "timeseries", "timeseries": {"t_total": 50}}}"#,
    );
    ok(
        d,
        &[
            "gen-data", "--config", "ts.json", "--seed", "9", "--out", "a",
        ],
    );
    ok(
        d,
        &[
            "gen-data", "--config", "ts.json", "--seed", "9", "--out", "b",
        ],
    );
    ok(
        d,
        &[
            "gen-data", "--config", "ts.json", "--seed", "10", "--out", "c",
        ],
    );
    let read = |p: &str| fs::read(d.join(p)).unwrap();
    assert_eq!(read("a/targets.csv"), read("b/targets.csv"));
    assert_ne!(read("a/targets.csv"), read("c/targets.csv"));
    assert_eq!(
        fs::read_to_string(d.join("a/features.csv"))
            .unwrap()
            .lines()
            .count(),
        50
    );
    assert_eq!(
        fs::read_to_string(d.join("a/features.csv"))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .split(',')
            .count(),
        6
    );
}

#[test]
fn bench_classification_small_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "b.json",
        r#"{"bench_classification": {"n_cal": 300, "n_test": 300}}"#,
    );
    ok(
        d,
        &[
            "bench-classification",
            "--config",
            "b.json",
            "--trials",
            "2",
            "--alpha",
            "0.1,0.5",
            "--out",
            "o",
        ],
    );
    let text = fs::read_to_string(d.join("o/bench_classification.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "score,predictor,alpha,trial,coverage,size,covgap"
    );
    assert_eq!(lines.count(), 2 * 2 * 5 * 3);
    for name in ["THR", "APS", "RAPS", "SAPS", "Margin"] {
        assert!(text.contains(&format!("\n{name},Cluster,0.5,1,")), "{name}");
    }
    let summary = fs::read_to_string(d.join("o/bench_classification_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 5 * 3);
}

#[test]
fn bench_classification_accepts_user_logits() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-data", "--seed", "1", "--out", "data"]);
    write(d, "b.json", r#"{"bench_classification": {"n_cal": 500}}"#);
    ok(
        d,
        &[
            "bench-classification",
            "--config",
            "b.json",
            "--logits",
            "data/logits.csv",
            "--labels",
            "data/labels.csv",
            "--score",
            "THR",
            "--predictor",
            "split",
            "--trials",
            "3",
            "--alpha",
            "0.1",
            "--out",
            "o",
        ],
    );
    let text = fs::read_to_string(d.join("o/bench_classification.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 3);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.starts_with("THR,Split,0.1,")));
}

#[test]
fn bench_timeseries_writes_series_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "bench-timeseries",
            "--trials",
            "1",
            "--seed",
            "3",
            "--out",
            "o",
        ],
    );
    let rows = fs::read_to_string(d.join("o/bench_timeseries.csv")).unwrap();
    assert_eq!(
        rows.lines().next().unwrap(),
        "trial,t,method,lo,hi,y,covered"
    );
    assert_eq!(rows.lines().count(), 1 + 2 * 300);
    let summary = fs::read_to_string(d.join("o/bench_timeseries_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);

    // With γ = 0 the ACI intervals equal the CQR intervals at every step.
    ok(
        d,
        &[
            "bench-timeseries",
            "--trials",
            "1",
            "--seed",
            "3",
            "--gamma",
            "0",
            "--out",
            "z",
        ],
    );
    let rows = fs::read_to_string(d.join("z/bench_timeseries.csv")).unwrap();
    let strip = |l: &str| l.replace(",CQR,", ",").replace(",ACI,", ",");
    let lines: Vec<&str> = rows.lines().skip(1).collect();
    for pair in lines.chunks(2) {
        assert_eq!(strip(pair[0]), strip(pair[1]));
    }
}

#[test]
fn config_file_drives_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::create_dir(d.join("cfg")).unwrap();
    write(&d.join("cfg"), "cal.csv", &logit_rows(0.9, 2, 9));
    write(&d.join("cfg"), "y.csv", &"0\n".repeat(9));
    write(
        &d.join("cfg"),
        "run.json",
        r#"{"alpha": [0.2], "inputs": {"logits": "cal.csv", "labels": "y.csv"}, "out": "res"}"#,
    );
    ok(d, &["calibrate", "--config", "cfg/run.json"]);
    assert!(d.join("cfg/res/threshold.json").exists());

    write(d, "bad.json", r#"{"alpha": [1.5]}"#);
    assert_eq!(
        code(&run(d, &["calibrate", "--config", "bad.json"])),
        exit::INPUT
    );
    write(d, "broken.json", "{\"alpha\": ");
    assert_eq!(
        code(&run(d, &["calibrate", "--config", "broken.json"])),
        exit::PARSE
    );
}

#[test]
fn usage_errors_use_clap_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["calibrate", "--score", "nonsense"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn log_level_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-data", "--out", "data"]);
    let out = bin()
        .current_dir(d)
        .env("CONFORMAL_KIT_LOG", "info")
        .args([
            "calibrate",
            "--logits",
            "data/logits.csv",
            "--labels",
            "data/labels.csv",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("calibrated scalar threshold"));
}

#[test]
fn bench_with_user_data_rejects_oversized_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-data", "--out", "data"]);
    let out = run(
        d,
        &[
            "bench-classification",
            "--logits",
            "data/logits.csv",
            "--labels",
            "data/labels.csv",
        ],
    );
    assert_eq!(code(&out), exit::INPUT);
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_cal = 2000"));
}
