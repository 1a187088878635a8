//! Cross-module invariants: reductions between predictors and set monotonicity.

use conformal_core::classification::{
    calculate_threshold, softmax_with_temperature, CalibratedPredictor, ClusterConfig,
    PredictorConfig, PredictorKind, Temperature,
};
use conformal_core::regression::{AciBase, AdaptivePredictor, CqrRegressor, QuantilePair};
use conformal_core::scores::{ScoreConfig, ScoreKind};
use conformal_core::synth::{generate_classification, SyntheticClassificationConfig};
use conformal_core::{Alpha, Matrix, PredictionSet};
use proptest::prelude::*;

fn data(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
    generate_classification(&SyntheticClassificationConfig {
        n,
        seed,
        num_classes: 6,
        ..Default::default()
    })
    .unwrap()
}

fn sets(config: &PredictorConfig, seed: u64, a: f64) -> Vec<PredictionSet> {
    let (cal_x, cal_y) = data(120, seed);
    let (test_x, _) = data(60, seed + 1000);
    calculate_threshold(config, &cal_x, &cal_y, Alpha::new(a).unwrap())
        .unwrap()
        .predict_with_logits(&test_x, None)
        .unwrap()
}

fn score_kind() -> impl Strategy<Value = ScoreKind> {
    prop::sample::select(ScoreKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weighted_uniform_matches_split(kind in score_kind(), seed in 0u64..1000, a in 0.05f64..0.6) {
        let score = ScoreConfig::new(kind).with_seed(seed);
        let split = sets(&PredictorConfig::new(PredictorKind::Split, score), seed, a);
        let weighted = sets(&PredictorConfig::new(PredictorKind::Weighted, score).with_weight_fn(|_| 2.5), seed, a);
        prop_assert_eq!(split, weighted);
    }

    #[test]
    fn single_cluster_matches_split(kind in score_kind(), seed in 0u64..1000, a in 0.05f64..0.6) {
        let score = ScoreConfig::new(kind).with_seed(seed);
        let cluster = ClusterConfig { num_clusters: Some(1), min_class_count: 1, ..ClusterConfig::default() };
        let split = sets(&PredictorConfig::new(PredictorKind::Split, score), seed, a);
        let clustered = sets(&PredictorConfig::new(PredictorKind::Cluster, score).with_cluster(cluster), seed, a);
        prop_assert_eq!(split, clustered);
    }

    #[test]
    fn split_sets_shrink_as_alpha_grows(kind in score_kind(), seed in 0u64..1000, a1 in 0.02f64..0.9, d in 0.0f64..0.5) {
        let a2 = (a1 + d).min(0.95);
        let config = PredictorConfig::new(PredictorKind::Split, ScoreConfig::new(kind).with_seed(seed));
        let wide = sets(&config, seed, a1);
        let narrow = sets(&config, seed, a2);
        for (w, n) in wide.iter().zip(&narrow) {
            prop_assert!(n.members().iter().all(|m| w.contains(*m)));
        }
    }

    #[test]
    fn temperature_preserves_ranking(logits in prop::collection::vec(-20.0f64..20.0, 2..12), t in 0.05f64..50.0) {
        let probs = softmax_with_temperature(&logits, Temperature::new(t).unwrap()).unwrap();
        for i in 0..logits.len() {
            for j in 0..logits.len() {
                if logits[i] > logits[j] {
                    prop_assert!(probs[i] >= probs[j]);
                }
            }
        }
    }

    #[test]
    fn aci_without_step_is_cqr(
        rows in prop::collection::vec((-5.0f64..5.0, 0.0f64..3.0, -6.0f64..8.0), 5..40),
        a in 0.05f64..0.5,
    ) {
        let lo = Matrix::from_vec(rows.len(), 1, rows.iter().map(|r| r.0).collect()).unwrap();
        let hi = Matrix::from_vec(rows.len(), 1, rows.iter().map(|r| r.0 + r.1).collect()).unwrap();
        let y = Matrix::from_vec(rows.len(), 1, rows.iter().map(|r| r.2).collect()).unwrap();
        let alpha = Alpha::new(a).unwrap();
        let cqr = CqrRegressor::calibrate(&lo, &hi, &y, alpha).unwrap();
        let mut aci = AdaptivePredictor::new(cqr.scores.clone(), alpha, 0.0).unwrap();
        for r in &rows {
            let pair = QuantilePair::new(vec![r.0], vec![r.0 + r.1]).unwrap();
            prop_assert_eq!(aci.step(AciBase::Quantiles(&pair), &[r.2]).unwrap(), cqr.predict(&pair).unwrap());
        }
    }
}

#[test]
fn artifacts_round_trip_through_json() {
    let (cal_x, cal_y) = data(40, 3);
    let (test_x, _) = data(30, 4);
    let alpha = Alpha::new(0.01).unwrap();
    for kind in [
        PredictorKind::Split,
        PredictorKind::ClassWise,
        PredictorKind::Cluster,
    ] {
        let config = PredictorConfig::new(kind, ScoreConfig::new(ScoreKind::Raps).with_seed(8));
        let calibrated = calculate_threshold(&config, &cal_x, &cal_y, alpha).unwrap();
        let json = serde_json::to_string(&calibrated).unwrap();
        let back: CalibratedPredictor = serde_json::from_str(&json).unwrap();
        assert_eq!(back.threshold, calibrated.threshold);
        assert_eq!(
            back.predict_with_logits(&test_x, None).unwrap(),
            calibrated.predict_with_logits(&test_x, None).unwrap()
        );
    }
}
