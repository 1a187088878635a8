use serde::{Deserialize, Serialize};

/// Calibrated threshold(s) produced by a classification predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CalibratedThreshold {
    Scalar {
        #[serde(with = "extended_f64")]
        value: f64,
    },
    PerClass {
        #[serde(with = "extended_f64::vec")]
        values: Vec<f64>,
    },
    PerCluster {
        /// Cluster index per class; `None` marks classes calibrated on the pooled fallback.
        class_to_cluster: Vec<Option<usize>>,
        #[serde(with = "extended_f64::vec")]
        values: Vec<f64>,
        #[serde(with = "extended_f64")]
        fallback: f64,
    },
    Weighted {
        scores: Vec<f64>,
        weights: Vec<f64>,
    },
}

impl CalibratedThreshold {
    pub fn kind_name(&self) -> &'static str {
        match self {
            CalibratedThreshold::Scalar { .. } => "scalar",
            CalibratedThreshold::PerClass { .. } => "per_class",
            CalibratedThreshold::PerCluster { .. } => "per_cluster",
            CalibratedThreshold::Weighted { .. } => "weighted",
        }
    }
}

/// Serde adapter writing non-finite floats as the strings `"inf"`, `"-inf"`
/// and `"nan"`, since JSON has no literal for them.
pub mod extended_f64 {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            s.serialize_f64(*value)
        } else if value.is_nan() {
            s.serialize_str("nan")
        } else if *value > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct ExtendedVisitor;

    impl Visitor<'_> for ExtendedVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(ExtendedVisitor)
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        #[derive(Serialize, Deserialize)]
        struct Wrapped(#[serde(with = "super")] f64);

        pub fn serialize<S: Serializer>(value: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            value.map(Wrapped).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Ok(Option::<Wrapped>::deserialize(d)?.map(|w| w.0))
        }
    }

    pub mod vec {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        #[derive(Serialize, Deserialize)]
        struct Wrapped(#[serde(with = "super")] f64);

        pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(values.iter().map(|&v| Wrapped(v)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            let wrapped = Vec::<Wrapped>::deserialize(d)?;
            Ok(wrapped.into_iter().map(|w| w.0).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_thresholds_survive_json() {
        let t = CalibratedThreshold::PerCluster {
            class_to_cluster: vec![Some(0), None],
            values: vec![0.25, f64::INFINITY],
            fallback: f64::INFINITY,
        };
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"inf\""));
        let back: CalibratedThreshold = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
