//! Split conformal prediction from precomputed model outputs.
//!
//! The crate covers the calibration quantile, five classification scores,
//! four classification predictors, regression predictors (split, CQR,
//! adaptive, and binned-density), conformal training losses with a small
//! MLP trainer, evaluation metrics, and synthetic data generators.

pub mod classification;
pub mod error;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod quantile;
pub mod regression;
pub mod rng;
pub mod scores;
pub mod sets;
pub mod synth;
pub mod threshold;
pub mod train;

pub use error::{Error, ErrorKind, Result};
pub use matrix::Matrix;
pub use quantile::{conformal_quantile, weighted_conformal_quantile, Alpha, ScoreVector};
pub use sets::{Interval, PredictionInterval, PredictionSet};
pub use threshold::CalibratedThreshold;
