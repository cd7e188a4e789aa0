//! Time-series difference-in-differences for one treated unit, a few
//! controls and many periods.

// `!(x > 0.0)` is used on purpose so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dgp;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod linalg;
pub mod montecarlo;
pub mod multicontrol;
pub mod panel;
pub mod pipeline;
pub mod regression;
pub mod stats;
pub mod transforms;
pub mod weights;

pub use error::{Error, Result};
pub use estimators::{AttEstimate, Coefficient, EstimatorKind, Inference, TransformKind};
pub use inference::{HacSpec, TestRecord};
pub use panel::{Panel, Regime, Series, Unit};
pub use weights::{RegimeWeights, WeightingScheme};
