//! Deterministic simulator for local clipped SGD with periodic averaging under
//! (L0, L1)-smoothness, with checkers for the supporting inequalities.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod error;
pub mod harness;
pub mod noise;
pub mod objectives;
pub mod theory;
pub mod vecmath;

pub use algorithms::{run_algorithm, Algorithm, HyperParams, MetricRecord, RunTrace};
pub use error::{Error, Result};
pub use noise::{NoiseModel, RngStream};
pub use objectives::ObjectiveSpec;
pub use vecmath::{LambdaDiag, ParamVector};
