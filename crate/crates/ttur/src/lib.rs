//! Two time-scale adaptive optimizers on synthetic stochastic minimax
//! problems, plus the batch-size/step-count theory that predicts how many
//! steps a run needs and where the SFO-optimal batch size sits.
//!
//! Modules:
//! - [`preconditioner`]: the four diagonal preconditioner update rules.
//! - [`optimizer`]: the alternating two-player adaptive update.
//! - [`problems`]: synthetic minimax testbeds with controllable noise.
//! - [`metrics`]: trajectory measures and steps-to-threshold detection.
//! - [`theory`]: step model, SFO complexity, critical batch size, estimators.
//! - [`harness`]: experiment orchestration, sweeps, CSV/SVG output, CLI glue.

pub mod error;
pub mod harness;
pub mod metrics;
pub mod optimizer;
pub mod preconditioner;
pub mod problems;
pub mod theory;
pub mod vector;

pub use error::{Error, Result};
pub use vector::ParamVector;
