//! Fixation and saccade classification for VR eye-tracking streams.
//!
//! The crate is organized as a pipeline:
//!
//! * [`ingest`] parses tracker sessions, repairs gaps, converts coordinates,
//!   ray-casts gaze into the scene and computes angular velocities.
//! * [`classifiers`] turns a gaze-point stream into fixations and saccades with
//!   I-VT, I-DT, I-VDT or the depth-corrected m-IVDT.
//! * [`protocol`] describes the stimulus sequence that serves as ground truth.
//! * [`metrics`] scores a classification against a protocol.
//! * [`simulator`] produces synthetic sessions with known labels.
//! * [`tuner`] grid-searches classifier thresholds.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifiers;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod protocol;
pub mod simulator;
pub mod tuner;

pub use error::{Error, Result};
pub use geometry::Vec3;
