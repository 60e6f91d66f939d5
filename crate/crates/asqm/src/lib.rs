//! Parametric quality estimation for audio streaming sessions.
//!
//! The crate evaluates a codec quality baseline, impairments from the
//! initial buffering delay and from stalls weighted by their temporal
//! segment, and a content-preference adjustment factor. Around the model
//! sit a least-squares weight fit, a Gilbert-Elliott network/playout
//! simulator, buffer-log ingestion, and a preference store.

// Validation deliberately writes `!(x > 0.0)` so NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fit;
pub mod ge;
pub mod prefstore;
pub mod qoe;
pub mod telemetry;

pub use error::{AsqmError, Result};
