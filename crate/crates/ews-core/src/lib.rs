//! Early-warning models for systemic financial crises.
//!
//! This crate builds quarterly country panels with pre-crisis labels, runs a
//! horse race of twelve classifier families under cross-validated and
//! recursive real-time out-of-sample protocols, aggregates them into
//! ensembles, and quantifies the uncertainty of both performance estimates
//! and model output through resampling.
//!
//! The organizing ideas:
//!
//! * Evaluation is preference-weighted: a policymaker weighs missed crises
//!   against false alarms through a preference parameter, and every model is
//!   scored by the usefulness it adds over the best trivial policy
//!   ([`eval`]).
//! * Model outputs are calibrated to in-sample percentiles so that a common
//!   signal threshold is meaningful across methods ([`calibrate`]).
//! * Out-of-sample discipline comes from the experiment protocols
//!   ([`experiment`]), not from the classifiers themselves.
//! * Uncertainty is resampled, never asymptotic ([`uncertainty`]).

pub mod calibrate;
pub mod classify;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod panel;
pub mod quarter;
pub mod rng;
pub mod synth;
pub mod uncertainty;

pub use error::{Error, Result};
