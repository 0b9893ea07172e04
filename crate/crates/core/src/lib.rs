//! Tipping-point sensitivity analysis for two-arm time-to-event trials with
//! informative censoring.
//!
//! The crate is organized bottom-up:
//!
//! - [`survival`]: data model, Kaplan-Meier, exponential/Weibull MLE, Cox
//!   regression and delta-adjusted conditional sampling
//! - [`imputation`]: selection of the imputable set and the three imputation
//!   engines (delta-adjusted model-based, deterministic assignment, donor
//!   sampling)
//! - [`analysis`]: Rubin pooling, sensitivity sweeps, tipping-point detection,
//!   plausibility anchors and pooled KM curves
//! - [`simulation`]: the informative-censoring trial generator and the
//!   experiment drivers built on it

pub mod analysis;
pub mod error;
pub mod imputation;
pub mod rng;
pub mod simulation;
pub mod survival;

pub use error::{Error, Result};
