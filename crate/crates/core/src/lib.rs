//! Membership inference on aggregate location time-series.
//!
//! This crate is the allocation-only algorithmic core: the location data
//! model and aggregation, a synthetic mobility generator, the challenger and
//! dataset builders of the distinguishability game, feature extraction and
//! selection, four from-scratch distinguishers, differentially private
//! perturbation mechanisms, and the ROC/AUC, privacy-loss, privacy-gain and
//! relative-error metrics.
//!
//! Everything here is a pure function of its inputs and an explicit seed.
//! File formats, orchestration and the command-line interface live in the
//! `aggmia` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod classifiers;
pub mod data;
pub mod dp;
pub mod experiment;
pub mod features;
pub mod game;
pub mod linalg;
pub mod metrics;
pub mod seed;
pub mod synthgen;

pub use error::{Error, Result};
