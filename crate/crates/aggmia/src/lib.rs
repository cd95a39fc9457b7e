//! File formats, experiment specs, the sweep runner, plots and reports for
//! membership inference on aggregate location time-series.
//!
//! The algorithms live in [`aggmia_core`]; this crate adds everything that
//! needs `std`.

pub mod error;
pub mod io;
pub mod plots;
pub mod report;
pub mod results;
pub mod runner;
pub mod spec;

pub use error::{Error, Result};
