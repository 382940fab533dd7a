//! Factor stochastic volatility with generalized hyperbolic skew-t shocks,
//! leverage, and spike-and-slab skewness selection.
//!
//! The crate is `no_std` with `alloc`. Parallel execution is abstracted by
//! [`engine::Executor`]; [`engine::Serial`] runs everything in place.
#![no_std]
extern crate alloc;

pub mod backtest;
pub mod diagnostics;
pub mod dist;
pub mod engine;
pub mod error;
pub mod factor;
pub mod forecast;
pub mod model;
pub mod rng;
pub mod simulate;
pub mod summary;
pub mod sv;

pub use error::{Error, Result};
pub use model::{Dataset, LoadingMatrix, ModelConfig, PriorSet, SeriesParams, Variant};
