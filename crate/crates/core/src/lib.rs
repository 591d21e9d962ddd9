//! Probabilistic indoor radon mapping: a quantile regression forest predicts
//! per-floor radon distributions, a shifted lognormal is fitted to each
//! prediction, and Monte Carlo samples weighted by the people living on each
//! floor are aggregated over administrative units.

pub mod ags;
pub mod cli;
pub mod config;
pub mod dist;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod mc;
pub mod population;
pub mod predict;
pub mod qrf;
pub mod rng;
pub mod service;
pub mod stats;

pub use error::{Error, Result};
