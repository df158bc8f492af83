//! Stochastic day-ahead dispatch of microgrid resources on a radial
//! distribution feeder.

pub mod coa;
pub mod config;
pub mod dispatch;
pub mod error;
pub mod grid;
pub mod pipeline;
pub mod reliability;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod stochastic;

pub use error::{Error, ErrorClass, Result};
