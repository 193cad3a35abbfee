//! Stochastic pairwise-exchange economies and entropy calorimetry.

pub mod calorimetry;
pub mod economy;
pub mod error;
pub mod experiment;
pub mod meter;
pub mod oracles;

pub use error::{Error, Result};
