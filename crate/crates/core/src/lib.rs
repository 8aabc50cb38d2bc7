//! Deep hedging of a lookback option with recurrent policies.

pub mod error;
pub mod instruments;
pub mod market;
pub mod metrics;
pub mod neural;
mod par;
pub mod portfolio;
pub mod pricing;
pub mod training;

pub use error::{HedgeError, Result};
