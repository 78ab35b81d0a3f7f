//! Power allocation for HARQ over block-fading channels.
//!
//! Outage probabilities of incremental-redundancy and chase-combining HARQ,
//! monomial upper bounds on them, a geometric-programming power optimizer
//! built on those bounds, and a Monte Carlo simulator to check the result.

pub mod fading;
pub mod gpsolve;
pub mod outage;
pub mod scenario;
pub mod sim;

#[cfg(test)]
mod testutil;

pub use fading::{FadingModel, PowerSampler, RateDistribution};
pub use scenario::{load_scenario, paper_default_scenario, HarqType, PowerSchedule, Receiver, ScenarioConfig, ScenarioError};
