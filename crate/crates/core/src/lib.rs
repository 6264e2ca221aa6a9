//! Fuzzy cellular and Nagel-Schreckenberg cellular automaton models of
//! signal-controlled single-lane traffic.
//!
//! * [`ofn`]: triangular ordered fuzzy numbers.
//! * [`ca_rules`]: crisp update rules and their saturation flows.
//! * [`nasch`]: crisp engine, NaSch Monte Carlo harness and `p` sweeps.
//! * [`fcm`]: the fuzzy cellular model.
//! * [`network`]: roads, signal plans and scenarios.
//! * [`analysis`]: metrics, percentiles and calibration.

pub mod analysis;
pub mod ca_rules;
pub mod fcm;
pub mod nasch;
pub mod network;
pub mod ofn;

pub use ofn::{BinaryOp, Ofn};
