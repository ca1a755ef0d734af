//! Rule-based rewards for multi-segment temporal grounding.
//!
//! Interval algebra, segment matching rewards, output parsing, phased reward
//! composition, benchmark metrics and a small tabular policy-optimization
//! sandbox for studying how the rewards shape training.

pub mod assignment;
pub mod config;
pub mod error;
pub mod interval;
pub mod matching;
pub mod metrics;
pub mod parser;
pub mod schedule;
pub mod sim;
