//! Data-variety-aware DVFS scheduling simulator.
//!
//! The input is split into equal-size blocks and the deadline into equal
//! time slots, one block per slot. Each block is sampled to estimate its
//! work, and the planner picks the lowest-energy CPU frequency that still
//! finishes the block inside its slot's usable budget. The simulator then
//! replays the schedule against the blocks' true work and reports finish
//! time and energy next to a fixed-frequency baseline.
//!
//! Modules, bottom-up:
//!
//! * [`workload`] - Zipf-skewed synthetic blocks with hidden true work.
//! * [`power`] - frequency-dependent power curve and slot energy accounting.
//! * [`planner`] - slot layout, block sampling and per-block frequency choice.
//! * [`sim`] - slot-timeline execution and baseline comparison.
//! * [`experiment`] - config loading, sweeps and report emission.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod planner;
pub mod power;
pub mod sim;
pub mod workload;

mod seed;

pub use error::{Error, Result};
pub use seed::derive_seed;
