//! Slotted-time simulator of an uplink sliced fog radio access network.
//!
//! UEs pick a communication mode (C-RAN, F-AP or D2D relay) and a
//! subchannel each slot; transmit powers are then optimized for the
//! drift-plus-penalty objective `V * P(t) - sum_i Q_i(t) R_i(t)`. Mode
//! selection runs through tabular Q-learning (centralized for the
//! orthogonal subchannel strategy, distributed per-UE for the multiplexed
//! one); power allocation uses a closed-form-plus-restoration solver on
//! orthogonal assignments and a WMMSE block-coordinate-descent solver under
//! subchannel reuse. Baseline policies (All-to-RRHs, PL-First, exhaustive
//! search, PSO) and an experiment harness with a CLI sit on top.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod netmodel;
pub mod powerorth;
pub mod qlearn;
pub mod queueing;
pub mod rng;
pub mod slotctx;
pub mod topology;
pub mod wmmse;

pub use error::{Result, SimError};
