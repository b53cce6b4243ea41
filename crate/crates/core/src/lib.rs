//! Utility-optimal wireless multicast of tiled, zoomable video.
//!
//! Given per-tile resolution ladders and each client's link rate, region of
//! interest and requested level, the allocators decide which (tile, level)
//! pairs to send at which link rate within a per-frame slot budget.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod baselines;
pub mod bench;
pub mod channel;
pub mod feasibility;
pub mod io;
pub mod model;
pub mod scheduler;
pub mod simulator;
pub mod synth;
