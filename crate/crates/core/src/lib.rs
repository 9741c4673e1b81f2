//! Discrete-time analysis of handover, handover failure and ping-pong in
//! cellular networks assisted by intelligent reflecting surfaces (IRSs).

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod arcs;
pub mod baseline;
pub mod channel;
pub mod config;
pub mod error;
pub mod ho_engine;
pub mod irs_chain;
pub mod irs_dist;
pub mod mc_sim;
pub mod mining;
mod par;
pub mod quad;
pub mod regions;
pub mod scenario;

pub use config::{NetworkConfig, RunConfig};
pub use error::{ModelError, Result};
pub use regions::{RegionFrame, Side};
pub use scenario::{ScenarioGeometry, StepFrame};
