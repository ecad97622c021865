//! Discrete-time simulator and analysis library for cooperative packet
//! repair in a joint cellular + device-to-device network.
//!
//! After a lossy broadcast leaves each device with a partial copy of a
//! common file, the devices repair the missing packets over two concurrent
//! interfaces: the source retransmits over cellular while one device at a
//! time retransmits over D2D. The crate provides
//!
//! * two dual-interface network-coding schedulers — a batch (rateless) one
//!   and an instantly decodable one — in lossless and lossy variants,
//! * five single-interface and uncoded comparison schemes,
//! * closed-form lower and upper bounds on the completion time,
//! * a signaling-overhead model,
//! * an exhaustive-search optimum for tiny instances, and
//! * a seeded Monte Carlo harness with CSV output.

pub mod baselines;
pub mod batch;
pub mod bounds;
pub mod coding;
pub mod error;
pub mod field;
pub mod grouping;
pub mod harness;
pub mod instant;
pub mod model;
pub mod oracle;
pub mod overhead;
pub mod rng;

pub use error::{Error, Result};
pub use model::{CodingMode, LossModel, RunOptions, RunResult, Scenario, TieBreak};
