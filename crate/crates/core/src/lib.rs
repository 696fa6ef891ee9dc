//! Seeded, deterministic simulator of a blind-delegation protocol for
//! quantum machine learning: a client delegates swap-test-based vector
//! distance estimation and cluster assignment to a server over
//! adversary-pluggable quantum channels.
//!
//! The crate is organized by layer:
//! - [`quantum`]: pure-state simulation (registers, gates, measurement);
//! - [`channel`]: quantum channels with attack strategies and loss;
//! - [`protocol`]: the client/server state machines and session driver;
//! - [`estimator`]: flip statistics to overlap, distance, and assignment.

pub mod channel;
pub mod error;
pub mod estimator;
pub mod protocol;
pub mod quantum;

pub use error::{Error, Result};
