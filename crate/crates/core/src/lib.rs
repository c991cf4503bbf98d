//! Power control in wireless interference networks with random-edge graph
//! neural networks, adapted across topology periods by first-order MAML or
//! by modular meta-learning over a shared set of filter modules.
//!
//! The crate is organized bottom-up:
//!
//! - [`netsim`] draws topologies and fading and splits each period into
//!   train and test slots.
//! - [`regnn`] holds the policy, the sum-rate objective and its gradients.
//! - [`meta`] trains and adapts policies across periods.
//! - [`analysis`] measures module representations and assignment statistics.

pub mod analysis;
pub mod dataset_io;
pub mod error;
pub mod meta;
pub mod netsim;
pub mod par;
pub mod regnn;
pub mod rng;
mod textfmt;

pub use error::{Error, Result};
pub use rng::RngStream;
