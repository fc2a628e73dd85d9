//! Movable-antenna wireless-powered mobile-edge-computing optimizer.
//!
//! The crate models field-response channels, a sigmoid energy harvester and
//! partial task offloading, and maximizes the sum computational rate by
//! alternating between convex sub-solvers and swarm-based antenna positioning.

pub mod ao;
pub mod channel;
pub mod error;
pub mod harness;
pub mod harvest;
pub mod pso;
pub mod rates;
pub mod subsolvers;

pub use error::{Error, Result};
