//! Repeater-assisted full-duplex massive MIMO simulator.
//!
//! A base station with separate transmit and receive arrays serves DL and UL
//! users at the same time, helped by single-antenna amplify-and-forward
//! repeaters. The crate covers drop generation, compound channels, ZF
//! beamforming, analytic SINR, a small interior-point solver and the
//! successive convex approximation that tunes repeater gains.

pub mod beamforming;
pub mod channel;
pub mod cli;
pub mod config;
pub mod convex;
pub mod error;
pub mod harness;
pub mod performance;
pub mod sca;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};
