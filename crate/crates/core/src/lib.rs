//! Exact-arithmetic simulation of randomized rendezvous under asynchronous
//! scheduling.
//!
//! Robots run wait-look-compute-move cycles in continuous time. Positions,
//! event times and distances are rationals, so every comparison the analysis
//! makes (who arrives first, whether a distance halved) is decided exactly.
//!
//! The crate is `no_std` with `alloc`. IO, file formats and the CLI live in
//! the companion `rendezvous` crate.

#![no_std]

extern crate alloc;

pub mod rat;
pub mod error;
pub mod rng;
pub mod geometry;
pub mod policies;
pub mod engine;
pub mod projection;
pub mod adversary;
pub mod analysis;
pub mod multirobot;

pub use error::{Result, SimError};
pub use geometry::Point2;
pub use policies::{ApproachGeometry, LambdaPolicy, LambdaSampler};
pub use rat::Rat;
