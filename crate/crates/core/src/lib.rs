//! Simulation and verification of Kyle-Back insider trading equilibria with
//! path-dependent pricing rules.

pub mod calculus;
pub mod cli;
pub mod error;
pub mod insider;
pub mod noise;
pub mod path;
pub mod rules;
pub mod scenario;
pub mod selftest;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
