//! Continuous-time single-site Markov chains (Glauber / Metropolis) over Ising
//! models, plus learners that recover the dependency graph and parameters from
//! flip-only observations.
//!
//! The crate is organized around the pipeline
//! `model` → `dynamics::simulate` → [`trace::FlipTrace`] → `structure` / `params`,
//! with `oracle` providing brute-force ground truth for small instances.

pub mod dynamics;
pub mod error;
pub mod model;
pub mod oracle;
pub mod params;
pub mod spins;
pub mod structure;
pub mod trace;

pub use error::{Error, Result};
