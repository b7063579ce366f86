//! Shape-invariant potentials from a quadratic master function.

pub mod cli;
pub mod coherent_states;
pub mod dynamics;
pub mod eigensystem;
pub mod error;
pub mod ladder_phase;
pub mod master_catalog;
pub mod numerics;
pub mod orthopoly;
pub mod poly;

pub use error::{Error, Result};
