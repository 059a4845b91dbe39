//! Open-system Lindblad dynamics and minimum-energy coherence-preserving
//! control of N-level quantum systems via a Pontryagin forward-backward
//! sweep.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod models;
pub mod operators;
pub mod pmp;

pub use error::{Error, Result};
