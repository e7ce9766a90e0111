//! Bayesian least-squares policy iteration and its randomised online variant,
//! with the benchmark environments and experiment harness used to evaluate them.

pub mod agents;
pub mod envs;
pub mod error;
pub mod eval;
pub mod features;
pub mod harness;
pub mod numerics;

pub use error::{Error, Result};
