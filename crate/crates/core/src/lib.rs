//! Differentially private one-pass gradient descent on linear regression: the exact
//! deterministic-equivalent risk ODE, a simulator, and the scaling-law machinery built on
//! top of them.

pub mod clipping;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod numerics;
pub mod ode;
pub mod privacy;
pub mod rng;
pub mod scaling;
pub mod schedule;
pub mod sim;
pub mod spectrum;

pub use error::{Error, Result};
