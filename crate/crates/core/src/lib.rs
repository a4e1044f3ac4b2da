//! Diffusion-based lossy compression toolkit: Gaussian rate-distortion
//! analytics, reverse channel coding, a progressive codec over analytic
//! sources and a Monte Carlo verification harness.

pub mod cli;
pub mod codec;
pub mod error;
pub mod gaussian_rd;
pub mod harness;
pub mod quad;
pub mod rcc;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
