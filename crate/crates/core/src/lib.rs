//! Certified bounds on constrained quantum relative entropy minimization.
//!
//! The relative entropy `D(ρ‖σ)` is written as an integral over `tr⁺[σs − ρ]`.
//! Discretizing that integral on a grid `t` gives semidefinite programs whose
//! optima bracket the true minimum from below and above; refining the grid
//! closes the gap. The crate ships the linear algebra, the exact oracles used
//! for testing, grid construction, an interior-point SDP solver with certified
//! dual bounds, and constructors for the standard application problems.

pub mod bounds;
pub mod divergence;
pub mod error;
pub mod gridding;
pub mod instances;
pub mod linalg;
pub mod sdp;

pub use error::{Error, Result};

/// Converts a value in nats to bits.
pub fn nats_to_bits(x: f64) -> f64 {
    x / std::f64::consts::LN_2
}
