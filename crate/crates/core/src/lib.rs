//! Boundary integral solver for two-dimensional, finite-depth, time-harmonic
//! water waves. Outgoing behaviour is enforced by a complex coordinate
//! stretch (a perfectly matched layer) applied to the Laplace free-space
//! kernel, so the integral equation can be truncated to a bounded curve.

pub mod assembly;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod kernels;
pub mod modes;
pub mod pml;
pub mod quadrature;
pub mod resonance;
pub mod solve;

mod par;

pub use error::{Error, Result};
