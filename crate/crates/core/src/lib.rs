//! Simulation and design toolkit for photon-number-resolving detectors built
//! from absorbing elements, shelving states and continuously monitored
//! amplifiers.
//!
//! The crate is organized bottom-up:
//!
//! * [`space`], [`operator`], [`sparse`]: labeled Hilbert spaces and sparse operators.
//! * [`liouvillian`]: vectorized Lindblad generators and jump-count resolution.
//! * [`pulse`]: incident pulse envelopes and Fock content.
//! * [`hierarchy`]: the Fock-state hierarchy of auxiliary matrices.
//! * [`trajectory`]: conditioned evolution under continuous measurement.
//! * [`architecture`]: detector model builders.
//! * [`metrics`], [`oracles`], [`design`]: performance figures, closed forms
//!   and physical-realization arithmetic.
//! * [`simulation`]: end-to-end pipelines used by the command-line tool.

pub mod architecture;
pub mod design;
pub mod error;
pub mod hierarchy;
pub mod integrate;
pub mod liouvillian;
pub mod metrics;
pub mod operator;
pub mod oracles;
pub mod pulse;
pub mod simulation;
pub mod space;
pub mod sparse;
pub mod trajectory;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
