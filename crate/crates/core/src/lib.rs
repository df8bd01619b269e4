//! Matrix-free exponential Runge-Kutta integrators (EpiRK4, EpiRK5P1) with
//! Krylov evaluation of phi-function combinations, plus a 2.5D resistive MHD
//! system and the experiment harness used to benchmark them.

pub mod epirk;
pub mod error;
pub mod explicit;
pub mod harness;
pub mod jacobian;
pub mod krylov;
pub mod mhd;
pub mod ops;
pub mod phi;
pub mod problems;

pub use error::{Error, Result};
