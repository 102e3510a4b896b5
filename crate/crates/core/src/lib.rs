//! Pulse-level simulation of nonadiabatic geometric single-qubit gates.
//!
//! Four gate families are built as piecewise-constant microwave pulse
//! sequences: naive dynamical rotations, conventional (orange-slice)
//! geometric gates, dynamically corrected geometric gates with one inserted
//! π pulse, and holonomic gates with two inserted π pulses. Their robustness
//! to off-resonance and amplitude errors is evaluated by direct propagation,
//! randomized benchmarking, filter functions and a Lindblad master equation.

pub mod benchmarking;
pub mod checks;
pub mod error;
pub mod evolution;
pub mod filter;
pub mod lindblad;
pub mod pulses;
pub mod su2;

pub use error::{GateError, Result};
