//! Simulation of double Bragg diffraction pulses and Mach-Zehnder atom interferometers in
//! recoil units, with an exact split-step grid solver as reference.

pub mod cli;
pub mod error;
pub mod grid;
pub mod interferometer;
pub mod io;
pub mod multilevel;
pub mod ode;
pub mod optimize;
pub mod strategies;
pub mod tls;
pub mod units;

pub use error::{Error, Result};
