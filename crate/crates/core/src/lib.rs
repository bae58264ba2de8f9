//! Numerical laboratory for the fractional anomalous-diffusion operator:
//! exact symbol calculus with bound scans, FFT quantization of the
//! conjugated operator, subelliptic and Carleman ratio measurements, and a
//! forward solver driving a unique-continuation decay experiment.

pub mod carleman;
pub mod cli;
pub mod error;
pub mod frac_ops;
pub mod geometry;
pub mod grid;
pub mod params;
pub mod phase_symbols;
pub mod spectral;
pub mod ucp;
pub mod util;

pub use error::{LabError, Result};
pub use params::{PhasePoint, ProblemParams};
