//! Full biphoton wave-function simulation of parametric down-conversion.
//!
//! The crate builds `ψ(r_s, r_i)` for a pump beam driving a sliced nonlinear
//! crystal whose signal and idler photons travel through arbitrary chains of
//! lenses, free-space sections and thin phase scatterers, then derives the
//! joint probability and the observables measured in correlation imaging:
//! intensity marginals, sum/difference correlation maps, pairs ratio, peak
//! widths, speckle contrast and Schmidt numbers.
//!
//! Module map:
//! - [`grid`]: sampling grids, fields and centered unitary DFTs.
//! - [`optics`]: elements, arm chains, impulse responses, phase screens.
//! - [`engine`]: thin/thick crystal wave functions and the `M·N⁶` kernel.
//! - [`analysis`]: everything computed from `|ψ|²`.
//! - [`oracle`]: dense-matrix reference used to validate the engine.
//! - [`scenario`]: configuration files, presets, output files, benchmark.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod grid;
pub mod optics;
pub mod oracle;
pub mod scenario;

pub use error::{Error, Result};
