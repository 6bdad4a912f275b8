//! Linear wave structures on periodic lattices.
//!
//! The crate builds staggered differentiating filters, steps band-specific
//! iterative schemes on grids of dimension 1 to 4, splits fields into parity
//! sub-grids, and checks the results spectrally: space-time spectra, ridge
//! slopes, dispersion cones and plane-wave residuals of the continuum systems.

pub mod error;
pub mod exec;
pub mod fft;
pub mod filter;
pub mod grid;
pub mod io;
pub mod oracle;
pub mod scheme;
pub mod spectral;
pub mod symbol;
pub mod synth;
pub mod wide;

pub use error::{Error, Result};
pub use exec::Exec;
pub use filter::{design_filter, filter_error_curve, filter_spectrum, DiffFilter, FilterBand, SpectralResponse};
pub use grid::{decompose, recompose, GridField, GridShape, History, VirtualSet};
pub use scheme::{run, run_with, step, MultiplierRule, RunOptions, SchemeConfig, UpdateMode};
pub use spectral::{afc, dft, SpatialSpectra, SpectrumArray};
