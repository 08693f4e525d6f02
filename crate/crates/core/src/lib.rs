//! Design and analysis toolkit for dispersion-engineered parametric
//! down-conversion sources.
//!
//! * [`dispersion`]: temperature-dependent refractive indices and derived
//!   propagation quantities.
//! * [`coefficients`]: named Sellmeier coefficient sets loaded from TOML.
//! * [`phasematch`]: phase mismatch, poling periods, group-velocity-matched
//!   operating points and merge temperatures.
//! * [`jsa`]: joint spectral amplitudes, marginal spectra, bandwidths and
//!   correlation times.
//! * [`tagproc`]: coincidence counting and pair-rate reduction of detector
//!   time tags.

pub mod coefficients;
pub mod dispersion;
pub mod format;
pub mod jsa;
pub mod phasematch;
pub mod roots;
pub mod tagproc;
