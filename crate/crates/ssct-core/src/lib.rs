//! Spectral simulator and phase-space analysis toolkit for Schrödinger
//! operators H = -laplacian + V with the potential concentrated near a
//! subspace R^k x {0} of R^d.
//!
//! The crate provides:
//! - tensor-product periodic grids and wavefunction storage ([`grid`], [`field`]),
//! - potential constructors and transverse-decay checks ([`potential`]),
//! - split-step and free propagators plus a 1-D bound-state solver
//!   ([`propagate`], [`bound`]),
//! - a band-limited coherent-state frame, the windowed phase-space transform,
//!   and region POVMs ([`frame`], [`region`], [`povm`]),
//! - scattering diagnostics: Cook integrands, approximate wave operators,
//!   the out/in/surface decomposition, surface seminorms, and state
//!   classification ([`scattering`]),
//! - slow-spreading comparison dynamics ([`yafaev`]),
//! - reproducible experiment scenarios and report emission ([`scenario`],
//!   [`config`], [`selftest`]).

pub mod bound;
pub mod config;
pub mod error;
pub mod fft;
pub mod field;
pub mod frame;
pub mod grid;
pub mod io;
pub mod numeric;
pub mod potential;
pub mod povm;
pub mod propagate;
pub mod region;
pub mod scattering;
pub mod scenario;
pub mod selftest;
pub mod window;
pub mod yafaev;

pub use error::{CoreError, Result};
