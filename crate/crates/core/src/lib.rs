//! Exact non-Markovian dynamics of quantum-dot/cavity systems coupled to an
//! acoustic-phonon bath, via Trotter decomposition with a linked-cluster
//! influence functional.
//!
//! The crate is organised bottom-up:
//!
//! * [`bath`]: phonon spectral densities, bath correlation and cumulant
//!   functions, and the discrete cumulant table `K_bb'(s)`.
//! * [`system`]: the phonon-free Hamiltonian `H0`, its one-step propagator
//!   `M = exp(-i H0 dt)` and the channel-to-bath coupling weights.
//! * [`oracle`]: the pair-correlation factors `Q^(r)` and the uncompressed
//!   full-tensor propagation used as ground truth at small memory length.
//! * [`compressed`]: the influence functional held as `U·Λ·V` with half of
//!   the memory slots on each side and per-step SVD truncation.
//! * [`fit`], [`extrapolate`]: multi-exponential fits of long-time traces and
//!   power-law extrapolation of the fitted parameters to infinite memory.
//! * [`fgr`]: golden-rule rates and the second-order virtual correction.
//!
//! Units: energies in meV, times in ps, ħ = [`units::HBAR`] meV·ps.

#![allow(clippy::needless_range_loop)]

pub mod bath;
pub mod compressed;
pub mod error;
pub mod extrapolate;
pub mod fgr;
pub mod fit;
pub mod linalg;
pub mod oracle;
pub mod quad;
pub mod system;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Default threshold used for the compressed runs throughout the examples.
pub const DEFAULT_SVD_THRESHOLD: f64 = 1e-8;
