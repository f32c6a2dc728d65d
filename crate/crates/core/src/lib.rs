//! Discrete pseudo-differential calculus on `ℤⁿ×𝕋ⁿ`.
//!
//! Symbols `a(k,x)` live on the lattice times the torus and act on lattice
//! functions through `(T_a u)(k) = ∫ e^{2πik·x} a(k,x) û(x) dx`. Everything is
//! realized on truncated boxes `{-N..N}ⁿ` and uniform torus grids, with dense
//! finite-section matrices between weighted (Sobolev) ℓ² spaces.

pub mod adjointness;
pub mod calculus;
pub mod error;
pub mod fit;
pub mod lattice;
pub mod par;
pub mod parametrix;
pub mod quantization;
pub mod regression;
pub mod symbol;
pub mod torus;

pub use error::{Error, Result};
pub use num_complex::Complex64;
