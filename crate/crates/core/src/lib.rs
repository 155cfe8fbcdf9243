//! Desk-scale numerics for Schrödinger scattering by sparse potentials.
//!
//! The crate discretizes the sandwiched free resolvent
//! `F(z) = |V|^{1/2} (-Δ - z)^{-1} V^{1/2}` on the supports of a sparse bump
//! potential, solves `P(z)(1 + F(z)) = F(z)`, scans spectral rectangles above
//! the positive axis, locates negative eigenvalues of single bumps through
//! Birman–Schwinger root finding and runs split-step wave-operator
//! diagnostics in a periodic box.

pub mod cli;
pub mod error;
pub mod lap;
pub mod linalg;
pub mod opcore;
pub mod potential;
pub mod spectra;
pub mod specfun;
pub mod waveop;

pub use error::{Result, ScatterError};
pub use num_complex::Complex64;

/// Points are stored in three components; the third is zero in two dimensions.
pub type Point = [f64; 3];

pub(crate) fn distance(x: &Point, y: &Point) -> f64 {
    let dx = x[0] - y[0];
    let dy = x[1] - y[1];
    let dz = x[2] - y[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
