//! Numerical toolkit for the fractional Schrödinger equation
//! `ε^{2s}(−Δ)^s u + V u = u^{p−1}` in `ℝ^N`: power-weight asymptotics of the
//! fractional Laplacian, threshold exponent algebra, a radial penalized
//! solver and decay verification.

pub mod cli;
pub mod decay;
pub mod error;
pub mod exponents;
pub mod fraclap;
pub mod kernel;
pub mod model;
pub mod quad;
pub mod solver;

pub use error::{Error, Result};
