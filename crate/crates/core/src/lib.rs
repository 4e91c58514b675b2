//! Gaussian-state simulation of photon-pair generation in a parametrically
//! modulated two-mode ring resonator coupled to a thermal bath.
//!
//! Quadratures are ordered `[x₊, p₊, x₋, p₋]` with vacuum variance ½ and
//! ħ = k_B = 1.

pub mod error;
pub mod floquet;
pub mod gaussian;
pub mod cli;
pub mod dynamics;
pub mod integrator;
pub mod modulation;
pub mod observables;
pub mod quadrature;

pub use error::{Error, Result};
