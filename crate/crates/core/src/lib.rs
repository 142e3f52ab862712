//! Gauge transformations of complex Brownian bridges and weighted Wiener
//! measures for the periodic derivative nonlinear Schrödinger equation.

pub mod bridge;
pub mod cli;
pub mod change_of_measure;
pub mod discrete_gaussian;
pub mod dynamics;
pub mod error;
pub mod exactness;
pub mod functionals;
pub mod gauge;
pub mod identities;
pub mod io;
pub mod measures;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use gauge::{GaugeMode, GaugeSpec};
pub use spectral::{GridField, SpectralField};
