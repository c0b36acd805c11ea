//! Spectral Galerkin surface integral solver for time-harmonic electromagnetic
//! scattering by penetrable (dielectric or absorbing) bodies.

pub mod assembly;
pub mod config;
pub mod driver;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod mie;
pub mod spectral;
pub mod vector;

pub use error::{Error, Result};
