//! Einstein–Euler system in harmonic gauge with the Makino variable.
//!
//! The coupled system is written as a first-order symmetric hyperbolic system
//! `A⁰ ∂ₜU = (Aᵃ + Cᵃ) ∂ₐU + B U + F` for 55 unknowns per grid point.

pub mod error;
pub mod evolve;
pub mod fluid;
pub mod geometry;
pub mod grid;
pub mod initial_data;
pub mod io;
pub mod reduction;
pub mod smooth;
pub mod stats;
pub mod tensor;
pub mod wsobolev;

pub use nalgebra;

pub use error::{Error, GridError, Result};
