//! Operator learning and sparse model discovery for voltage-driven hysteresis.
//!
//! The pipeline has two stages. A 1D Fourier neural operator ([`fno`]) learns
//! the map from voltage fields to displacement profiles; its predictions are
//! then distilled into a sparse, white-box ODE by sequential thresholded least
//! squares ([`discovery`]). Discovered models are integrated against arbitrary
//! drives by [`symmodel`], using the same integrator that generates the
//! ground-truth data in [`truthsim`].

pub mod discovery;
pub mod error;
pub mod fields;
pub mod fno;
pub mod numerics;
pub mod symmodel;
pub mod terms;
pub mod truthsim;

pub use error::{NsoError, Result};
