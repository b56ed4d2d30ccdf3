//! Shared numerical substrate: transforms, dense linear algebra, fixed-step
//! integration, seeded random streams and a finite-difference gradient check.

mod fft;
mod gradcheck;
mod linalg;
mod ode;
mod rng;

pub use fft::{irfft, rfft};
pub use gradcheck::grad_check;
pub use linalg::{cholesky, gemm, lstsq, lstsq_many, DEFAULT_JITTER};
pub use ode::rk4_step;
pub use rng::RngStream;

pub use num_complex::Complex64;
