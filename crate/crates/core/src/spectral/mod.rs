//! Fourier-spectral field algebra on the 3-torus.
//!
//! Fields are stored as Fourier coefficients on a uniform grid; nonlinear
//! pointwise operations are evaluated on a 3/2-padded grid and truncated
//! back, which removes quadratic aliasing.

pub mod field;
pub mod grid;
pub mod mollify;
pub mod norms;
pub mod ops;
pub mod snapshot;

pub use field::{FourierField3, ScalarField, SpectralData, SymTensorField3};
pub use grid::Grid3;
