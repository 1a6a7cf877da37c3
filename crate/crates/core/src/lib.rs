//! Numerical companion for convex-integration constructions of wild
//! solutions to stochastic, fractionally dissipated Navier–Stokes
//! equations on the 3-torus.

pub mod builder;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod jets;
pub mod ledger;
pub mod noise;
pub mod spectral;
pub mod tolerances;

pub use error::{Error, Result};
