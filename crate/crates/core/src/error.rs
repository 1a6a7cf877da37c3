//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by field algebra, geometry, jets, the ledger, the stage
/// builder, noise sampling and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the documented domain of an operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two fields live on different grids.
    #[error("grid mismatch: {0} vs {1}")]
    GridMismatch(usize, usize),

    /// A time stencil does not cover the support of a time kernel.
    #[error("time stencil too short: need {required} samples before t, have {available}")]
    StencilTooShort { required: usize, available: usize },

    /// A symmetric matrix lies outside the domain of the geometric lemma.
    #[error("matrix outside the admissible ball: |R - Id| = {distance:.6e} > radius {radius:.6e}")]
    GeometryDomain { distance: f64, radius: f64 },

    /// The amplitude argument Id − R̊/ρ left the admissible ball at a grid
    /// point.
    #[error("amplitude argument outside the admissible ball at grid point {point}: |R - Id| = {distance:.6e} > radius {radius:.6e}")]
    AmplitudeDomain { point: usize, distance: f64, radius: f64 },

    /// No pairwise disjoint placement of jet supports was found.
    #[error("no disjoint jet placement: overlapping pairs {0:?}")]
    Placement(Vec<(usize, usize)>),

    /// A scale relation required by the jet construction fails.
    #[error("scale error: {0}")]
    Scale(String),

    /// The grid cannot resolve the requested structure.
    #[error("insufficient resolution: {what}; need n >= {min_n}")]
    Resolution { what: String, min_n: usize },

    /// A derived parameter violates an invariant that should hold by
    /// construction.
    #[error("derivation error: {0}")]
    Derivation(String),

    /// A quadrature rule failed to converge.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// A ledger search hit its iteration cap.
    #[error("search exhausted after {iterations} iterations; binding constraint: {binding}")]
    SearchExhausted { iterations: usize, binding: String },

    /// Malformed configuration text.
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    /// Malformed snapshot file.
    #[error("snapshot format error: {0}")]
    Snapshot(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
