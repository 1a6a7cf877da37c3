//! One step of the convex-integration iteration at desk scale.
//!
//! A stage is a triple (v_q, R̊_q, π_q) solving the relaxed system
//!
//! - additive: ∂_t v + (−Δ)^m v + div((v+z)⊗(v+z)) + ∇π = div R̊,
//! - multiplicative: ∂_t v + ½v + (−Δ)^m v + Υ div(v⊗v) + ∇p = div R̊,
//!
//! sampled on a five-point time stencil t_j = t₀ + (j − 2)h. Time
//! derivatives of sampled data use the fourth-order centered difference at
//! the middle of a stencil; time derivatives of the jets are analytic.
//!
//! All products are taken pointwise on the collocation grid. The
//! perturbation carries compactly supported jets, and only the
//! collocation product preserves their pairwise disjointness exactly, which
//! the cancellation between w_p⊗w_p and the mollified stress relies on. The
//! residual evaluator uses the same product, so the discrete equation is
//! consistent with the stage construction.
//!
//! Submodules: [`base`] (starting pairs), [`pump`] (cutoff, energy pump and
//! amplitudes), [`residual`] (equation residual), [`stage`] (perturbation,
//! Reynolds decomposition and the identity suite).

pub mod base;
pub mod colloc;
pub mod pump;
pub mod residual;
pub mod stage;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ledger::NoiseMode;
use crate::noise::{OuPath, ScalarPath};
use crate::spectral::grid::pad_coeffs;
use crate::spectral::{FourierField3, Grid3, ScalarField, SpectralData, SymTensorField3};

pub use base::{base_pair, BasePair};
pub use pump::{amplitudes, cutoff_chi, domain_radius, energy_pump_rho, AmplitudeNormalization};
pub use residual::{residual, ResidualReport};
pub use stage::{determinism_check, iterate, DeterminismReport, IdentityCheck, StageConfig, StageReport, ToyScales, DEFAULT_STEP};

/// Number of stencil points.
pub const STENCIL: usize = 5;

/// Index of the stencil centre.
pub const CENTER: usize = 2;

/// Times t₀ + (j − 2)h of the stencil.
pub fn stencil_times(t0: f64, h: f64) -> [f64; STENCIL] {
    std::array::from_fn(|j| t0 + (j as f64 - CENTER as f64) * h)
}

/// Fourth-order centred derivative at the middle of five equispaced
/// samples: (f₀ − 8f₁ + 8f₃ − f₄)/(12h).
pub fn fd4<T: SpectralData>(s: &[T], h: f64) -> T {
    assert_eq!(s.len(), STENCIL, "fd4 needs five samples");
    let mut d = s[0].clone();
    d.axpy(-8.0, &s[1]);
    d.axpy(8.0, &s[3]);
    d.axpy(-1.0, &s[4]);
    d.scale(1.0 / (12.0 * h));
    d
}

/// [`fd4`] for pointwise samples.
pub fn fd4_values(s: [&[f64]; STENCIL], h: f64) -> Vec<f64> {
    let c = 1.0 / (12.0 * h);
    (0..s[0].len())
        .map(|i| c * (s[0][i] - 8.0 * s[1][i] + 8.0 * s[3][i] - s[4][i]))
        .collect()
}

/// The stochastic input of a stage.
#[derive(Clone, Copy, Debug)]
pub enum Forcing<'a> {
    /// Stochastic convolution z; `None` means z ≡ 0.
    Additive(Option<&'a OuPath>),
    /// Brownian path B with Υ = e^B; `None` means B ≡ 0.
    Multiplicative(Option<&'a ScalarPath>),
}

impl Forcing<'_> {
    /// Noise mode.
    pub fn mode(&self) -> NoiseMode {
        match self {
            Forcing::Additive(_) => NoiseMode::Additive,
            Forcing::Multiplicative(_) => NoiseMode::Multiplicative,
        }
    }

    /// z(t) on `grid` (zero for t ≤ 0, for z ≡ 0 and in multiplicative
    /// mode). The path must be sampled at t.
    pub fn z_at(&self, t: f64, grid: Grid3) -> Result<FourierField3> {
        match self {
            Forcing::Additive(Some(path)) => {
                let ng = path.modes.grid.n();
                if ng > grid.n() {
                    return Err(Error::InvalidArgument(format!(
                        "noise grid n = {ng} is finer than the stage grid n = {}",
                        grid.n()
                    )));
                }
                let z = path.field_at(t)?;
                let cs: [Vec<_>; 3] = std::array::from_fn(|c| pad_coeffs(z.comp(c), ng, grid.n()));
                Ok(FourierField3::from_coeffs(grid, cs))
            }
            _ => Ok(FourierField3::zeros(grid)),
        }
    }

    /// Υ(t) = e^{B(t)}, equal to 1 for t < 0, for B ≡ 0 and in additive
    /// mode.
    pub fn upsilon_at(&self, t: f64) -> f64 {
        match self {
            Forcing::Multiplicative(Some(b)) => b.at(t).exp(),
            _ => 1.0,
        }
    }

    /// Whether the forcing is identically trivial.
    pub fn is_trivial(&self) -> bool {
        matches!(self, Forcing::Additive(None) | Forcing::Multiplicative(None))
    }
}

/// Mode-specific data carried along the stencil.
#[derive(Clone, Debug)]
pub enum StageAux {
    /// z at the stencil times.
    Additive {
        /// z(t_j).
        z: Vec<FourierField3>,
    },
    /// Υ at the stencil times.
    Multiplicative {
        /// Υ(t_j).
        upsilon: Vec<f64>,
    },
}

/// A stage sampled on the five-point stencil.
#[derive(Clone, Debug)]
pub struct StagePair {
    /// Noise mode.
    pub mode: NoiseMode,
    /// Iteration index q.
    pub q: usize,
    /// Fractional order m.
    pub m: f64,
    /// Stencil centre.
    pub t0: f64,
    /// Stencil spacing.
    pub h: f64,
    /// v_q(t_j).
    pub v: Vec<FourierField3>,
    /// R̊_q(t_j).
    pub r: Vec<SymTensorField3>,
    /// π_q(t_j) (p_q in multiplicative mode).
    pub pi: Vec<ScalarField>,
    /// z or Υ at the stencil times.
    pub aux: StageAux,
}

impl StagePair {
    /// Grid of the fields.
    pub fn grid(&self) -> Grid3 {
        self.v[CENTER].grid()
    }

    /// Stencil times.
    pub fn times(&self) -> [f64; STENCIL] {
        stencil_times(self.t0, self.h)
    }

    /// Check stencil lengths and grids.
    pub fn validate(&self) -> Result<()> {
        let aux_len = match &self.aux {
            StageAux::Additive { z } => z.len(),
            StageAux::Multiplicative { upsilon } => upsilon.len(),
        };
        if [self.v.len(), self.r.len(), self.pi.len(), aux_len].iter().any(|&l| l != STENCIL) {
            return Err(Error::InvalidArgument("a stage pair needs five stencil samples of v, R, π and the noise".into()));
        }
        let n = self.grid().n();
        let grids = self
            .v
            .iter()
            .map(|f| f.grid().n())
            .chain(self.r.iter().map(|f| f.grid().n()))
            .chain(self.pi.iter().map(|f| f.grid().n()));
        for g in grids {
            if g != n {
                return Err(Error::GridMismatch(n, g));
            }
        }
        if !(self.h > 0.0) {
            return Err(Error::InvalidArgument(format!("stencil spacing h = {} must be positive", self.h)));
        }
        Ok(())
    }
}

/// L² norms of the named pieces of a decomposition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedNorm {
    /// Name of the piece.
    pub name: String,
    /// Its norm.
    pub value: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd4_is_exact_on_quartics() {
        let g = Grid3::new(8).unwrap();
        let h = 0.1;
        let f = |t: f64| 1.0 + t - 2.0 * t * t + 0.5 * t.powi(3) + 0.25 * t.powi(4);
        let df = |t: f64| 1.0 - 4.0 * t + 1.5 * t * t + t.powi(3);
        let ts = stencil_times(0.3, h);
        let samples: Vec<ScalarField> = ts.iter().map(|&t| ScalarField::from_fn(g, |_| f(t))).collect();
        let d = fd4(&samples, h);
        assert!((d.coeffs()[0].re - df(0.3)).abs() < 1e-12);
        let vals: Vec<Vec<f64>> = ts.iter().map(|&t| vec![f(t)]).collect();
        let dv = fd4_values([&vals[0], &vals[1], &vals[2], &vals[3], &vals[4]], h);
        assert!((dv[0] - df(0.3)).abs() < 1e-12);
    }

    #[test]
    fn trivial_forcing_has_unit_upsilon_and_zero_z() {
        let g = Grid3::new(8).unwrap();
        let f = Forcing::Multiplicative(None);
        assert_eq!(f.upsilon_at(0.7), 1.0);
        let b = ScalarPath { dt: 0.1, values: vec![0.0, 0.5, 1.0] };
        let f = Forcing::Multiplicative(Some(&b));
        assert_eq!(f.upsilon_at(-0.3), 1.0);
        assert!((f.upsilon_at(0.1) - 0.5f64.exp()).abs() < 1e-15);
        let z = Forcing::Additive(None).z_at(1.0, g).unwrap();
        assert_eq!(crate::spectral::ops::coeff_l2(&z), 0.0);
    }
}
