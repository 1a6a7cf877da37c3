//! Starting pairs of the iteration.
//!
//! Both pairs are shear flows v₀ = A(t)(2π)^{−3/2}(sin x₃, 0, 0) with an
//! exponentially growing amplitude. Since div(v₀⊗v₀) = 0 the whole
//! equation defect is linear and is written as the divergence of an
//! explicit trace-free stress:
//!
//! - additive, A = L²e^{2Lt}:
//!   R̊₀ = −2L·A(2π)^{−3/2} cos x₃ (e₁⊗e₃ + e₃⊗e₁) + ℛ(−Δ)^m v₀
//!        + v₀⊗̊z + z⊗̊v₀ + z⊗̊z, π₀ = −⅓(2v₀·z + |z|²), M₀ = L⁴e^{4Lt};
//! - multiplicative, A = m_L e^{2Lt+L}:
//!   R̊₀ = −(2L + ½)A(2π)^{−3/2} cos x₃ (e₁⊗e₃ + e₃⊗e₁) + ℛ(−Δ)^m v₀,
//!   p₀ = 0, M₀ = e^{4Lt+2L},
//!
//! with m_L = √3 L^{1/4} e^{L^{1/4}/2}.

use std::f64::consts::PI;

use super::colloc::{add_scaled3, dot_values, phys, sym_outer, Vec3};
use super::{stencil_times, Forcing, StageAux, StagePair, STENCIL};
use crate::error::{Error, Result};
use crate::ledger::NoiseMode;
use crate::spectral::ops::{fractional_laplacian, inverse_divergence};
use crate::spectral::{FourierField3, Grid3, ScalarField, SpectralData, SymTensorField3};

/// m_L = √3 L^{1/4} e^{L^{1/4}/2}.
pub fn m_l(big_l: f64) -> f64 {
    let q = big_l.powf(0.25);
    3f64.sqrt() * q * (0.5 * q).exp()
}

/// (v, R̊, π) at one time.
#[derive(Clone, Debug)]
pub struct PairSlice {
    /// Velocity.
    pub v: FourierField3,
    /// Trace-free stress.
    pub r: SymTensorField3,
    /// Pressure.
    pub pi: ScalarField,
}

/// The starting pair of one noise mode on a grid.
#[derive(Clone, Debug)]
pub struct BasePair {
    /// Noise mode.
    pub mode: NoiseMode,
    /// L.
    pub big_l: f64,
    /// Fractional order m.
    pub m: f64,
    grid: Grid3,
    unit_v: FourierField3,
    unit_v_phys: Vec3,
    unit_shear: SymTensorField3,
    unit_dissipation: SymTensorField3,
}

impl BasePair {
    /// Base pair with parameters L > 1 and m > 0 on `grid`.
    pub fn new(mode: NoiseMode, big_l: f64, m: f64, grid: Grid3) -> Result<Self> {
        if !(big_l > 1.0) || !big_l.is_finite() {
            return Err(Error::InvalidArgument(format!("the base pair needs L > 1, got {big_l}")));
        }
        let c = (2.0 * PI).powf(-1.5);
        let unit_v = FourierField3::from_fn(grid, |x| [c * x[2].sin(), 0.0, 0.0]);
        let unit_shear = SymTensorField3::from_fn(
            grid,
            |x| {
                let e = -c * x[2].cos();
                [[0.0, 0.0, e], [0.0, 0.0, 0.0], [e, 0.0, 0.0]]
            },
            true,
        );
        let unit_dissipation = inverse_divergence(&fractional_laplacian(&unit_v, m)?);
        let unit_v_phys = phys(&unit_v);
        Ok(Self { mode, big_l, m, grid, unit_v, unit_v_phys, unit_shear, unit_dissipation })
    }

    /// Grid of the fields.
    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    /// Amplitude A(t) of the shear.
    pub fn amplitude(&self, t: f64) -> f64 {
        let l = self.big_l;
        match self.mode {
            NoiseMode::Additive => l * l * (2.0 * l * t).exp(),
            NoiseMode::Multiplicative => m_l(l) * (2.0 * l * t + l).exp(),
        }
    }

    /// Growth rate of the shear stress: ∂_t A/A plus the damping term.
    fn shear_rate(&self) -> f64 {
        match self.mode {
            NoiseMode::Additive => 2.0 * self.big_l,
            NoiseMode::Multiplicative => 2.0 * self.big_l + 0.5,
        }
    }

    /// M₀(t).
    pub fn m0(&self, t: f64) -> f64 {
        let l = self.big_l;
        match self.mode {
            NoiseMode::Additive => l.powi(4) * (4.0 * l * t).exp(),
            NoiseMode::Multiplicative => (4.0 * l * t + 2.0 * l).exp(),
        }
    }

    /// ‖v₀(t)‖_{L²} = A(t)/√2.
    pub fn l2_norm(&self, t: f64) -> f64 {
        self.amplitude(t) / 2f64.sqrt()
    }

    /// Physical samples of v₀(t).
    pub fn velocity_phys(&self, t: f64) -> Vec3 {
        let a = self.amplitude(t);
        std::array::from_fn(|c| self.unit_v_phys[c].iter().map(|x| a * x).collect())
    }

    /// (v₀, R̊₀, π₀) at time t; z is read from the forcing in additive mode.
    pub fn eval(&self, t: f64, forcing: &Forcing<'_>) -> Result<PairSlice> {
        if forcing.mode() != self.mode {
            return Err(Error::InvalidArgument("forcing and base pair have different noise modes".into()));
        }
        let a = self.amplitude(t);
        let mut v = self.unit_v.clone();
        v.scale(a);
        let mut r = self.unit_shear.clone();
        r.scale(self.shear_rate() * a);
        r.axpy(a, &self.unit_dissipation);
        let mut pi = ScalarField::zeros(self.grid);
        if self.mode == NoiseMode::Additive {
            let z = forcing.z_at(t, self.grid)?;
            if crate::spectral::ops::coeff_l2(&z) > 0.0 {
                let (vp, zp) = (phys(&v), phys(&z));
                // (v+z)⊗̊(v+z) − v⊗̊v = v⊗̊z + z⊗̊v + z⊗̊z.
                let vz = add_scaled3(&vp, 1.0, &zp);
                let mut cross = sym_outer(self.grid, &vz, &vz, true)?;
                cross.axpy(-1.0, &sym_outer(self.grid, &vp, &vp, true)?);
                r.axpy(1.0, &cross);
                let tr: Vec<f64> = dot_values(&vz, &vz)
                    .iter()
                    .zip(dot_values(&vp, &vp))
                    .map(|(a, b)| -(a - b) / 3.0)
                    .collect();
                pi = ScalarField::from_physical(self.grid, &tr)?;
            }
        }
        r.trace_free = true;
        Ok(PairSlice { v, r, pi })
    }
}

/// The base pair sampled on the stencil around t₀ with spacing h.
pub fn base_pair(base: &BasePair, forcing: &Forcing<'_>, t0: f64, h: f64) -> Result<StagePair> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("stencil spacing h = {h} must be positive")));
    }
    let times = stencil_times(t0, h);
    let mut v = Vec::with_capacity(STENCIL);
    let mut r = Vec::with_capacity(STENCIL);
    let mut pi = Vec::with_capacity(STENCIL);
    for &t in &times {
        let s = base.eval(t, forcing)?;
        v.push(s.v);
        r.push(s.r);
        pi.push(s.pi);
    }
    let aux = match base.mode {
        NoiseMode::Additive => StageAux::Additive {
            z: times.iter().map(|&t| forcing.z_at(t, base.grid)).collect::<Result<_>>()?,
        },
        NoiseMode::Multiplicative => StageAux::Multiplicative {
            upsilon: times.iter().map(|&t| forcing.upsilon_at(t)).collect(),
        },
    };
    Ok(StagePair { mode: base.mode, q: 0, m: base.m, t0, h, v, r, pi, aux })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::residual::residual;
    use crate::noise::{ou_convolve, sample_wiener, NoiseConfig, NoisePath};
    use crate::spectral::norms::l2_parseval;
    use crate::tolerances::BASE_PAIR_RESIDUAL;

    fn grid() -> Grid3 {
        Grid3::new(16).unwrap()
    }

    #[test]
    fn additive_base_pair_solves_the_relaxed_system() {
        let b = BasePair::new(NoiseMode::Additive, 2.0, 1.0, grid()).unwrap();
        let p = base_pair(&b, &Forcing::Additive(None), 0.1, 1e-3).unwrap();
        let rep = residual(&p).unwrap();
        assert!(rep.relative < BASE_PAIR_RESIDUAL, "{rep:?}");
        assert!(rep.gradient_relative.unwrap() < BASE_PAIR_RESIDUAL);
    }

    #[test]
    fn multiplicative_base_pair_solves_the_relaxed_system() {
        for m in [0.7, 1.0, 1.2] {
            let b = BasePair::new(NoiseMode::Multiplicative, 1.5, m, grid()).unwrap();
            let p = base_pair(&b, &Forcing::Multiplicative(None), 0.0, 1e-3).unwrap();
            let rep = residual(&p).unwrap();
            assert!(rep.relative < BASE_PAIR_RESIDUAL, "m = {m}: {rep:?}");
        }
    }

    #[test]
    fn additive_base_pair_with_noise() {
        let cfg = NoiseConfig { seed: 7, dt: 1e-3, t_end: 0.2, n: 8, ..NoiseConfig::additive() };
        let NoisePath::Additive(w) = sample_wiener(&cfg).unwrap() else { unreachable!() };
        let z = ou_convolve(&w, 1.0);
        let b = BasePair::new(NoiseMode::Additive, 2.0, 1.0, grid()).unwrap();
        let p = base_pair(&b, &Forcing::Additive(Some(&z)), 0.1, 1e-3).unwrap();
        let rep = residual(&p).unwrap();
        assert!(rep.relative < BASE_PAIR_RESIDUAL, "{rep:?}");
        assert!(rep.gradient_relative.unwrap() < BASE_PAIR_RESIDUAL, "{rep:?}");
    }

    #[test]
    fn base_pair_norms() {
        for mode in [NoiseMode::Additive, NoiseMode::Multiplicative] {
            let b = BasePair::new(mode, 2.0, 1.0, grid()).unwrap();
            let forcing = match mode {
                NoiseMode::Additive => Forcing::Additive(None),
                NoiseMode::Multiplicative => Forcing::Multiplicative(None),
            };
            let t = 0.3;
            let s = b.eval(t, &forcing).unwrap();
            let l2 = l2_parseval(&s.v);
            assert!((l2 - b.l2_norm(t)).abs() < 1e-12 * l2);
            // ‖v₀‖² = M₀ (additive) and m_L² M₀/2 (multiplicative).
            let expect = match mode {
                NoiseMode::Additive => b.m0(t).sqrt() / 2f64.sqrt(),
                NoiseMode::Multiplicative => m_l(2.0) * b.m0(t).sqrt() / 2f64.sqrt(),
            };
            assert!((l2 - expect).abs() < 1e-12 * l2);
        }
    }

    #[test]
    fn rejects_small_l() {
        assert!(BasePair::new(NoiseMode::Additive, 1.0, 1.0, grid()).is_err());
    }
}
