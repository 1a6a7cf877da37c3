//! Cutoff profiles Φ, φ = −ΔΦ on ℝ² and ψ on ℝ.
//!
//! All three are built from the bump b_K(r) = exp(−K/(1−r²)) on the unit
//! ball (K > 0 is the steepness; K = 1 is the textbook bump):
//!
//! - Φ(y) = C_Φ b_K(|y|), so φ(y) = −C_Φ (Δb_K)(|y|) in closed form;
//! - ψ(s) = C_ψ b_K′(s), odd, hence of zero mean.
//!
//! The constants C_Φ, C_ψ enforce ∫_{ℝ²} φ² = 4π² and ∫_ℝ ψ² = 2π after
//! composite Gauss–Legendre quadrature whose convergence is checked by
//! panel doubling.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tolerances::{PROFILE_LAPLACIAN_FD, PROFILE_NORMALIZATION};

/// Default steepness of the bump.
pub const DEFAULT_STEEPNESS: f64 = 6.0;

/// Gauss–Legendre nodes per panel.
const QUAD_NODES: usize = 32;
/// Starting and maximal panel counts for the doubling test on [0, 1].
const QUAD_PANELS_START: usize = 8;
const QUAD_PANELS_MAX: usize = 1024;
/// Relative agreement required between successive panel counts.
const QUAD_CONVERGENCE: f64 = 1e-13;
/// Step of the finite-difference Laplacian oracle.
const FD_STEP: f64 = 5e-4;

/// Smallest accepted smoothness order.
pub const MIN_SMOOTHNESS_ORDER: usize = 4;

/// Radial derivatives of b_K at r: (b, b′, b″, Δb) with Δb = b″ + b′/r in 2-D.
fn bump_derivs(k: f64, r: f64) -> (f64, f64, f64, f64) {
    let r = r.abs();
    if r >= 1.0 {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let u = 1.0 - r * r;
    let b = (-k / u).exp();
    if b == 0.0 {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let g1 = -2.0 * k * r / (u * u);
    let g2 = -2.0 * k / (u * u) - 8.0 * k * r * r / (u * u * u);
    let lap = b * (-4.0 * k / (u * u) - 8.0 * k * r * r / (u * u * u) + 4.0 * k * k * r * r / (u * u * u * u));
    (b, g1 * b, (g2 + g1 * g1) * b, lap)
}

/// Composite Gauss–Legendre integral of f on [0, 1] with `panels` panels.
fn integrate01(rule: &GaussLegendre, panels: usize, f: &impl Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    for p in 0..panels {
        let a = p as f64 / panels as f64;
        let h = 1.0 / panels as f64;
        for (x, w) in rule.as_node_weight_pairs() {
            total += 0.5 * h * w * f(a + 0.5 * h * (1.0 + x));
        }
    }
    total
}

/// Integral on [0, 1] refined by panel doubling until converged.
fn converged_integral(what: &str, f: impl Fn(f64) -> f64) -> Result<f64> {
    let rule = GaussLegendre::new(NonZeroUsize::new(QUAD_NODES).expect("nonzero"));
    let mut panels = QUAD_PANELS_START;
    let mut prev = integrate01(&rule, panels, &f);
    while panels < QUAD_PANELS_MAX {
        panels *= 2;
        let next = integrate01(&rule, panels, &f);
        if (next - prev).abs() <= QUAD_CONVERGENCE * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!(
        "{what}: no convergence after {QUAD_PANELS_MAX} panels"
    )))
}

/// Verification data computed when the profiles are built.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileChecks {
    /// |∫φ² − 4π²|/4π² with an independent quadrature rule.
    pub phi_sq_rel_error: f64,
    /// |∫ψ² − 2π|/2π with an independent quadrature rule.
    pub psi_sq_rel_error: f64,
    /// ∫_{ℝ²} φ.
    pub phi_integral: f64,
    /// ∫_ℝ ψ (zero by odd symmetry up to round-off).
    pub psi_integral: f64,
    /// sup |φ + Δ_h Φ| / sup |φ| with a fourth-order stencil.
    pub laplacian_fd_rel_error: f64,
    /// Whether all normalisation checks meet their tolerances.
    pub pass: bool,
}

/// The profile triple and its normalising constants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutoffProfiles {
    /// Requested smoothness order (the profiles are C^∞; this is recorded
    /// and validated for the caller's estimates).
    pub smoothness_order: usize,
    /// Steepness K of the bump.
    pub steepness: f64,
    /// Normalising constant of Φ.
    pub c_phi: f64,
    /// Normalising constant of ψ.
    pub c_psi: f64,
    /// Build-time checks.
    pub checks: ProfileChecks,
}

impl CutoffProfiles {
    /// Build with the default steepness.
    pub fn build(smoothness_order: usize) -> Result<Self> {
        Self::with_steepness(smoothness_order, DEFAULT_STEEPNESS)
    }

    /// Build with an explicit steepness K > 0.
    pub fn with_steepness(smoothness_order: usize, steepness: f64) -> Result<Self> {
        if smoothness_order < MIN_SMOOTHNESS_ORDER {
            return Err(Error::InvalidArgument(format!(
                "smoothness order {smoothness_order} < {MIN_SMOOTHNESS_ORDER}"
            )));
        }
        if !(steepness.is_finite() && steepness > 0.0) {
            return Err(Error::InvalidArgument(format!("steepness {steepness} must be positive")));
        }
        let k = steepness;
        // ∫_{ℝ²} (Δb)² = 2π ∫₀¹ (Δb)² r dr;  ∫_ℝ b′² = 2 ∫₀¹ b′².
        let lap_sq = 2.0 * PI * converged_integral("∫(Δb)²", |r| bump_derivs(k, r).3.powi(2) * r)?;
        let db_sq = 2.0 * converged_integral("∫b′²", |s| bump_derivs(k, s).1.powi(2))?;
        let mut out = Self {
            smoothness_order,
            steepness,
            c_phi: (4.0 * PI * PI / lap_sq).sqrt(),
            c_psi: (2.0 * PI / db_sq).sqrt(),
            checks: ProfileChecks {
                phi_sq_rel_error: 0.0,
                psi_sq_rel_error: 0.0,
                phi_integral: 0.0,
                psi_integral: 0.0,
                laplacian_fd_rel_error: 0.0,
                pass: false,
            },
        };
        out.checks = out.verify();
        Ok(out)
    }

    /// Independent verification with a different rule and panel count.
    fn verify(&self) -> ProfileChecks {
        let rule = GaussLegendre::new(NonZeroUsize::new(24).expect("nonzero"));
        let panels = 96;
        let phi_sq = 2.0 * PI * integrate01(&rule, panels, &|r| self.phi(r).powi(2) * r);
        let phi_int = 2.0 * PI * integrate01(&rule, panels, &|r| self.phi(r) * r);
        let psi_sq = 2.0 * integrate01(&rule, panels, &|s| self.psi(s).powi(2));
        let psi_int = integrate01(&rule, panels, &|s| self.psi(s))
            + integrate01(&rule, panels, &|s| self.psi(-s));
        let fd = self.laplacian_fd_error();
        let phi_sq_rel_error = (phi_sq - 4.0 * PI * PI).abs() / (4.0 * PI * PI);
        let psi_sq_rel_error = (psi_sq - 2.0 * PI).abs() / (2.0 * PI);
        ProfileChecks {
            phi_sq_rel_error,
            psi_sq_rel_error,
            phi_integral: phi_int,
            psi_integral: psi_int,
            laplacian_fd_rel_error: fd,
            pass: phi_sq_rel_error < PROFILE_NORMALIZATION
                && psi_sq_rel_error < PROFILE_NORMALIZATION
                && fd < PROFILE_LAPLACIAN_FD,
        }
    }

    /// Fourth-order five-point-per-axis Laplacian of Φ against −φ on a
    /// polar sample set, relative to sup|φ|.
    fn laplacian_fd_error(&self) -> f64 {
        let h = FD_STEP;
        let big = |y0: f64, y1: f64| self.big_phi((y0 * y0 + y1 * y1).sqrt());
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..200 {
            let r = 0.999 * i as f64 / 199.0;
            for j in 0..7 {
                let th = 0.37 + j as f64 * 2.0 * PI / 7.0;
                let (y0, y1) = (r * th.cos(), r * th.sin());
                let d2 = |f: &dyn Fn(f64) -> f64| {
                    (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h))
                        / (12.0 * h * h)
                };
                let lap = d2(&|e| big(y0 + e, y1)) + d2(&|e| big(y0, y1 + e));
                let phi = self.phi(r);
                worst = worst.max((phi + lap).abs());
                scale = scale.max(phi.abs());
            }
        }
        worst / scale
    }

    /// Φ as a function of the radius.
    pub fn big_phi(&self, r: f64) -> f64 {
        self.c_phi * bump_derivs(self.steepness, r).0
    }

    /// dΦ/dr.
    pub fn big_phi_dr(&self, r: f64) -> f64 {
        self.c_phi * bump_derivs(self.steepness, r).1
    }

    /// φ = −ΔΦ as a function of the radius.
    pub fn phi(&self, r: f64) -> f64 {
        -self.c_phi * bump_derivs(self.steepness, r).3
    }

    /// ψ(s).
    pub fn psi(&self, s: f64) -> f64 {
        self.c_psi * s.signum() * bump_derivs(self.steepness, s).1
    }

    /// ψ′(s).
    pub fn psi_ds(&self, s: f64) -> f64 {
        self.c_psi * bump_derivs(self.steepness, s).2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisations_and_fd_oracle() {
        for k in [1.0, DEFAULT_STEEPNESS, 6.0] {
            let p = CutoffProfiles::with_steepness(4, k).unwrap();
            let c = &p.checks;
            assert!(c.phi_sq_rel_error < PROFILE_NORMALIZATION, "{k}: {c:?}");
            assert!(c.psi_sq_rel_error < PROFILE_NORMALIZATION, "{k}: {c:?}");
            assert!(c.phi_integral.abs() < 1e-10, "{k}: {c:?}");
            assert!(c.psi_integral.abs() < 1e-14, "{k}: {c:?}");
            assert!(c.laplacian_fd_rel_error < PROFILE_LAPLACIAN_FD, "{k}: {c:?}");
            assert!(c.pass);
        }
    }

    #[test]
    fn psi_is_odd_and_supported_in_unit_ball() {
        let p = CutoffProfiles::build(4).unwrap();
        for i in 0..50 {
            let s = i as f64 / 49.0 * 1.2;
            assert_eq!(p.psi(-s), -p.psi(s));
            if s >= 1.0 {
                assert_eq!(p.psi(s), 0.0);
                assert_eq!(p.big_phi(s), 0.0);
                assert_eq!(p.phi(s), 0.0);
            }
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let p = CutoffProfiles::build(4).unwrap();
        let h = 1e-5;
        for s in [-0.7, -0.2, 0.1, 0.5, 0.8] {
            let fd = (p.psi(s + h) - p.psi(s - h)) / (2.0 * h);
            assert!((fd - p.psi_ds(s)).abs() < 1e-6 * p.psi_ds(s).abs().max(1.0));
            let fd = (p.big_phi(s.abs() + h) - p.big_phi(s.abs() - h)) / (2.0 * h);
            assert!((fd - p.big_phi_dr(s.abs())).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(CutoffProfiles::build(3).is_err());
        assert!(CutoffProfiles::with_steepness(4, 0.0).is_err());
        assert!(CutoffProfiles::with_steepness(4, f64::NAN).is_err());
    }
}
