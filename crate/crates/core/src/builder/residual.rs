//! Residual of the relaxed system at the centre of a stencil.
//!
//! The defect
//!
//! r = ∂_t v + (½v) + (−Δ)^m v + div N(v) + ∇π − div R̊,
//!
//! with N = (v+z)⊗(v+z) (additive) or Υ v⊗v (multiplicative), is split by
//! the Leray projection P. The projected part P r does not see the
//! pressure and measures the equation; the gradient part (I − P) r checks
//! that the carried pressure is the one the decomposition produced.
//!
//! Modes whose derivative wavevector vanishes but which are not the mean
//! (the pure Nyquist corners) are dropped: no discrete divergence reaches
//! them, so the discrete system is posed on the remaining modes.

use serde::Serialize;

use super::colloc::{add_scaled3, phys, sym_outer};
use super::{fd4, NamedNorm, StageAux, StagePair, CENTER};
use crate::error::Result;
use crate::ledger::NoiseMode;
use crate::spectral::norms::{hs_norm, l2_parseval};
use crate::spectral::ops::{fractional_laplacian, gradient, leray_project, tensor_divergence};
use crate::spectral::{FourierField3, SpectralData};

/// Norms of the residual.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Stage index of the pair.
    pub q: usize,
    /// Time of evaluation.
    pub t: f64,
    /// ‖P r‖_{L²}.
    pub l2: f64,
    /// ‖P r‖_{H^{−1}}.
    pub h_minus1: f64,
    /// Sum of the L² norms of the projected terms.
    pub scale: f64,
    /// l2 / scale.
    pub relative: f64,
    /// ‖(I − P) r‖_{L²}.
    pub gradient_l2: Option<f64>,
    /// Gradient part relative to the sum of the gradient parts of the terms.
    pub gradient_relative: Option<f64>,
    /// L² norms of the projected terms.
    pub terms: Vec<NamedNorm>,
}

/// Zero the modes that no discrete derivative reaches (except the mean).
pub fn drop_unreachable(f: &mut FourierField3) {
    let g = f.grid();
    for idx in 1..g.len() {
        let k = g.deriv_wavevector(idx);
        if k == [0.0; 3] {
            for c in 0..3 {
                f.comp_mut(c)[idx] = num_complex::Complex64::new(0.0, 0.0);
            }
        }
    }
}

fn safe_ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// The individual terms of the defect at the stencil centre, with signs
/// such that r is their sum.
pub fn residual_terms(pair: &StagePair) -> Result<Vec<(String, FourierField3)>> {
    pair.validate()?;
    let g = pair.grid();
    let v = &pair.v[CENTER];
    let mut terms = vec![("time derivative".to_string(), fd4(&pair.v, pair.h))];
    let mut lin = fractional_laplacian(v, pair.m)?;
    if pair.mode == NoiseMode::Multiplicative {
        lin.axpy(0.5, v);
    }
    terms.push(("linear".into(), lin));
    let vp = phys(v);
    let nl = match &pair.aux {
        StageAux::Additive { z } => {
            let u = add_scaled3(&vp, 1.0, &phys(&z[CENTER]));
            tensor_divergence(&sym_outer(g, &u, &u, false)?)
        }
        StageAux::Multiplicative { upsilon } => {
            let mut d = tensor_divergence(&sym_outer(g, &vp, &vp, false)?);
            d.scale(upsilon[CENTER]);
            d
        }
    };
    terms.push(("nonlinear".into(), nl));
    terms.push(("pressure gradient".into(), gradient(&pair.pi[CENTER])));
    let mut div_r = tensor_divergence(&pair.r[CENTER]);
    div_r.scale(-1.0);
    terms.push(("stress divergence".into(), div_r));
    for (_, t) in terms.iter_mut() {
        drop_unreachable(t);
    }
    Ok(terms)
}

/// Residual of the relaxed system at the stencil centre.
pub fn residual(pair: &StagePair) -> Result<ResidualReport> {
    let terms = residual_terms(pair)?;
    let mut total = terms[0].1.zeros_like();
    let mut scale = 0.0;
    let mut grad_scale = 0.0;
    let mut norms = Vec::with_capacity(terms.len());
    for (name, t) in &terms {
        total.axpy(1.0, t);
        let p = leray_project(t);
        let pn = l2_parseval(&p);
        let mut gpart = t.clone();
        gpart.axpy(-1.0, &p);
        scale += pn;
        grad_scale += l2_parseval(&gpart);
        norms.push(NamedNorm { name: name.clone(), value: pn });
    }
    let p = leray_project(&total);
    let l2 = l2_parseval(&p);
    let mut gpart = total.clone();
    gpart.axpy(-1.0, &p);
    let gl2 = l2_parseval(&gpart);
    Ok(ResidualReport {
        q: pair.q,
        t: pair.t0,
        l2,
        h_minus1: hs_norm(&p, -1.0).value,
        scale,
        relative: safe_ratio(l2, scale),
        gradient_l2: Some(gl2),
        gradient_relative: Some(safe_ratio(gl2, grad_scale)),
        terms: norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{base_pair, BasePair, Forcing};
    use crate::spectral::Grid3;

    #[test]
    fn corrupting_the_stress_raises_the_residual_proportionally() {
        let g = Grid3::new(16).unwrap();
        let b = BasePair::new(NoiseMode::Additive, 2.0, 1.0, g).unwrap();
        let mut p = base_pair(&b, &Forcing::Additive(None), 0.0, 1e-3).unwrap();
        let clean = residual(&p).unwrap();
        let div_r = l2_parseval(&leray_project(&tensor_divergence(&p.r[CENTER])));
        p.r[CENTER].scale(1.01);
        let bad = residual(&p).unwrap();
        assert!(bad.l2 > 1e6 * clean.l2.max(1e-300));
        assert!((bad.l2 / (0.01 * div_r) - 1.0).abs() < 1e-6, "{} vs {}", bad.l2, 0.01 * div_r);
    }

    #[test]
    fn unreachable_modes_are_dropped() {
        let g = Grid3::new(8).unwrap();
        let mut f = FourierField3::from_fn(g, |x| [(4.0 * x[0]).cos() + 1.0, 0.0, 0.0]);
        drop_unreachable(&mut f);
        assert!((f.comp(0)[0].re - 1.0).abs() < 1e-14);
        assert!(f.comp(0)[g.index(4, 0, 0)].norm() < 1e-15);
    }
}
