//! Cutoff, energy pump and amplitudes.
//!
//! χ is 1 on [0, 1] and the identity on [2, ∞), joined on (1, 2) by the
//! quintic p(s) = 1 + 6s³ − 8s⁴ + 3s⁵ in s = z − 1. The bridge matches
//! value, slope and curvature at both ends (χ ∈ C²) and p′ = s²(18 − 32s +
//! 15s²) > 0, so χ is monotone and z ≤ 2χ(z) ≤ 4z on (1, 2).
//!
//! The energy pump is ρ = (2/r)·σ·χ(|R̊_l|/σ) with σ = c_R δ_{q+1} M₀ and
//! r = min(½, admissible radius). Since z/χ(z) ≤ 2, |R̊_l/ρ| ≤ r
//! pointwise, so Id − R̊_l/ρ stays inside the ball on which the geometric
//! amplitudes are defined. |·| is the Frobenius norm, which dominates the
//! operator norm used by the geometry.
//!
//! Amplitudes are a_ξ = ρ^{1/2} γ_ξ(Id − R̊_l/ρ)·c with c = 1
//! ([`AmplitudeNormalization::Unit`]) or c = (2π)^{−3/4}
//! ([`AmplitudeNormalization::Literal`]).

use std::f64::consts::PI;

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::DirectionSet;
use crate::spectral::field::sym_matrix_at;

/// Cutoff χ.
pub fn cutoff_chi(z: f64) -> f64 {
    if z <= 1.0 {
        1.0
    } else if z >= 2.0 {
        z
    } else {
        let s = z - 1.0;
        1.0 + s * s * s * (6.0 + s * (-8.0 + 3.0 * s))
    }
}

/// Radius r = min(½, admissible radius) that bounds |R̊_l/ρ|.
pub fn domain_radius(set: &DirectionSet) -> f64 {
    0.5f64.min(set.admissible_radius)
}

/// ρ = (2/r)·σ·χ(|R̊_l|/σ) at every grid point, from the pointwise
/// Frobenius norms of R̊_l.
pub fn energy_pump_rho(r_mag: &[f64], sigma: f64, radius: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("stress scale σ = {sigma} must be positive")));
    }
    if !(radius > 0.0 && radius <= 0.5) {
        return Err(Error::InvalidArgument(format!("domain radius {radius} outside (0, 1/2]")));
    }
    let f = 2.0 / radius * sigma;
    Ok(r_mag.iter().map(|&m| f * cutoff_chi(m / sigma)).collect())
}

/// Normalization of the amplitudes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AmplitudeNormalization {
    /// a = ρ^{1/2}γ: Σ a²⨍W⊗W = ρId − R̊_l, with ⨍W⊗W = ξ⊗ξ.
    Unit,
    /// a = ρ^{1/2}γ(2π)^{−3/4}: (2π)^{3/2}Σ a² ξ⊗ξ = ρId − R̊_l.
    Literal,
}

impl AmplitudeNormalization {
    /// The constant factor.
    pub fn factor(self) -> f64 {
        match self {
            AmplitudeNormalization::Unit => 1.0,
            AmplitudeNormalization::Literal => (2.0 * PI).powf(-0.75),
        }
    }
}

/// a_ξ at every grid point, indexed [direction][point], from ρ and the six
/// stored entries of R̊_l.
pub fn amplitudes(rho: &[f64], r_l: &[Vec<f64>], set: &DirectionSet, norm: AmplitudeNormalization) -> Result<Vec<Vec<f64>>> {
    if r_l.len() != 6 || r_l.iter().any(|e| e.len() != rho.len()) {
        return Err(Error::InvalidArgument("amplitudes need six stress entries matching ρ".into()));
    }
    let c = norm.factor();
    let per_point: Vec<[f64; 6]> = (0..rho.len())
        .into_par_iter()
        .map(|i| {
            if !(rho[i] > 0.0) {
                return Err(Error::InvalidArgument(format!("ρ = {} is not positive at grid point {i}", rho[i])));
            }
            let r = Matrix3::from(sym_matrix_at(r_l, i));
            let arg = Matrix3::identity() - r / rho[i];
            let g = set.gamma(&arg).map_err(|e| match e {
                Error::GeometryDomain { distance, radius } => Error::AmplitudeDomain { point: i, distance, radius },
                other => other,
            })?;
            let s = rho[i].sqrt() * c;
            Ok(g.map(|x| s * x))
        })
        .collect::<Result<_>>()?;
    Ok((0..set.len()).map(|k| per_point.iter().map(|a| a[k]).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set() -> DirectionSet {
        DirectionSet::build().unwrap()
    }

    #[test]
    fn chi_is_flat_then_identity() {
        for z in [0.0, 0.3, 1.0] {
            assert_eq!(cutoff_chi(z), 1.0);
        }
        for z in [2.0, 3.5, 100.0] {
            assert_eq!(cutoff_chi(z), z);
        }
    }

    #[test]
    fn chi_is_twice_differentiable_at_the_junctions() {
        // One-sided samples ε away from each junction; a jump in slope or
        // curvature would survive as ε → 0, a smooth join leaves O(ε).
        let h = 1e-6;
        for z0 in [1.0, 2.0] {
            let d1 = |z: f64| (cutoff_chi(z + h) - cutoff_chi(z - h)) / (2.0 * h);
            let d2 = |z: f64| (cutoff_chi(z + h) - 2.0 * cutoff_chi(z) + cutoff_chi(z - h)) / (h * h);
            let left = z0 - 1e-4;
            let right = z0 + 1e-4;
            assert!((d1(left) - d1(right)).abs() < 1e-2, "slope jump at {z0}");
            assert!((d2(left) - d2(right)).abs() < 1e-2, "curvature jump at {z0}");
        }
    }

    #[test]
    fn rho_scale_validation() {
        assert!(energy_pump_rho(&[1.0], 0.0, 0.5).is_err());
        assert!(energy_pump_rho(&[1.0], 1.0, 0.7).is_err());
    }

    #[test]
    fn zero_stress_gives_identity_amplitudes() {
        let s = set();
        let rho = vec![4.0];
        let zero: Vec<Vec<f64>> = vec![vec![0.0]; 6];
        let a = amplitudes(&rho, &zero, &s, AmplitudeNormalization::Literal).unwrap();
        let g = s.gamma(&Matrix3::identity()).unwrap();
        for (k, ak) in a.iter().enumerate() {
            assert!((ak[0] - 2.0 * g[k] * (2.0 * PI).powf(-0.75)).abs() < 1e-14);
        }
    }

    #[test]
    fn out_of_ball_argument_names_the_point() {
        let s = set();
        let rho = vec![1.0, 1.0];
        let mut r: Vec<Vec<f64>> = vec![vec![0.0; 2]; 6];
        r[0][1] = 0.5;
        match amplitudes(&rho, &r, &s, AmplitudeNormalization::Unit) {
            Err(Error::AmplitudeDomain { point, .. }) => assert_eq!(point, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn chi_monotone_and_sandwiched(z in 0.0f64..5.0, dz in 0.0f64..1.0) {
            prop_assert!(cutoff_chi(z + dz) >= cutoff_chi(z));
            if z > 1.0 && z < 2.0 {
                let c = cutoff_chi(z);
                prop_assert!(z <= 2.0 * c && 2.0 * c <= 4.0 * z);
            }
            prop_assert!(z <= 2.0 * cutoff_chi(z));
        }

        #[test]
        fn pump_keeps_stress_in_the_ball(entries in proptest::array::uniform6(-50.0f64..50.0), sigma in 0.01f64..10.0) {
            let s = set();
            let r: Vec<Vec<f64>> = entries.iter().map(|&e| vec![e]).collect();
            let m = Matrix3::from(sym_matrix_at(&r, 0));
            let mag = m.norm();
            let rad = domain_radius(&s);
            let rho = energy_pump_rho(&[mag], sigma, rad).unwrap();
            prop_assert!(mag / rho[0] <= rad * (1.0 + 1e-12));
            let a = amplitudes(&rho, &r, &s, AmplitudeNormalization::Unit).unwrap();
            // Σ a² ξ⊗ξ = ρ Id − R̊.
            let mut rec = Matrix3::zeros();
            for (k, d) in s.directions.iter().enumerate() {
                let x = d.xi_f64();
                for i in 0..3 {
                    for j in 0..3 {
                        rec[(i, j)] += a[k][0] * a[k][0] * x[i] * x[j];
                    }
                }
            }
            let target = Matrix3::identity() * rho[0] - m;
            prop_assert!((rec - target).norm() <= 1e-10 * rho[0]);
        }
    }
}
