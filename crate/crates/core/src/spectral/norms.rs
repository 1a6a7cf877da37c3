//! Norm estimators: L^p by grid quadrature, H^s on the Fourier side and
//! C^N as a grid supremum of spectral derivatives.
//!
//! Conventions:
//! - pointwise magnitudes are Euclidean for vectors and Frobenius for
//!   symmetric tensors;
//! - L^p quadrature uses the weight (2π/n)³ per sample;
//! - ‖f‖²_{H^s} = (2π)³ Σ_k (1+|k|²)^s |f̂_k|² (inhomogeneous weight);
//! - ‖f‖_{C^N} = Σ_{j≤N} max_{|α|=j} sup_x |∂^α f(x)|, which is a lower
//!   bound on the true supremum because it only sees grid points.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::field::SpectralData;
use super::grid;
use crate::tolerances::HS_TAIL_WARNING;

/// Pointwise magnitudes of a field on its grid.
pub fn pointwise_magnitude<T: SpectralData>(f: &T) -> Vec<f64> {
    let phys = f.to_physical();
    let w = f.component_weights();
    let len = phys[0].len();
    (0..len)
        .map(|i| {
            phys.iter()
                .zip(&w)
                .map(|(c, wt)| wt * c[i] * c[i])
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// L^p norm by grid quadrature; `p = f64::INFINITY` gives the grid sup.
pub fn lp_norm<T: SpectralData>(f: &T, p: f64) -> f64 {
    assert!(p >= 1.0, "L^p needs p >= 1");
    let mag = pointwise_magnitude(f);
    if p.is_infinite() {
        return mag.iter().copied().fold(0.0, f64::max);
    }
    let vol = f.grid().cell_volume();
    if p == 2.0 {
        return (mag.iter().map(|v| v * v).sum::<f64>() * vol).sqrt();
    }
    (mag.iter().map(|v| v.powf(p)).sum::<f64>() * vol).powf(1.0 / p)
}

/// L² norm from Parseval: (2π)^{3/2}(Σ|f̂|²)^{1/2}.
pub fn l2_parseval<T: SpectralData>(f: &T) -> f64 {
    (2.0 * PI).powf(1.5) * super::ops::coeff_l2(f)
}

/// Result of an H^s evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HsNorm {
    /// ‖f‖_{H^s}.
    pub value: f64,
    /// Share of the squared norm carried by modes with max|k_i| > n/3.
    pub tail_fraction: f64,
    /// Set when the tail fraction exceeds the warning threshold: the field
    /// is not smooth enough at this resolution for s to be meaningful.
    pub under_resolved: bool,
}

/// H^s norm with an under-resolution warning.
pub fn hs_norm<T: SpectralData>(f: &T, s: f64) -> HsNorm {
    let g = f.grid();
    let cut = (g.n() / 3) as i64;
    let w = f.component_weights();
    let mut total = 0.0;
    let mut tail = 0.0;
    for idx in 0..g.len() {
        let k = g.wavevector(idx);
        let weight = (1.0 + g.k_squared(idx)).powf(s);
        let e: f64 = f
            .components()
            .iter()
            .zip(&w)
            .map(|(c, wt)| wt * c[idx].norm_sqr())
            .sum::<f64>()
            * weight;
        total += e;
        if k.iter().any(|x| x.abs() > cut) {
            tail += e;
        }
    }
    let tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
    HsNorm {
        value: ((2.0 * PI).powi(3) * total).sqrt(),
        tail_fraction,
        under_resolved: tail_fraction > HS_TAIL_WARNING,
    }
}

/// All multi-indices α ∈ ℕ³ with |α| = j.
fn multi_indices(j: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..=j {
        for b in 0..=(j - a) {
            out.push([a, b, j - a - b]);
        }
    }
    out
}

/// C^N norm as a grid supremum of spectral derivatives (lower bound).
pub fn cn_norm<T: SpectralData>(f: &T, order: usize) -> f64 {
    let g = f.grid();
    let mut total = 0.0;
    for j in 0..=order {
        let mut best: f64 = 0.0;
        for alpha in multi_indices(j) {
            for c in f.components() {
                let d: Vec<Complex64> = c
                    .iter()
                    .enumerate()
                    .map(|(idx, v)| {
                        let k = g.deriv_wavevector(idx);
                        let mut m = Complex64::new(1.0, 0.0);
                        for (ax, &p) in alpha.iter().enumerate() {
                            for _ in 0..p {
                                m *= Complex64::new(0.0, k[ax]);
                            }
                        }
                        v * m
                    })
                    .collect();
                let phys = grid::inverse_real(&d, g.n());
                best = best.max(phys.iter().map(|x| x.abs()).fold(0.0, f64::max));
            }
        }
        total += best;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{FourierField3, Grid3, SymTensorField3};

    #[test]
    fn l2_of_sine_mode() {
        let g = Grid3::new(16).unwrap();
        let f = FourierField3::from_fn(g, |x| [x[2].sin(), 0.0, 0.0]);
        let expect = (2.0 * PI).powf(1.5) / 2f64.sqrt();
        assert!((lp_norm(&f, 2.0) - expect).abs() < 1e-12 * expect);
        assert!((l2_parseval(&f) - expect).abs() < 1e-12 * expect);
        assert!((expect - 11.136).abs() < 1e-3);
    }

    #[test]
    fn zero_has_zero_norms() {
        let g = Grid3::new(8).unwrap();
        let z = FourierField3::zeros(g);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(lp_norm(&z, p), 0.0);
        }
        assert_eq!(hs_norm(&z, 2.0).value, 0.0);
        assert_eq!(cn_norm(&z, 2), 0.0);
    }

    #[test]
    fn cn_of_sine() {
        let g = Grid3::new(16).unwrap();
        let f = FourierField3::from_fn(g, |x| [(2.0 * x[0]).sin(), 0.0, 0.0]);
        // sup|f| + sup|∂f| + sup|∂²f| = 1 + 2 + 4 (attained on grid points).
        assert!((cn_norm(&f, 2) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn hs_flags_rough_fields() {
        let g = Grid3::new(16).unwrap();
        let smooth = FourierField3::from_fn(g, |x| [x[0].sin(), 0.0, 0.0]);
        let h = hs_norm(&smooth, 1.0);
        assert!(!h.under_resolved);
        assert!((h.value - (2.0 * PI).powf(1.5) / 2f64.sqrt() * 2f64.sqrt()).abs() < 1e-10);
        let rough = FourierField3::from_fn(g, |x| [(7.0 * x[0]).sin(), 0.0, 0.0]);
        assert!(hs_norm(&rough, 1.0).under_resolved);
    }

    #[test]
    fn frobenius_counts_off_diagonals_twice() {
        let g = Grid3::new(8).unwrap();
        let t = SymTensorField3::from_fn(
            g,
            |_| [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
            true,
        );
        let expect = 2f64.sqrt() * (2.0 * PI).powf(1.5);
        assert!((lp_norm(&t, 2.0) - expect).abs() < 1e-12 * expect);
        assert!((l2_parseval(&t) - expect).abs() < 1e-12 * expect);
    }
}
