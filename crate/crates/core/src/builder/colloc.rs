//! Pointwise (collocation) products on the grid.
//!
//! Products are formed from physical samples on the n³ grid and
//! transformed back without padding. For band-limited factors whose
//! wavenumbers sum below n/2 this is exact; for jet-bearing factors it is
//! the product the stage identities are stated for.

use crate::error::Result;
use crate::spectral::{FourierField3, Grid3, ScalarField, SpectralData, SymTensorField3};
use crate::spectral::field::SYM_PAIRS;

/// Physical samples of a vector field.
pub type Vec3 = [Vec<f64>; 3];

/// Physical samples of the three components.
pub fn phys(v: &FourierField3) -> Vec3 {
    let p = v.to_physical();
    let mut it = p.into_iter();
    std::array::from_fn(|_| it.next().expect("three components"))
}

/// Vector field from physical samples.
pub fn vector(grid: Grid3, v: &Vec3) -> Result<FourierField3> {
    FourierField3::from_physical(grid, [&v[0], &v[1], &v[2]])
}

/// Zero physical samples.
pub fn zeros3(len: usize) -> Vec3 {
    std::array::from_fn(|_| vec![0.0; len])
}

/// Pointwise a + c·b.
pub fn add_scaled3(a: &Vec3, c: f64, b: &Vec3) -> Vec3 {
    std::array::from_fn(|d| a[d].iter().zip(&b[d]).map(|(x, y)| x + c * y).collect())
}

/// Pointwise symmetrized outer product ½(a⊗b + b⊗a) as six stored
/// entries.
pub fn sym_outer_values(a: &Vec3, b: &Vec3) -> [Vec<f64>; 6] {
    std::array::from_fn(|s| {
        let (i, j) = SYM_PAIRS[s];
        a[i].iter()
            .zip(&b[j])
            .zip(a[j].iter().zip(&b[i]))
            .map(|((ai, bj), (aj, bi))| 0.5 * (ai * bj + aj * bi))
            .collect()
    })
}

/// Remove the trace from six stored entries in place.
pub fn remove_trace(v: &mut [Vec<f64>; 6]) {
    for i in 0..v[0].len() {
        let tr = (v[0][i] + v[3][i] + v[5][i]) / 3.0;
        for s in [0usize, 3, 5] {
            v[s][i] -= tr;
        }
    }
}

/// ½(a⊗b + b⊗a), optionally with the trace removed.
pub fn sym_outer(grid: Grid3, a: &Vec3, b: &Vec3, trace_free: bool) -> Result<SymTensorField3> {
    let mut vals = sym_outer_values(a, b);
    if trace_free {
        remove_trace(&mut vals);
    }
    tensor(grid, &vals, trace_free)
}

/// Symmetric tensor field from six stored entries.
pub fn tensor(grid: Grid3, v: &[Vec<f64>; 6], trace_free: bool) -> Result<SymTensorField3> {
    SymTensorField3::from_physical(grid, [&v[0], &v[1], &v[2], &v[3], &v[4], &v[5]], trace_free)
}

/// Pointwise dot product a·b.
pub fn dot_values(a: &Vec3, b: &Vec3) -> Vec<f64> {
    (0..a[0].len()).map(|i| a[0][i] * b[0][i] + a[1][i] * b[1][i] + a[2][i] * b[2][i]).collect()
}

/// Pointwise dot product as a scalar field.
pub fn dot(grid: Grid3, a: &Vec3, b: &Vec3) -> Result<ScalarField> {
    ScalarField::from_physical(grid, &dot_values(a, b))
}

/// Pointwise scalar times vector.
pub fn scale3(s: &[f64], v: &Vec3) -> Vec3 {
    std::array::from_fn(|d| s.iter().zip(&v[d]).map(|(a, b)| a * b).collect())
}

/// Pointwise cross product a × b.
pub fn cross3(a: &Vec3, b: &Vec3) -> Vec3 {
    let n = a[0].len();
    let mut out = zeros3(n);
    for i in 0..n {
        out[0][i] = a[1][i] * b[2][i] - a[2][i] * b[1][i];
        out[1][i] = a[2][i] * b[0][i] - a[0][i] * b[2][i];
        out[2][i] = a[0][i] * b[1][i] - a[1][i] * b[0][i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ops;

    #[test]
    fn collocation_matches_dealiased_product_for_low_modes() {
        let g = Grid3::new(16).unwrap();
        let u = FourierField3::from_fn(g, |x| [x[2].sin(), (x[0] + x[1]).cos(), 0.5]);
        let w = FourierField3::from_fn(g, |x| [x[1].cos(), 1.0, (2.0 * x[0]).sin()]);
        let a = sym_outer(g, &phys(&u), &phys(&w), true).unwrap();
        let b = ops::sym_outer(&u, &w, true);
        assert!(a.max_coeff_diff(&b) < 1e-14);
    }

    #[test]
    fn cross_and_dot_are_pointwise() {
        let a = [vec![1.0], vec![0.0], vec![0.0]];
        let b = [vec![0.0], vec![1.0], vec![0.0]];
        assert_eq!(cross3(&a, &b)[2][0], 1.0);
        assert_eq!(dot_values(&a, &b)[0], 0.0);
    }
}
