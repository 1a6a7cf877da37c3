//! Scalar, vector and symmetric-tensor fields stored as Fourier
//! coefficients on a [`Grid3`].

use num_complex::Complex64;

use super::grid::{self, Grid3};
use crate::error::{Error, Result};

/// Index of the symmetric-tensor entry (i, j) in the stored order
/// 11, 12, 13, 22, 23, 33.
pub const fn sym_index(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    match (a, b) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        _ => 5,
    }
}

/// Row and column of stored symmetric entry `s`.
pub const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Common storage interface of all field types.
pub trait SpectralData: Clone {
    /// The grid the coefficients live on.
    fn grid(&self) -> Grid3;
    /// Coefficient arrays, one per stored component.
    fn components(&self) -> &[Vec<Complex64>];
    /// Mutable coefficient arrays.
    fn components_mut(&mut self) -> &mut [Vec<Complex64>];

    /// self ← self + a·other.
    fn axpy(&mut self, a: f64, other: &Self) {
        assert_eq!(self.grid(), other.grid(), "axpy across grids");
        for (dst, src) in self.components_mut().iter_mut().zip(other.components()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * a;
            }
        }
    }

    /// self ← a·self.
    fn scale(&mut self, a: f64) {
        for c in self.components_mut() {
            for v in c.iter_mut() {
                *v *= a;
            }
        }
    }

    /// Weight of each stored component in the pointwise squared norm
    /// (Euclidean for vectors, Frobenius for symmetric tensors).
    fn component_weights(&self) -> Vec<f64> {
        vec![1.0; self.components().len()]
    }

    /// A copy with all coefficients zero.
    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for c in z.components_mut() {
            c.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        }
        z
    }

    /// Largest coefficient modulus of self − other.
    fn max_coeff_diff(&self, other: &Self) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    /// Physical samples of every component.
    fn to_physical(&self) -> Vec<Vec<f64>> {
        let n = self.grid().n();
        self.components()
            .iter()
            .map(|c| grid::inverse_real(c, n))
            .collect()
    }

    /// Samples of every component on the padded product grid.
    fn to_padded_physical(&self) -> Vec<Vec<f64>> {
        let g = self.grid();
        let (n, m) = (g.n(), g.padded_n());
        self.components()
            .iter()
            .map(|c| grid::inverse_real(&grid::pad_coeffs(c, n, m), m))
            .collect()
    }

    /// Mean of every component (the zero coefficient).
    fn means(&self) -> Vec<f64> {
        self.components().iter().map(|c| c[0].re).collect()
    }

    /// Remove the spatial mean of every component (the operator P≠0).
    fn remove_mean(&mut self) {
        for c in self.components_mut() {
            c[0] = Complex64::new(0.0, 0.0);
        }
    }
}

/// Transform physical samples on the n-grid to coefficients.
pub fn coeffs_from_physical(grid: &Grid3, values: &[f64]) -> Result<Vec<Complex64>> {
    if values.len() != grid.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} samples, got {}",
            grid.len(),
            values.len()
        )));
    }
    Ok(grid::forward_real(values, grid.n()))
}

/// Transform samples on the padded grid to truncated n-grid coefficients.
pub fn coeffs_from_padded(grid: &Grid3, values: &[f64]) -> Vec<Complex64> {
    let m = grid.padded_n();
    assert_eq!(values.len(), m * m * m, "padded sample count");
    let c = grid::forward_real(values, m);
    grid::truncate_coeffs(&c, m, grid.n())
}

/// Scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid3,
    coeffs: [Vec<Complex64>; 1],
}

impl ScalarField {
    /// Field from coefficients.
    pub fn from_coeffs(grid: Grid3, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.len());
        Self {
            grid,
            coeffs: [coeffs],
        }
    }

    /// Zero field.
    pub fn zeros(grid: Grid3) -> Self {
        Self::from_coeffs(grid, vec![Complex64::new(0.0, 0.0); grid.len()])
    }

    /// Field from physical samples.
    pub fn from_physical(grid: Grid3, values: &[f64]) -> Result<Self> {
        Ok(Self::from_coeffs(grid, coeffs_from_physical(&grid, values)?))
    }

    /// Field from samples on the padded grid (truncated to the band).
    pub fn from_padded(grid: Grid3, values: &[f64]) -> Self {
        Self::from_coeffs(grid, coeffs_from_padded(&grid, values))
    }

    /// Field sampled from a function of position.
    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> f64) -> Self {
        let vals: Vec<f64> = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::from_physical(grid, &vals).expect("length matches by construction")
    }

    /// Coefficients.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs[0]
    }

    /// Mutable coefficients.
    pub fn coeffs_mut(&mut self) -> &mut Vec<Complex64> {
        &mut self.coeffs[0]
    }

    /// Physical samples.
    pub fn physical(&self) -> Vec<f64> {
        grid::inverse_real(&self.coeffs[0], self.grid.n())
    }

    /// Samples on the padded grid.
    pub fn padded(&self) -> Vec<f64> {
        self.to_padded_physical().pop().expect("one component")
    }
}

impl SpectralData for ScalarField {
    fn grid(&self) -> Grid3 {
        self.grid
    }
    fn components(&self) -> &[Vec<Complex64>] {
        &self.coeffs
    }
    fn components_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.coeffs
    }
}

/// Three-component vector field with an optional time tag.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierField3 {
    grid: Grid3,
    coeffs: [Vec<Complex64>; 3],
    /// Time of the snapshot, if any.
    pub time_tag: Option<f64>,
}

impl FourierField3 {
    /// Field from coefficients.
    pub fn from_coeffs(grid: Grid3, coeffs: [Vec<Complex64>; 3]) -> Self {
        for c in &coeffs {
            assert_eq!(c.len(), grid.len());
        }
        Self {
            grid,
            coeffs,
            time_tag: None,
        }
    }

    /// Zero field.
    pub fn zeros(grid: Grid3) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self::from_coeffs(grid, [z.clone(), z.clone(), z])
    }

    /// Field from physical samples of the three components.
    pub fn from_physical(grid: Grid3, values: [&[f64]; 3]) -> Result<Self> {
        Ok(Self::from_coeffs(
            grid,
            [
                coeffs_from_physical(&grid, values[0])?,
                coeffs_from_physical(&grid, values[1])?,
                coeffs_from_physical(&grid, values[2])?,
            ],
        ))
    }

    /// Field from samples on the padded grid.
    pub fn from_padded(grid: Grid3, values: [&[f64]; 3]) -> Self {
        Self::from_coeffs(
            grid,
            [
                coeffs_from_padded(&grid, values[0]),
                coeffs_from_padded(&grid, values[1]),
                coeffs_from_padded(&grid, values[2]),
            ],
        )
    }

    /// Field sampled from a function of position.
    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut v = [
            vec![0.0; grid.len()],
            vec![0.0; grid.len()],
            vec![0.0; grid.len()],
        ];
        for i in 0..grid.len() {
            let y = f(grid.point(i));
            for c in 0..3 {
                v[c][i] = y[c];
            }
        }
        Self::from_physical(grid, [&v[0], &v[1], &v[2]]).expect("length matches")
    }

    /// Builder: attach a time tag.
    pub fn with_time(mut self, t: f64) -> Self {
        self.time_tag = Some(t);
        self
    }

    /// Coefficients of component `c`.
    pub fn comp(&self, c: usize) -> &[Complex64] {
        &self.coeffs[c]
    }

    /// Mutable coefficients of component `c`.
    pub fn comp_mut(&mut self, c: usize) -> &mut Vec<Complex64> {
        &mut self.coeffs[c]
    }

    /// Component `c` as a scalar field.
    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField::from_coeffs(self.grid, self.coeffs[c].clone())
    }
}

impl SpectralData for FourierField3 {
    fn grid(&self) -> Grid3 {
        self.grid
    }
    fn components(&self) -> &[Vec<Complex64>] {
        &self.coeffs
    }
    fn components_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.coeffs
    }
}

/// Symmetric 3×3 tensor field, entries 11, 12, 13, 22, 23, 33.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField3 {
    grid: Grid3,
    coeffs: [Vec<Complex64>; 6],
    /// Whether the field is declared trace-free.
    pub trace_free: bool,
}

impl SymTensorField3 {
    /// Field from coefficients.
    pub fn from_coeffs(grid: Grid3, coeffs: [Vec<Complex64>; 6], trace_free: bool) -> Self {
        for c in &coeffs {
            assert_eq!(c.len(), grid.len());
        }
        Self {
            grid,
            coeffs,
            trace_free,
        }
    }

    /// Zero field (trace-free).
    pub fn zeros(grid: Grid3) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self::from_coeffs(
            grid,
            [z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z],
            true,
        )
    }

    /// Field from physical samples of the six stored entries.
    pub fn from_physical(grid: Grid3, values: [&[f64]; 6], trace_free: bool) -> Result<Self> {
        let mut cs: Vec<Vec<Complex64>> = Vec::with_capacity(6);
        for v in values {
            cs.push(coeffs_from_physical(&grid, v)?);
        }
        let arr: [Vec<Complex64>; 6] = cs.try_into().expect("six entries");
        Ok(Self::from_coeffs(grid, arr, trace_free))
    }

    /// Field from samples of the six entries on the padded grid.
    pub fn from_padded(grid: Grid3, values: [&[f64]; 6], trace_free: bool) -> Self {
        let cs: Vec<Vec<Complex64>> = values
            .iter()
            .map(|v| coeffs_from_padded(&grid, v))
            .collect();
        Self::from_coeffs(grid, cs.try_into().expect("six entries"), trace_free)
    }

    /// Field sampled from a function returning a full 3×3 matrix (only the
    /// upper triangle is read).
    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> [[f64; 3]; 3], trace_free: bool) -> Self {
        let mut v: Vec<Vec<f64>> = vec![vec![0.0; grid.len()]; 6];
        for i in 0..grid.len() {
            let m = f(grid.point(i));
            for (s, &(a, b)) in SYM_PAIRS.iter().enumerate() {
                v[s][i] = m[a][b];
            }
        }
        Self::from_physical(
            grid,
            [&v[0], &v[1], &v[2], &v[3], &v[4], &v[5]],
            trace_free,
        )
        .expect("length matches")
    }

    /// Coefficients of entry (i, j).
    pub fn entry(&self, i: usize, j: usize) -> &[Complex64] {
        &self.coeffs[sym_index(i, j)]
    }

    /// Mutable coefficients of entry (i, j).
    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut Vec<Complex64> {
        &mut self.coeffs[sym_index(i, j)]
    }

    /// Coefficients of the trace.
    pub fn trace(&self) -> ScalarField {
        let mut t = self.coeffs[0].clone();
        for (d, (a, b)) in t.iter_mut().zip(self.coeffs[3].iter().zip(&self.coeffs[5])) {
            *d += a + b;
        }
        ScalarField::from_coeffs(self.grid, t)
    }

    /// Remove the trace: entries (i, i) −= tr/3.
    pub fn make_trace_free(&mut self) {
        let tr = self.trace();
        for s in [0usize, 3, 5] {
            for (d, t) in self.coeffs[s].iter_mut().zip(tr.coeffs()) {
                *d -= t / 3.0;
            }
        }
        self.trace_free = true;
    }

    /// Add `a·s·Id` for a scalar field `s`.
    pub fn add_scalar_identity(&mut self, a: f64, s: &ScalarField) {
        for e in [0usize, 3, 5] {
            for (d, v) in self.coeffs[e].iter_mut().zip(s.coeffs()) {
                *d += v * a;
            }
        }
        self.trace_free = false;
    }
}

impl SpectralData for SymTensorField3 {
    fn grid(&self) -> Grid3 {
        self.grid
    }
    fn component_weights(&self) -> Vec<f64> {
        vec![1.0, 2.0, 2.0, 1.0, 2.0, 1.0]
    }
    fn components(&self) -> &[Vec<Complex64>] {
        &self.coeffs
    }
    fn components_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.coeffs
    }
}

/// Evaluate an entry-wise matrix from stored symmetric samples.
pub fn sym_matrix_at(samples: &[Vec<f64>], i: usize) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for (s, &(a, b)) in SYM_PAIRS.iter().enumerate() {
        m[a][b] = samples[s][i];
        m[b][a] = samples[s][i];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_index_is_symmetric() {
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(sym_index(i, j), sym_index(j, i));
                assert_eq!(SYM_PAIRS[sym_index(i, j)], (i.min(j), i.max(j)));
            }
        }
    }

    #[test]
    fn zero_mode_is_mean() {
        let g = Grid3::new(8).unwrap();
        let f = ScalarField::from_fn(g, |x| 2.5 + x[0].sin());
        assert!((f.coeffs()[0].re - 2.5).abs() < 1e-14);
    }

    #[test]
    fn trace_free_projection() {
        let g = Grid3::new(8).unwrap();
        let mut t = SymTensorField3::from_fn(
            g,
            |x| {
                [
                    [x[0].cos(), 0.0, 0.0],
                    [0.0, 1.0, x[1].sin()],
                    [0.0, x[1].sin(), 3.0],
                ]
            },
            false,
        );
        t.make_trace_free();
        let tr = t.trace().physical();
        assert!(tr.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn padded_samples_interpolate() {
        let g = Grid3::new(8).unwrap();
        let f = ScalarField::from_fn(g, |x| (x[0] + 2.0 * x[2]).sin());
        let p = f.padded();
        let m = g.padded_n();
        // Every second padded point in each axis (index 3j/2 for even j)
        // coincides with a coarse point.
        let coarse = f.physical();
        for j0 in (0..8).step_by(2) {
            for j2 in (0..8).step_by(2) {
                let fi = ((j0 * 3 / 2) * m) * m + j2 * 3 / 2;
                let ci = g.index(j0, 0, j2);
                assert!((p[fi] - coarse[ci]).abs() < 1e-13);
            }
        }
    }
}
