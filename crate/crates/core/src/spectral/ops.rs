//! Fourier multipliers, projections, inverse divergence and dealiased
//! products.
//!
//! First derivatives use the derivative wavevector (Nyquist components set
//! to zero), and every operator built from first derivatives — divergence,
//! curl, gradient, Leray projection, inverse divergence, inverse
//! Laplacian — uses the same wavevector. This makes identities such as
//! div ∘ ℛ = Id on mean-zero fields and div ∘ P = 0 exact on the discrete
//! band rather than exact only away from the Nyquist plane. Even-order
//! multipliers ((−Δ)^m, heat semigroup) use the full |k|².

use num_complex::Complex64;
use rayon::prelude::*;

use super::field::{FourierField3, ScalarField, SpectralData, SymTensorField3};
use super::grid::Grid3;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Multiply every component by a real multiplier of the flat index.
pub fn apply_real_multiplier<T: SpectralData>(f: &T, mult: impl Fn(usize) -> f64 + Sync) -> T {
    let mut out = f.clone();
    for c in out.components_mut() {
        c.par_iter_mut()
            .enumerate()
            .for_each(|(idx, v)| *v *= mult(idx));
    }
    out
}

/// |k_d|² with the derivative wavevector.
fn kd_squared(g: &Grid3, idx: usize) -> f64 {
    let k = g.deriv_wavevector(idx);
    k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
}

/// Discrete inverse Laplacian symbol −1/|k_d|², zero where k_d = 0.
fn inv_lap_symbol(g: &Grid3, idx: usize) -> f64 {
    let k2 = kd_squared(g, idx);
    if k2 == 0.0 {
        0.0
    } else {
        -1.0 / k2
    }
}

/// Partial derivative ∂_d of a scalar field.
pub fn derivative(f: &ScalarField, d: usize) -> ScalarField {
    let g = f.grid();
    let c: Vec<Complex64> = f
        .coeffs()
        .par_iter()
        .enumerate()
        .map(|(idx, v)| v * I * g.deriv_wavevector(idx)[d])
        .collect();
    ScalarField::from_coeffs(g, c)
}

/// Gradient of a scalar field.
pub fn gradient(f: &ScalarField) -> FourierField3 {
    FourierField3::from_coeffs(
        f.grid(),
        [
            derivative(f, 0).coeffs().to_vec(),
            derivative(f, 1).coeffs().to_vec(),
            derivative(f, 2).coeffs().to_vec(),
        ],
    )
}

/// Divergence of a vector field.
pub fn divergence(v: &FourierField3) -> ScalarField {
    let g = v.grid();
    let c: Vec<Complex64> = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let k = g.deriv_wavevector(idx);
            I * (v.comp(0)[idx] * k[0] + v.comp(1)[idx] * k[1] + v.comp(2)[idx] * k[2])
        })
        .collect();
    ScalarField::from_coeffs(g, c)
}

/// Curl of a vector field.
pub fn curl(v: &FourierField3) -> FourierField3 {
    let g = v.grid();
    let mut out = FourierField3::zeros(g);
    for c in 0..3 {
        let (a, b) = ((c + 1) % 3, (c + 2) % 3);
        let col: Vec<Complex64> = (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let k = g.deriv_wavevector(idx);
                I * (v.comp(b)[idx] * k[a] - v.comp(a)[idx] * k[b])
            })
            .collect();
        *out.comp_mut(c) = col;
    }
    out
}

/// Divergence of a symmetric tensor field: (div R)_l = Σ_k ∂_k R_kl.
pub fn tensor_divergence(r: &SymTensorField3) -> FourierField3 {
    let g = r.grid();
    let mut out = FourierField3::zeros(g);
    for l in 0..3 {
        let col: Vec<Complex64> = (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let k = g.deriv_wavevector(idx);
                I * (0..3).map(|kk| r.entry(kk, l)[idx] * k[kk]).sum::<Complex64>()
            })
            .collect();
        *out.comp_mut(l) = col;
    }
    out
}

/// Spectral Laplacian Δ (symbol −|k|²).
pub fn laplacian<T: SpectralData>(f: &T) -> T {
    let g = f.grid();
    apply_real_multiplier(f, |idx| -g.k_squared(idx))
}

/// Fractional Laplacian (−Δ)^m (symbol |k|^{2m}; the zero mode is
/// annihilated).
pub fn fractional_laplacian<T: SpectralData>(f: &T, m: f64) -> Result<T> {
    if !m.is_finite() || m <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "fractional exponent must be finite and positive, got {m}"
        )));
    }
    let g = f.grid();
    Ok(apply_real_multiplier(f, |idx| {
        let k2 = g.k_squared(idx);
        if k2 == 0.0 {
            0.0
        } else {
            k2.powf(m)
        }
    }))
}

/// Semigroup e^{−t(−Δ)^m}: each mode scaled by exp(−t|k|^{2m}).
pub fn heat_semigroup<T: SpectralData>(f: &T, t: f64, m: f64) -> Result<T> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "semigroup time must be finite and >= 0, got {t}"
        )));
    }
    if !m.is_finite() || m <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "fractional exponent must be finite and positive, got {m}"
        )));
    }
    let g = f.grid();
    Ok(apply_real_multiplier(f, |idx| {
        let k2 = g.k_squared(idx);
        if k2 == 0.0 {
            1.0
        } else {
            (-t * k2.powf(m)).exp()
        }
    }))
}

/// Inverse Laplacian on mean-zero data (zero mode mapped to zero).
pub fn inverse_laplacian<T: SpectralData>(f: &T) -> T {
    let g = f.grid();
    apply_real_multiplier(f, |idx| inv_lap_symbol(&g, idx))
}

/// Leray projection onto divergence-free fields; the mean is preserved.
pub fn leray_project(v: &FourierField3) -> FourierField3 {
    let g = v.grid();
    let mut out = v.clone();
    let cols: Vec<[Complex64; 3]> = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let k = g.deriv_wavevector(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            let u = [v.comp(0)[idx], v.comp(1)[idx], v.comp(2)[idx]];
            if k2 == 0.0 {
                return u;
            }
            let dot = (u[0] * k[0] + u[1] * k[1] + u[2] * k[2]) / k2;
            [u[0] - dot * k[0], u[1] - dot * k[1], u[2] - dot * k[2]]
        })
        .collect();
    for c in 0..3 {
        let dst = out.comp_mut(c);
        for (d, s) in dst.iter_mut().zip(&cols) {
            *d = s[c];
        }
    }
    out
}

/// Inverse divergence ℛ: maps a vector field to a symmetric trace-free
/// tensor field with div ℛv = v − mean(v).
///
/// (ℛv)_kl = ∂_kΔ⁻¹v_l + ∂_lΔ⁻¹v_k − ½(δ_kl + ∂_k∂_lΔ⁻¹) div Δ⁻¹v.
pub fn inverse_divergence(v: &FourierField3) -> SymTensorField3 {
    let g = v.grid();
    let mut out = SymTensorField3::zeros(g);
    let entries: Vec<[Complex64; 6]> = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let k = g.deriv_wavevector(idx);
            let il = inv_lap_symbol(&g, idx);
            if il == 0.0 {
                return [ZERO; 6];
            }
            // u = Δ⁻¹v, d = div u.
            let u = [v.comp(0)[idx] * il, v.comp(1)[idx] * il, v.comp(2)[idx] * il];
            let d = I * (u[0] * k[0] + u[1] * k[1] + u[2] * k[2]);
            let mut e = [ZERO; 6];
            for (s, &(a, b)) in super::field::SYM_PAIRS.iter().enumerate() {
                let delta = if a == b { 1.0 } else { 0.0 };
                // ∂_a∂_bΔ⁻¹ has symbol (i k_a)(i k_b)·il = −k_a k_b il.
                let ddinv = -k[a] * k[b] * il;
                e[s] = I * k[a] * u[b] + I * k[b] * u[a] - 0.5 * (delta + ddinv) * d;
            }
            e
        })
        .collect();
    for s in 0..6 {
        let (a, b) = super::field::SYM_PAIRS[s];
        let dst = out.entry_mut(a, b);
        for (d, e) in dst.iter_mut().zip(&entries) {
            *d = e[s];
        }
    }
    out
}

/// Pointwise product of two scalar fields, evaluated on the padded grid
/// and truncated back to the band.
pub fn dealiased_product(f: &ScalarField, g: &ScalarField) -> ScalarField {
    assert_eq!(f.grid(), g.grid(), "product across grids");
    let a = f.padded();
    let b = g.padded();
    let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    ScalarField::from_padded(f.grid(), &p)
}

/// Symmetrised outer product ½(u⊗w + w⊗u), dealiased; trace-free part
/// taken when `trace_free` is set.
pub fn sym_outer(u: &FourierField3, w: &FourierField3, trace_free: bool) -> SymTensorField3 {
    assert_eq!(u.grid(), w.grid(), "product across grids");
    let up = u.to_padded_physical();
    let wp = w.to_padded_physical();
    sym_outer_padded(u.grid(), &up, &wp, trace_free)
}

/// [`sym_outer`] on samples already on the padded grid.
pub fn sym_outer_padded(
    grid: Grid3,
    up: &[Vec<f64>],
    wp: &[Vec<f64>],
    trace_free: bool,
) -> SymTensorField3 {
    let len = up[0].len();
    let mut vals: Vec<Vec<f64>> = vec![vec![0.0; len]; 6];
    for (s, &(a, b)) in super::field::SYM_PAIRS.iter().enumerate() {
        let col = &mut vals[s];
        for i in 0..len {
            col[i] = 0.5 * (up[a][i] * wp[b][i] + wp[a][i] * up[b][i]);
        }
    }
    if trace_free {
        for i in 0..len {
            let tr = (vals[0][i] + vals[3][i] + vals[5][i]) / 3.0;
            vals[0][i] -= tr;
            vals[3][i] -= tr;
            vals[5][i] -= tr;
        }
    }
    SymTensorField3::from_padded(
        grid,
        [&vals[0], &vals[1], &vals[2], &vals[3], &vals[4], &vals[5]],
        trace_free,
    )
}

/// Entry (i, j) of a symmetric tensor as a scalar field.
pub fn tensor_entry(r: &SymTensorField3, i: usize, j: usize) -> ScalarField {
    ScalarField::from_coeffs(r.grid(), r.entry(i, j).to_vec())
}

/// Relative L² size of div(ℛv) − (v − mean v), computed spectrally.
pub fn inverse_divergence_residual(v: &FourierField3) -> f64 {
    let r = inverse_divergence(v);
    let mut d = tensor_divergence(&r);
    let mut vm = v.clone();
    vm.remove_mean();
    d.axpy(-1.0, &vm);
    coeff_l2(&d) / coeff_l2(&vm).max(f64::MIN_POSITIVE)
}

/// √(Σ|f̂|²) over all components (proportional to the L² norm).
pub fn coeff_l2<T: SpectralData>(f: &T) -> f64 {
    let w = f.component_weights();
    f.components()
        .iter()
        .zip(&w)
        .map(|(c, wt)| wt * c.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::super::norms;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random real band-limited field: a sum of a few random trigonometric
    /// modes with |k_i| < n/2.
    pub(crate) fn random_field(g: Grid3, seed: u64, modes: usize) -> FourierField3 {
        random_field_band(g, seed, modes, g.n() / 2 - 1)
    }

    /// [`random_field`] with wavenumber components bounded by `kmax`.
    pub(crate) fn random_field_band(
        g: Grid3,
        seed: u64,
        modes: usize,
        kmax: usize,
    ) -> FourierField3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kmax = kmax as i64;
        let terms: Vec<([f64; 3], [f64; 3], f64)> = (0..modes)
            .map(|_| {
                let k = [
                    rng.gen_range(-kmax..=kmax) as f64,
                    rng.gen_range(-kmax..=kmax) as f64,
                    rng.gen_range(-kmax..=kmax) as f64,
                ];
                let amp = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ];
                (k, amp, rng.gen_range(0.0..6.28))
            })
            .collect();
        FourierField3::from_fn(g, |x| {
            let mut v = [0.0; 3];
            for (k, a, ph) in &terms {
                let s = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + ph).cos();
                for c in 0..3 {
                    v[c] += a[c] * s;
                }
            }
            v
        })
    }

    fn rel(a: &FourierField3, b: &FourierField3) -> f64 {
        let mut d = a.clone();
        d.axpy(-1.0, b);
        coeff_l2(&d) / coeff_l2(b).max(1e-300)
    }

    #[test]
    fn fractional_laplacian_examples() {
        let g = Grid3::new(16).unwrap();
        let f = FourierField3::from_fn(g, |x| [x[2].sin(), 0.0, 0.0]);
        for m in [0.5, 1.0, 1.25] {
            let r = fractional_laplacian(&f, m).unwrap();
            assert!(rel(&r, &f) < 1e-13);
        }
        let c = FourierField3::from_fn(g, |_| [1.0, 2.0, 3.0]);
        assert!(coeff_l2(&fractional_laplacian(&c, 1.0).unwrap()) < 1e-13);
        let s2 = FourierField3::from_fn(g, |x| [(2.0 * x[0]).sin(), 0.0, 0.0]);
        let expect4 = FourierField3::from_fn(g, |x| [4.0 * (2.0 * x[0]).sin(), 0.0, 0.0]);
        assert!(rel(&fractional_laplacian(&s2, 1.0).unwrap(), &expect4) < 1e-13);
        let mut e = s2.clone();
        e.scale(4f64.powf(1.25));
        assert!(rel(&fractional_laplacian(&s2, 1.25).unwrap(), &e) < 1e-13);
        assert!(fractional_laplacian(&s2, f64::NAN).is_err());
    }

    #[test]
    fn fractional_laplacian_one_is_minus_laplacian() {
        let g = Grid3::new(16).unwrap();
        let f = random_field(g, 3, 6);
        let mut lap = laplacian(&f);
        lap.scale(-1.0);
        assert!(rel(&fractional_laplacian(&f, 1.0).unwrap(), &lap) < 1e-14);
    }

    #[test]
    fn leray_examples() {
        let g = Grid3::new(16).unwrap();
        let grad = FourierField3::from_fn(g, |x| {
            [x[0].cos() * x[1].sin() + 0.7, x[0].sin() * x[1].cos(), 0.0]
        });
        let p = leray_project(&grad);
        let mean_only = FourierField3::from_fn(g, |_| [0.7, 0.0, 0.0]);
        assert!(rel(&p, &mean_only) < 1e-13);
        let f = random_field(g, 5, 8);
        let pf = leray_project(&f);
        assert!(rel(&leray_project(&pf), &pf) < 1e-14);
        let d = divergence(&pf);
        assert!(coeff_l2(&d) < 1e-12 * coeff_l2(&f));
    }

    #[test]
    fn inverse_divergence_example() {
        let g = Grid3::new(16).unwrap();
        let v = FourierField3::from_fn(g, |x| [x[2].sin(), 0.0, 0.0]);
        let r = inverse_divergence(&v);
        let expect = SymTensorField3::from_fn(
            g,
            |x| {
                let c = -x[2].cos();
                [[0.0, 0.0, c], [0.0, 0.0, 0.0], [c, 0.0, 0.0]]
            },
            true,
        );
        assert!(r.max_coeff_diff(&expect) < 1e-14);
        assert!(coeff_l2(&inverse_divergence(&FourierField3::zeros(g))) == 0.0);
    }

    #[test]
    fn semigroup_examples() {
        let g = Grid3::new(16).unwrap();
        let f = FourierField3::from_fn(g, |x| [x[2].sin(), 0.0, 0.0]);
        let s = heat_semigroup(&f, 0.4, 1.1).unwrap();
        let mut e = f.clone();
        e.scale((-0.4f64).exp());
        assert!(rel(&s, &e) < 1e-14);
        assert_eq!(heat_semigroup(&f, 0.0, 1.0).unwrap(), f);
        assert!(heat_semigroup(&f, -1.0, 1.0).is_err());
    }

    #[test]
    fn curl_of_gradient_vanishes_and_div_of_curl_vanishes() {
        let g = Grid3::new(16).unwrap();
        let s = ScalarField::from_fn(g, |x| (x[0] + 2.0 * x[1]).sin() * x[2].cos());
        assert!(coeff_l2(&curl(&gradient(&s))) < 1e-13);
        let v = random_field(g, 9, 5);
        assert!(coeff_l2(&divergence(&curl(&v))) < 1e-12);
    }

    #[test]
    fn dealiased_product_is_exact_for_band_limited_factors() {
        let g = Grid3::new(16).unwrap();
        let f = ScalarField::from_fn(g, |x| (3.0 * x[0]).sin());
        let h = ScalarField::from_fn(g, |x| (4.0 * x[0]).cos());
        let p = dealiased_product(&f, &h);
        // sin3x·cos4x = ½(sin7x − sin x), entirely in band.
        let e = ScalarField::from_fn(g, |x| 0.5 * ((7.0 * x[0]).sin() - x[0].sin()));
        assert!(p.max_coeff_diff(&e) < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn prop_leray_idempotent_commutes(seed in 0u64..10_000, m in 0.3f64..1.5, t in 0.0f64..0.5) {
            let g = Grid3::new(16).unwrap();
            let f = random_field(g, seed, 6);
            let p = leray_project(&f);
            prop_assert!(rel(&leray_project(&p), &p) < 1e-12);
            let a = leray_project(&fractional_laplacian(&f, m).unwrap());
            let b = fractional_laplacian(&p, m).unwrap();
            prop_assert!(rel(&a, &b) < 1e-12);
            let a = leray_project(&heat_semigroup(&f, t, m).unwrap());
            let b = heat_semigroup(&p, t, m).unwrap();
            prop_assert!(rel(&a, &b) < 1e-12);
        }

        #[test]
        fn prop_inverse_divergence(seed in 0u64..10_000) {
            let g = Grid3::new(16).unwrap();
            let v = random_field(g, seed, 8);
            prop_assert!(inverse_divergence_residual(&v) < 1e-12);
            let r = inverse_divergence(&v);
            let tr = r.trace().physical();
            prop_assert!(tr.iter().all(|x| x.abs() < 1e-12));
        }

        #[test]
        fn prop_semigroup_law(seed in 0u64..10_000, s in 0.0f64..0.5, t in 0.0f64..0.5, m in 0.5f64..1.25) {
            let g = Grid3::new(16).unwrap();
            let f = random_field(g, seed, 6);
            let a = heat_semigroup(&heat_semigroup(&f, s, m).unwrap(), t, m).unwrap();
            let b = heat_semigroup(&f, s + t, m).unwrap();
            prop_assert!(rel(&a, &b) < 1e-12);
        }

        #[test]
        fn prop_parseval(seed in 0u64..10_000) {
            let g = Grid3::new(16).unwrap();
            let f = random_field(g, seed, 6);
            let q = norms::lp_norm(&f, 2.0);
            let p = norms::l2_parseval(&f);
            prop_assert!((q - p).abs() < 1e-12 * p);
        }
    }
}
