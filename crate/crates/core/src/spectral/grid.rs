//! Uniform grids on T³ and the 3-D FFT used by every spectral operation.
//!
//! The torus [−π, π)³ is sampled at xⱼ = 2πj/n (the same torus with the
//! origin moved to a corner). Coefficients are normalised so that
//! f(xⱼ) = Σₖ f̂ₖ e^{ik·xⱼ}; hence f̂₀ is the spatial mean.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform grid with `n` samples per axis and a rational dealiasing factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid3 {
    n: usize,
    dealias_num: usize,
    dealias_den: usize,
}

impl Grid3 {
    /// Grid with the default 3/2 dealiasing factor.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_dealias(n, 3, 2)
    }

    /// Grid with dealiasing factor `num/den`; the padded size n·num/den
    /// must be an even integer.
    pub fn with_dealias(n: usize, num: usize, den: usize) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "grid size must be even and >= 8, got {n}"
            )));
        }
        if den == 0 || num < den {
            return Err(Error::InvalidArgument(format!(
                "dealias factor must be >= 1, got {num}/{den}"
            )));
        }
        if (n * num) % den != 0 || ((n * num) / den) % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "padded size n*{num}/{den} must be an even integer for n = {n}"
            )));
        }
        Ok(Self {
            n,
            dealias_num: num,
            dealias_den: den,
        })
    }

    /// Samples per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of samples n³.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Always false: grids have at least 8³ points.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Dealiasing factor as (numerator, denominator).
    pub fn dealias_factor(&self) -> (usize, usize) {
        (self.dealias_num, self.dealias_den)
    }

    /// Samples per axis of the padded product grid.
    pub fn padded_n(&self) -> usize {
        self.n * self.dealias_num / self.dealias_den
    }

    /// Grid of the same dealiasing factor but a different size.
    pub fn resized(&self, n: usize) -> Result<Self> {
        Self::with_dealias(n, self.dealias_num, self.dealias_den)
    }

    /// Integer wavenumber of FFT index `i` on an axis of length `n`,
    /// in [−n/2, n/2).
    pub fn wavenumber_of(i: usize, n: usize) -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Integer wavenumber of FFT index `i` on this grid.
    pub fn wavenumber(&self, i: usize) -> i64 {
        Self::wavenumber_of(i, self.n)
    }

    /// Wavenumber used for first derivatives: the unpaired Nyquist mode
    /// has no real derivative and is mapped to 0.
    pub fn deriv_wavenumber(&self, i: usize) -> f64 {
        if i == self.n / 2 {
            0.0
        } else {
            self.wavenumber(i) as f64
        }
    }

    /// Physical coordinate of sample index `i`.
    pub fn coordinate(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.n as f64
    }

    /// Quadrature weight (2π/n)³ of one sample.
    pub fn cell_volume(&self) -> f64 {
        (2.0 * PI / self.n as f64).powi(3)
    }

    /// Flat index of (i0, i1, i2), row-major.
    #[inline]
    pub fn index(&self, i0: usize, i1: usize, i2: usize) -> usize {
        (i0 * self.n + i1) * self.n + i2
    }

    /// Inverse of [`Grid3::index`].
    #[inline]
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    /// Integer wavevector of flat index `idx`.
    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        let (a, b, c) = self.unindex(idx);
        [self.wavenumber(a), self.wavenumber(b), self.wavenumber(c)]
    }

    /// Derivative wavevector (Nyquist components zeroed) of flat index `idx`.
    pub fn deriv_wavevector(&self, idx: usize) -> [f64; 3] {
        let (a, b, c) = self.unindex(idx);
        [
            self.deriv_wavenumber(a),
            self.deriv_wavenumber(b),
            self.deriv_wavenumber(c),
        ]
    }

    /// |k|² of flat index `idx` using the full integer wavevector.
    pub fn k_squared(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64
    }

    /// Physical point of flat index `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let (a, b, c) = self.unindex(idx);
        [self.coordinate(a), self.coordinate(b), self.coordinate(c)]
    }
}

type Plan = Arc<dyn Fft<f64>>;

fn plan(n: usize, inverse: bool) -> Plan {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Plan>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// Lines per parallel FFT batch.
const BATCH_LINES: usize = 256;

fn fft_lines(buf: &mut [Complex64], n: usize, fft: &Plan) {
    buf.par_chunks_mut(n * BATCH_LINES).for_each(|chunk| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(chunk, &mut scratch);
    });
}

/// In-place 3-D FFT of an n×n×n row-major array. The forward transform is
/// normalised by 1/n³ so that the zero coefficient equals the mean; the
/// inverse is unnormalised.
pub fn fft3(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n * n, "fft3 length mismatch");
    let fft = plan(n, inverse);
    // Axis 2 is contiguous.
    fft_lines(data, n, &fft);
    // Axis 1: transpose each (i1, i2) slab.
    let nn = n * n;
    let mut buf = vec![Complex64::new(0.0, 0.0); data.len()];
    buf.par_chunks_mut(nn)
        .zip(data.par_chunks(nn))
        .for_each(|(dst, src)| {
            for i1 in 0..n {
                for i2 in 0..n {
                    dst[i2 * n + i1] = src[i1 * n + i2];
                }
            }
        });
    fft_lines(&mut buf, n, &fft);
    data.par_chunks_mut(nn)
        .zip(buf.par_chunks(nn))
        .for_each(|(dst, src)| {
            for i1 in 0..n {
                for i2 in 0..n {
                    dst[i1 * n + i2] = src[i2 * n + i1];
                }
            }
        });
    // Axis 0: gather lines of stride n².
    buf.par_chunks_mut(n).enumerate().for_each(|(line, dst)| {
        for (i0, d) in dst.iter_mut().enumerate() {
            *d = data[i0 * nn + line];
        }
    });
    fft_lines(&mut buf, n, &fft);
    let scale = if inverse { 1.0 } else { 1.0 / (n * nn) as f64 };
    data.par_chunks_mut(nn).enumerate().for_each(|(i0, dst)| {
        for (line, d) in dst.iter_mut().enumerate() {
            *d = buf[line * n + i0] * scale;
        }
    });
}

/// Forward transform of real samples.
pub fn forward_real(values: &[f64], n: usize) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft3(&mut data, n, false);
    data
}

/// Inverse transform returning the real part of the samples.
pub fn inverse_real(coeffs: &[Complex64], n: usize) -> Vec<f64> {
    let mut data = coeffs.to_vec();
    fft3(&mut data, n, true);
    data.into_iter().map(|c| c.re).collect()
}

fn axis_targets(i: usize, n: usize, m: usize) -> Vec<(usize, f64)> {
    let k = Grid3::wavenumber_of(i, n);
    if i == n / 2 {
        // Split the unpaired Nyquist coefficient symmetrically so the
        // padded interpolant stays real and matches the coarse samples.
        let h = (n / 2) as i64;
        vec![((m as i64 - h) as usize, 0.5), (h as usize, 0.5)]
    } else {
        vec![(k.rem_euclid(m as i64) as usize, 1.0)]
    }
}

/// Zero-pad coefficients from an n-grid onto an m-grid (m ≥ n).
pub fn pad_coeffs(coeffs: &[Complex64], n: usize, m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); m * m * m];
    let targets: Vec<Vec<(usize, f64)>> = (0..n).map(|i| axis_targets(i, n, m)).collect();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let v = coeffs[(a * n + b) * n + c];
                if v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for &(ta, wa) in &targets[a] {
                    for &(tb, wb) in &targets[b] {
                        for &(tc, wc) in &targets[c] {
                            out[(ta * m + tb) * m + tc] += v * (wa * wb * wc);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Truncate coefficients from an m-grid to an n-grid (m ≥ n): the Nyquist
/// coefficient collects both ±n/2 modes, so truncation inverts padding.
pub fn truncate_coeffs(coeffs: &[Complex64], m: usize, n: usize) -> Vec<Complex64> {
    let sources: Vec<Vec<usize>> = (0..n)
        .map(|i| axis_targets(i, n, m).into_iter().map(|(t, _)| t).collect())
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for &sa in &sources[a] {
                    for &sb in &sources[b] {
                        for &sc in &sources[c] {
                            acc += coeffs[(sa * m + sb) * m + sc];
                        }
                    }
                }
                out[(a * n + b) * n + c] = acc;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid3::new(7).is_err());
        assert!(Grid3::new(6).is_err());
        assert!(Grid3::new(10).is_err()); // 15 is odd
        assert!(Grid3::new(8).is_ok());
        assert!(Grid3::with_dealias(8, 1, 2).is_err());
    }

    #[test]
    fn wavenumbers_cover_half_open_band() {
        let g = Grid3::new(8).unwrap();
        let ks: Vec<i64> = (0..8).map(|i| g.wavenumber(i)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.deriv_wavenumber(4), 0.0);
    }

    #[test]
    fn fft_round_trip_and_mean() {
        let n = 16;
        let vals: Vec<f64> = (0..n * n * n).map(|i| ((i * 37) % 11) as f64 - 3.0).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let c = forward_real(&vals, n);
        assert!((c[0].re - mean).abs() < 1e-13);
        let back = inverse_real(&c, n);
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_lands_on_its_wavevector() {
        let g = Grid3::new(8).unwrap();
        let vals: Vec<f64> = (0..g.len())
            .map(|i| {
                let x = g.point(i);
                (2.0 * x[0] - x[2]).cos()
            })
            .collect();
        let c = forward_real(&vals, 8);
        for idx in 0..g.len() {
            let k = g.wavevector(idx);
            let expect = if k == [2, 0, -1] || k == [-2, 0, 1] { 0.5 } else { 0.0 };
            assert!((c[idx].re - expect).abs() < 1e-13, "{k:?}");
        }
    }

    #[test]
    fn pad_then_truncate_is_identity() {
        let n = 8;
        let vals: Vec<f64> = (0..n * n * n).map(|i| ((i * 13) % 7) as f64).collect();
        let c = forward_real(&vals, n);
        let p = pad_coeffs(&c, n, 12);
        let back = truncate_coeffs(&p, 12, n);
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).norm() < 1e-13);
        }
        // Padded interpolant is real and reproduces the coarse samples.
        let mut fine = p.clone();
        fft3(&mut fine, 12, true);
        assert!(fine.iter().all(|z| z.im.abs() < 1e-12));
    }
}
