//! Space and time mollifiers.
//!
//! The spatial kernel is the radial bump φ(x) ∝ exp(−1/(1−|x|²)) on the
//! unit ball, rescaled to φ_l(x) = l⁻³φ(x/l) with unit mass; it acts as the
//! Fourier multiplier φ̂(l|k|), where
//! φ̂(s) = ∫₀¹ φ(r) r² sinc(sr) dr / ∫₀¹ φ(r) r² dr
//! is tabulated once per distinct |k|² by Gauss–Legendre quadrature.
//!
//! The time kernel is a bump supported in [l/2, l], so f_l(t) only uses
//! data from strictly earlier times. On a data grid of spacing h the kernel
//! is sampled at the lags jh and the weights are renormalised to sum to
//! exactly one, so constants are preserved exactly.

use std::collections::HashMap;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use super::field::{FourierField3, ScalarField, SpectralData, SymTensorField3};
use super::ops::apply_real_multiplier;
use crate::error::{Error, Result};
use crate::tolerances::MIN_TIME_KERNEL_WEIGHTS;

/// Number of Gauss–Legendre nodes per radial sub-interval.
const RADIAL_NODES: usize = 64;
/// Sub-intervals of [0, 1] for the radial quadrature.
const RADIAL_PANELS: usize = 16;

/// Unnormalised bump exp(−1/(1−u²)) on (−1, 1).
pub fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// Vector-space operations needed to mollify a time series.
pub trait Linear: Clone {
    /// Additive identity of the same shape.
    fn zero_like(&self) -> Self;
    /// self ← self + a·x.
    fn add_scaled(&mut self, a: f64, x: &Self);
}

impl Linear for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
}

macro_rules! linear_via_spectral {
    ($($t:ty),*) => {$(
        impl Linear for $t {
            fn zero_like(&self) -> Self {
                self.zeros_like()
            }
            fn add_scaled(&mut self, a: f64, x: &Self) {
                self.axpy(a, x);
            }
        }
    )*};
}
linear_via_spectral!(ScalarField, FourierField3, SymTensorField3);

/// Samples of a quantity on a uniform time grid t₀ + i·h.
#[derive(Clone, Debug)]
pub struct TimeSeries<T> {
    /// Time of the first sample.
    pub t0: f64,
    /// Spacing.
    pub dt: f64,
    /// Samples in increasing time.
    pub values: Vec<T>,
}

impl<T> TimeSeries<T> {
    /// Time of sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }
}

/// Radial spatial mollifier with a cached transform table.
#[derive(Clone, Debug)]
pub struct SpaceMollifier {
    nodes: Vec<(f64, f64)>,
    mass: f64,
    cache: HashMap<(u64, u64), f64>,
}

impl Default for SpaceMollifier {
    fn default() -> Self {
        Self::new()
    }
}

impl SpaceMollifier {
    /// Build the quadrature rule on [0, 1].
    pub fn new() -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(RADIAL_NODES).expect("nonzero"));
        let mut nodes = Vec::with_capacity(RADIAL_NODES * RADIAL_PANELS);
        for p in 0..RADIAL_PANELS {
            let a = p as f64 / RADIAL_PANELS as f64;
            let b = (p + 1) as f64 / RADIAL_PANELS as f64;
            for (x, w) in rule.as_node_weight_pairs() {
                let r = 0.5 * (a + b) + 0.5 * (b - a) * x;
                nodes.push((r, 0.5 * (b - a) * w * bump(r) * r * r));
            }
        }
        let mass = nodes.iter().map(|(_, w)| w).sum();
        Self {
            nodes,
            mass,
            cache: HashMap::new(),
        }
    }

    /// Normalised transform φ̂(s); φ̂(0) = 1.
    pub fn transform(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 1.0;
        }
        self.nodes
            .iter()
            .map(|&(r, w)| {
                let sr = s * r;
                w * sr.sin() / sr
            })
            .sum::<f64>()
            / self.mass
    }

    /// Apply φ_l as a Fourier multiplier to every component.
    pub fn apply<T: SpectralData>(&mut self, f: &T, l: f64) -> Result<T> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mollification scale must be positive, got {l}"
            )));
        }
        let g = f.grid();
        let mut table: HashMap<u64, f64> = HashMap::new();
        for idx in 0..g.len() {
            let k2 = g.k_squared(idx) as u64;
            if table.contains_key(&k2) {
                continue;
            }
            let key = (l.to_bits(), k2);
            let v = match self.cache.get(&key) {
                Some(v) => *v,
                None => {
                    let v = self.transform(l * (k2 as f64).sqrt());
                    self.cache.insert(key, v);
                    v
                }
            };
            table.insert(k2, v);
        }
        Ok(apply_real_multiplier(f, |idx| table[&(g.k_squared(idx) as u64)]))
    }
}

/// Causal time kernel sampled at data-grid lags.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeKernel {
    /// Pairs (lag index j, weight) with Σ weight = 1; the lag is j·h.
    pub weights: Vec<(usize, f64)>,
    /// Data spacing h.
    pub h: f64,
    /// Kernel scale l.
    pub l: f64,
}

impl TimeKernel {
    /// Sample the bump on [l/2, l] at the lags jh.
    pub fn new(l: f64, h: f64) -> Result<Self> {
        if !(l > 0.0) || !(h > 0.0) || !l.is_finite() || !h.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time kernel needs l > 0 and h > 0, got l = {l}, h = {h}"
            )));
        }
        let jmax = (l / h).ceil() as usize;
        let mut weights: Vec<(usize, f64)> = (0..=jmax)
            .filter_map(|j| {
                let s = j as f64 * h;
                let w = bump(4.0 * s / l - 3.0);
                (w > 0.0).then_some((j, w))
            })
            .collect();
        if weights.len() < MIN_TIME_KERNEL_WEIGHTS {
            return Err(Error::InvalidArgument(format!(
                "time kernel of scale {l} is resolved by only {} samples at spacing {h}; \
                 need at least {MIN_TIME_KERNEL_WEIGHTS}",
                weights.len()
            )));
        }
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        for (_, w) in weights.iter_mut() {
            *w /= total;
        }
        Ok(Self { weights, h, l })
    }

    /// Largest lag index used.
    pub fn max_lag(&self) -> usize {
        self.weights.last().map(|(j, _)| *j).unwrap_or(0)
    }

    /// First moment Σ w_j·jh (the shift applied to linear data).
    pub fn first_moment(&self) -> f64 {
        self.weights.iter().map(|(j, w)| w * *j as f64 * self.h).sum()
    }

    /// f_l at sample `i` of a series with matching spacing.
    pub fn apply_at<T: Linear>(&self, series: &TimeSeries<T>, i: usize) -> Result<T> {
        if (series.dt - self.h).abs() > 1e-12 * self.h {
            return Err(Error::InvalidArgument(format!(
                "series spacing {} does not match kernel spacing {}",
                series.dt, self.h
            )));
        }
        if i < self.max_lag() || i >= series.values.len() {
            return Err(Error::StencilTooShort {
                required: self.max_lag(),
                available: i.min(series.values.len()),
            });
        }
        self.apply_with(|j| Ok(series.values[i - j].clone()))
    }

    /// f_l(t) for data supplied by a callback returning f(t − jh).
    pub fn apply_with<T: Linear>(&self, mut sample: impl FnMut(usize) -> Result<T>) -> Result<T> {
        let mut it = self.weights.iter();
        let (j0, w0) = it.next().expect("kernel has weights");
        let first = sample(*j0)?;
        let mut acc = first.zero_like();
        acc.add_scaled(*w0, &first);
        for (j, w) in it {
            acc.add_scaled(*w, &sample(*j)?);
        }
        Ok(acc)
    }
}

/// Space-then-time mollification (f ∗ₓ φ_l) ∗ₜ ϕ_l at sample `i`.
pub fn mollify<T: SpectralData + Linear>(
    series: &TimeSeries<T>,
    i: usize,
    l: f64,
    space: &mut SpaceMollifier,
) -> Result<T> {
    let kernel = TimeKernel::new(l, series.dt)?;
    let t = kernel.apply_at(series, i)?;
    space.apply(&t, l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::norms::lp_norm;
    use crate::spectral::Grid3;
    use proptest::prelude::*;

    #[test]
    fn constants_are_preserved() {
        let g = Grid3::new(8).unwrap();
        let c = FourierField3::from_fn(g, |_| [1.5, -2.0, 0.25]);
        let series = TimeSeries {
            t0: 0.0,
            dt: 0.01,
            values: vec![c.clone(); 40],
        };
        let mut sm = SpaceMollifier::new();
        let out = mollify(&series, 39, 0.2, &mut sm).unwrap();
        assert!(out.max_coeff_diff(&c) < 1e-15);
    }

    #[test]
    fn pure_mode_scaled_by_transform() {
        let g = Grid3::new(16).unwrap();
        let f = ScalarField::from_fn(g, |x| (3.0 * x[1]).cos());
        let mut sm = SpaceMollifier::new();
        let l = 0.3;
        let out = sm.apply(&f, l).unwrap();
        let mut e = f.clone();
        e.scale(sm.transform(3.0 * l));
        assert!(out.max_coeff_diff(&e) < 1e-15);
        // The transform of a nonnegative unit-mass kernel lies in [−1, 1].
        for s in [0.5, 2.0, 10.0, 40.0] {
            let v = sm.transform(s);
            assert!(v.abs() <= 1.0 && v < 1.0);
        }
    }

    #[test]
    fn small_argument_transform_matches_second_moment() {
        // φ̂(s) ≈ 1 − s²⟨r²⟩/6 for small s.
        let sm = SpaceMollifier::new();
        let m2: f64 =
            sm.nodes.iter().map(|(r, w)| w * r * r).sum::<f64>() / sm.mass;
        let s: f64 = 1e-3;
        assert!((sm.transform(s) - (1.0 - s * s * m2 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn linear_in_time_shifts_by_first_moment() {
        let h = 0.001;
        let l = 0.05;
        let k = TimeKernel::new(l, h).unwrap();
        let (a, b) = (0.7, -2.0);
        let series = TimeSeries {
            t0: 0.0,
            dt: h,
            values: (0..200).map(|i| a + b * i as f64 * h).collect::<Vec<f64>>(),
        };
        let i = 150;
        let t = series.time(i);
        let out = k.apply_at(&series, i).unwrap();
        assert!((out - (a + b * (t - k.first_moment()))).abs() < 1e-13);
        // Direct quadrature of the continuous kernel: the first moment of a
        // bump symmetric about 3l/4 is 3l/4.
        assert!((k.first_moment() - 0.75 * l).abs() < 1e-10);
    }

    #[test]
    fn short_stencil_is_rejected_with_length() {
        let k = TimeKernel::new(0.05, 0.001).unwrap();
        let series = TimeSeries {
            t0: 0.0,
            dt: 0.001,
            values: vec![0.0f64; 10],
        };
        match k.apply_at(&series, 9) {
            Err(Error::StencilTooShort { required, .. }) => assert_eq!(required, k.max_lag()),
            other => panic!("unexpected {other:?}"),
        }
        assert!(TimeKernel::new(0.001, 0.001).is_err());
    }

    #[test]
    fn kernel_support_is_causal() {
        let k = TimeKernel::new(0.1, 0.003).unwrap();
        for (j, w) in &k.weights {
            let s = *j as f64 * 0.003;
            assert!(s > 0.05 && s < 0.1 && *w > 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn prop_mollification_contracts_lp(seed in 0u64..1000, l in 0.05f64..0.8) {
            // Modes with |k_i| ≤ 3 on a 16-grid: |f|² has degree ≤ 6 and
            // |f|⁴ degree ≤ 12 < 16, so grid quadrature of the L² and L⁴
            // norms is exact and the contraction can be tested sharply.
            let g = Grid3::new(16).unwrap();
            let f = crate::spectral::ops::tests::random_field_band(g, seed, 5, 3);
            let mut sm = SpaceMollifier::new();
            let out = sm.apply(&f, l).unwrap();
            for p in [2.0, 4.0] {
                let a = lp_norm(&out, p);
                let b = lp_norm(&f, p);
                prop_assert!(a <= b * (1.0 + crate::tolerances::MOLLIFIER_CONTRACTION));
            }
        }
    }
}
