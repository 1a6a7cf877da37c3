//! Monte-Carlo regularity studies and the exponential weight Υ = e^B.
//!
//! The regularity report estimates E sup_t ‖z‖_{H^{(5+σ)/2}} and
//! E ‖z‖_{C_T^{2/5−δ} H^{(3+σ)/2}} for several spectral truncations; under
//! the trace hypothesis the moments must settle as the truncation grows,
//! and for a violating decay they must grow. Only the law of z matters
//! here, so each path is sampled directly with the exact OU transition
//! (one complex normal per coordinate and step) instead of through B.

use rayon::prelude::*;
use serde::Serialize;

use super::holder::{holder_norm_with, stopping_time, StopPath, StopReason, StoppingTime};
use super::{complex_normal, ou_convolve, sample_rng, sample_wiener_stream, ModeSet, NoiseConfig, NoisePath, OuStep, ScalarPath};
use crate::error::{Error, Result};
use crate::ledger::NoiseMode;
use crate::spectral::mollify::TimeKernel;
use crate::tolerances::MC_TRUNCATION_DRIFT;
use num_complex::Complex64;

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moment {
    /// Mean.
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
}

impl Moment {
    /// Mean and standard error of `x`.
    pub fn of(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        Moment { mean, se: (var / n).sqrt() }
    }
}

/// Moments at one truncation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationMoments {
    /// Grid size n (modes with max|k_i| < n/2).
    pub n: usize,
    /// Retained half-set modes.
    pub modes: usize,
    /// E sup_t ‖z(t)‖_{H^{(5+σ)/2}}.
    pub sup_high: Moment,
    /// E ‖z‖_{C_T^{2/5−δ} H^{(3+σ)/2}}.
    pub holder: Moment,
    /// E ‖z‖_{C_T^{1/2−δ} H^{(3+σ)/2}} (contrast exponent).
    pub holder_contrast: Moment,
}

/// Result of [`regularity_report`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    /// Configuration (n is overridden by each truncation).
    pub config: NoiseConfig,
    /// Paths per truncation.
    pub samples: usize,
    /// Per-truncation moments, in the order requested.
    pub truncations: Vec<TruncationMoments>,
    /// s₀ > 4 − m + 2σ.
    pub trace_hypothesis: bool,
    /// s₀ > 3 + 2σ.
    pub strong_trace_hypothesis: bool,
    /// (max − min)/min of the sup-norm means across truncations.
    pub drift_sup: f64,
    /// Same for the Hölder moment.
    pub drift_holder: f64,
    /// Same for the contrast moment.
    pub drift_contrast: f64,
    /// Both drifts below the threshold.
    pub bounded: bool,
    /// "bounded under refinement" or "growing under refinement".
    pub verdict: String,
}

fn drift(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = v.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = v.fold(f64::INFINITY, f64::min);
    (max - min) / min
}

/// Sample z on t_i = i·dt with the exact OU transition.
fn sample_ou_direct(modes: &ModeSet, m: f64, dt: f64, steps: usize, seed: u64, stream: u64) -> Vec<Vec<[Complex64; 2]>> {
    let mut rng = sample_rng(seed, stream);
    let st: Vec<(OuStep, f64)> = modes.modes.iter().map(|mi| (OuStep::new(mi.k2.powf(m), dt), mi.g)).collect();
    let mut cur = vec![[Complex64::new(0.0, 0.0); 2]; modes.len()];
    let mut out = Vec::with_capacity(steps + 1);
    out.push(cur.clone());
    for _ in 0..steps {
        for ((s, g), c) in st.iter().zip(cur.iter_mut()) {
            let sd = g * s.var_z.sqrt();
            for d in 0..2 {
                c[d] = c[d] * s.decay + complex_normal(&mut rng) * sd;
            }
        }
        out.push(cur.clone());
    }
    out
}

/// Per-path statistics: sup ‖z‖_{H^{(5+σ)/2}}, and the H^{(3+σ)/2} Hölder
/// norms with exponents θ and θ'.
fn path_statistics(modes: &ModeSet, z: &[Vec<[Complex64; 2]>], dt: f64, sigma: f64, theta: f64, theta_c: f64) -> Result<(f64, f64, f64)> {
    let w_hi = modes.weights((5.0 + sigma) / 2.0);
    let w_lo = modes.weights((3.0 + sigma) / 2.0);
    let sup_high = z.iter().map(|c| modes.weighted_norm(&w_hi, c)).fold(0.0, f64::max);
    let norms: Vec<f64> = z.iter().map(|c| modes.weighted_norm(&w_lo, c)).collect();
    let len = z.len();
    let mut d = vec![0.0; len * len];
    for i in 0..len {
        for j in (i + 1)..len {
            let v = modes.weighted_distance(&w_lo, &z[i], &z[j]);
            d[i * len + j] = v;
            d[j * len + i] = v;
        }
    }
    let h = holder_norm_with(len, dt, theta, |i| norms[i], |i, j| d[i * len + j])?;
    let hc = holder_norm_with(len, dt, theta_c, |i| norms[i], |i, j| d[i * len + j])?;
    Ok((sup_high, h.total, hc.total))
}

/// Monte-Carlo moments of z across spectral truncations.
pub fn regularity_report(cfg: &NoiseConfig, samples: usize, truncations: &[usize]) -> Result<RegularityReport> {
    cfg.validate()?;
    if cfg.mode != NoiseMode::Additive {
        return Err(Error::InvalidArgument("the regularity report concerns the additive stochastic convolution".into()));
    }
    if samples < 100 {
        return Err(Error::InvalidArgument(format!("regularity report needs at least 100 samples, got {samples}")));
    }
    if truncations.len() < 2 {
        return Err(Error::InvalidArgument("regularity report needs at least two truncations".into()));
    }
    let theta = 2.0 / 5.0 - cfg.delta;
    let theta_c = 0.5 - cfg.delta;
    let steps = cfg.steps();
    let mut out = Vec::new();
    for &n in truncations {
        let modes = ModeSet::new(n, cfg.s0)?;
        let stats: Vec<(f64, f64, f64)> = (0..samples as u64)
            .into_par_iter()
            .map(|s| {
                let z = sample_ou_direct(&modes, cfg.m, cfg.dt, steps, cfg.seed, s);
                path_statistics(&modes, &z, cfg.dt, cfg.sigma, theta, theta_c)
            })
            .collect::<Result<_>>()?;
        let col = |f: fn(&(f64, f64, f64)) -> f64| stats.iter().map(f).collect::<Vec<_>>();
        out.push(TruncationMoments {
            n,
            modes: modes.len(),
            sup_high: Moment::of(&col(|s| s.0)),
            holder: Moment::of(&col(|s| s.1)),
            holder_contrast: Moment::of(&col(|s| s.2)),
        });
    }
    let drift_sup = drift(out.iter().map(|t| t.sup_high.mean));
    let drift_holder = drift(out.iter().map(|t| t.holder.mean));
    let drift_contrast = drift(out.iter().map(|t| t.holder_contrast.mean));
    let bounded = drift_sup < MC_TRUNCATION_DRIFT && drift_holder < MC_TRUNCATION_DRIFT;
    Ok(RegularityReport {
        config: cfg.clone(),
        samples,
        truncations: out,
        trace_hypothesis: cfg.trace_hypothesis(),
        strong_trace_hypothesis: cfg.strong_trace_hypothesis(),
        drift_sup,
        drift_holder,
        drift_contrast,
        bounded,
        verdict: if bounded { "bounded under refinement" } else { "growing under refinement" }.into(),
    })
}

/// Hölder norms of Brownian paths under time refinement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderRefinement {
    /// Exponents studied.
    pub thetas: Vec<f64>,
    /// Steps on [0, 1] at each refinement level.
    pub steps: Vec<usize>,
    /// moments[θ][level] of the Hölder norm.
    pub moments: Vec<Vec<Moment>>,
    /// Ratio of the finest to the coarsest mean, per θ.
    pub growth: Vec<f64>,
}

/// Hölder norms of `paths` Brownian paths on [0, 1], each sampled at the
/// finest level and restricted to coarser levels (nested grids).
pub fn holder_refinement(thetas: &[f64], base_steps: usize, levels: usize, factor: usize, paths: usize, seed: u64) -> Result<HolderRefinement> {
    if levels < 2 || factor < 2 || base_steps < 2 || paths < 2 {
        return Err(Error::InvalidArgument("refinement study needs ≥ 2 levels, factor ≥ 2, ≥ 2 steps and ≥ 2 paths".into()));
    }
    for &t in thetas {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidArgument(format!("Hölder exponent {t} outside (0, 1)")));
        }
    }
    let steps: Vec<usize> = (0..levels).map(|l| base_steps * factor.pow(l as u32)).collect();
    let finest = *steps.last().expect("levels ≥ 2");
    let per_path: Vec<Vec<Vec<f64>>> = (0..paths as u64)
        .into_par_iter()
        .map(|p| {
            let cfg = NoiseConfig { seed, dt: 1.0 / finest as f64, t_end: 1.0, ..NoiseConfig::multiplicative() };
            let NoisePath::Multiplicative(b) = sample_wiener_stream(&cfg, p)? else { unreachable!("scalar noise") };
            let mut by_level = Vec::with_capacity(levels);
            for &s in &steps {
                let stride = finest / s;
                let v: Vec<f64> = b.values.iter().step_by(stride).copied().collect();
                let dt = 1.0 / s as f64;
                // Largest increment per lag, shared by every θ.
                let len = v.len();
                let mut maxdiff = vec![0.0f64; len];
                for i in 0..len {
                    for j in (i + super::HOLDER_MIN_LAG)..len {
                        let d = (v[j] - v[i]).abs();
                        if d > maxdiff[j - i] {
                            maxdiff[j - i] = d;
                        }
                    }
                }
                let sup = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                let norms: Vec<f64> = thetas
                    .iter()
                    .map(|&t| maxdiff.iter().enumerate().skip(1).fold(0.0f64, |a, (lag, d)| a.max(d / (lag as f64 * dt).powf(t))) + sup)
                    .collect();
                by_level.push(norms);
            }
            Ok(by_level)
        })
        .collect::<Result<_>>()?;
    let mut moments = Vec::new();
    let mut growth = Vec::new();
    for (ti, _) in thetas.iter().enumerate() {
        let row: Vec<Moment> = (0..levels).map(|l| Moment::of(&per_path.iter().map(|p| p[l][ti]).collect::<Vec<_>>())).collect();
        growth.push(row[levels - 1].mean / row[0].mean);
        moments.push(row);
    }
    Ok(HolderRefinement { thetas: thetas.to_vec(), steps, moments, growth })
}

/// Υ = e^B sample-wise.
pub fn upsilon(b: &ScalarPath) -> ScalarPath {
    ScalarPath { dt: b.dt, values: b.values.iter().map(|x| x.exp()).collect() }
}

/// Υ_l = Υ ∗_t ϕ_l with the causal kernel; Υ = 1 for t < 0 (B vanishes
/// there).
pub fn upsilon_mollified(b: &ScalarPath, l: f64) -> Result<ScalarPath> {
    let k = TimeKernel::new(l, b.dt)?;
    let u = upsilon(b);
    let values = (0..u.values.len())
        .map(|i| k.weights.iter().map(|(j, w)| w * if *j > i { 1.0 } else { u.values[i - j] }).sum())
        .collect();
    Ok(ScalarPath { dt: b.dt, values })
}

/// Pathwise checks of Υ up to the stopping time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UpsilonCheck {
    /// T_L of the path.
    pub stop: StoppingTime,
    /// m_L² = 3 L^{1/2} e^{L^{1/4}}.
    pub m_l_squared: f64,
    /// sup Υ on [0, T_L).
    pub sup_upsilon: f64,
    /// sup Υ⁻¹ on [0, T_L).
    pub sup_inverse: f64,
    /// max |Υ_l − Υ| / (l^{1/2−2δ} m_L²) on [0, T_L).
    pub mollification_ratio: f64,
    /// All three bounds hold.
    pub pass: bool,
}

/// Check Υ, Υ⁻¹ ≤ m_L² and |Υ_l − Υ| ≤ l^{1/2−2δ} m_L² on the samples
/// before T_L (including T_L itself when the path was capped at L).
pub fn upsilon_check(b: &ScalarPath, big_l: f64, delta: f64, l: f64) -> Result<UpsilonCheck> {
    let stop = stopping_time(&StopPath::Multiplicative(b), big_l, delta)?;
    let end = if stop.reason == StopReason::Cap { stop.index + 1 } else { stop.index };
    let m2 = 3.0 * big_l.sqrt() * big_l.powf(0.25).exp();
    let u = upsilon(b);
    let ul = upsilon_mollified(b, l)?;
    let scale = l.powf(0.5 - 2.0 * delta) * m2;
    let mut sup_u: f64 = 0.0;
    let mut sup_inv: f64 = 0.0;
    let mut ratio: f64 = 0.0;
    for i in 0..end {
        sup_u = sup_u.max(u.values[i]);
        sup_inv = sup_inv.max(1.0 / u.values[i]);
        ratio = ratio.max((ul.values[i] - u.values[i]).abs() / scale);
    }
    Ok(UpsilonCheck {
        stop,
        m_l_squared: m2,
        sup_upsilon: sup_u,
        sup_inverse: sup_inv,
        mollification_ratio: ratio,
        pass: sup_u <= m2 && sup_inv <= m2 && ratio <= 1.0,
    })
}

/// Summary of one simulated path for `noise simulate`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleSummary {
    /// Sample index (RNG stream).
    pub sample: u64,
    /// Additive: sup ‖z‖_{H^{(5+σ)/2}}; multiplicative: sup |B|.
    pub sup_level: f64,
    /// Additive: ‖z‖_{C^{2/5−2δ}H^{(3+σ)/2}}; multiplicative: ‖B‖_{C^{1/2−2δ}}.
    pub holder: f64,
    /// Stopping time (when the path covers [0, L]).
    pub stop: Option<StoppingTime>,
    /// Υ checks (multiplicative, when the path covers [0, L]).
    pub upsilon: Option<UpsilonCheck>,
}

/// Simulate `samples` paths and summarize each; `big_l` enables stopping
/// times and `l` the Υ mollification check.
pub fn simulate(cfg: &NoiseConfig, samples: usize, big_l: Option<f64>, l: f64) -> Result<Vec<SampleSummary>> {
    cfg.validate()?;
    (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let path = sample_wiener_stream(cfg, s)?;
            let covers = |len: usize, dt: f64, bl: f64| (len - 1) as f64 * dt >= bl * (1.0 - 1e-12);
            Ok(match path {
                NoisePath::Additive(p) => {
                    let z = ou_convolve(&p, cfg.m);
                    let (sup_level, holder, _) =
                        path_statistics(&z.modes, &z.z, z.dt, cfg.sigma, 2.0 / 5.0 - 2.0 * cfg.delta, 0.5 - cfg.delta)?;
                    let stop = match big_l {
                        Some(bl) if covers(z.len(), z.dt, bl) => {
                            Some(stopping_time(&StopPath::Additive { z: &z, sigma: cfg.sigma, c_s: cfg.c_s }, bl, cfg.delta)?)
                        }
                        _ => None,
                    };
                    SampleSummary { sample: s, sup_level, holder, stop, upsilon: None }
                }
                NoisePath::Multiplicative(b) => {
                    let sup_level = b.values.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                    let holder = super::holder_norm_scalar(&b.values, b.dt, 0.5 - 2.0 * cfg.delta)?.total;
                    let (stop, ups) = match big_l {
                        Some(bl) if covers(b.values.len(), b.dt, bl) => {
                            let u = upsilon_check(&b, bl, cfg.delta, l)?;
                            (Some(u.stop), Some(u))
                        }
                        _ => (None, None),
                    };
                    SampleSummary { sample: s, sup_level, holder, stop, upsilon: ups }
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{sample_wiener, StopReason};

    #[test]
    fn zero_noise_gives_unit_upsilon() {
        let b = ScalarPath { dt: 0.01, values: vec![0.0; 200] };
        assert!(upsilon(&b).values.iter().all(|&v| v == 1.0));
        assert!(upsilon_mollified(&b, 0.1).unwrap().values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn upsilon_starts_at_one() {
        let NoisePath::Multiplicative(b) = sample_wiener(&NoiseConfig { seed: 9, ..NoiseConfig::multiplicative() }).unwrap() else {
            unreachable!()
        };
        assert_eq!(upsilon(&b).values[0], 1.0);
    }

    #[test]
    fn upsilon_bounds_hold_on_sampled_paths() {
        let cfg = NoiseConfig { dt: 1.0 / 256.0, t_end: 2.0, seed: 21, ..NoiseConfig::multiplicative() };
        let sums = simulate(&cfg, 100, Some(2.0), 0.05).unwrap();
        for s in &sums {
            let u = s.upsilon.as_ref().unwrap();
            assert!(u.pass, "sample {}: {u:?}", s.sample);
            assert!(u.stop.time <= 2.0);
        }
        // At least some paths must have stopped early for this to be a test.
        assert!(sums.iter().any(|s| s.stop.unwrap().reason != StopReason::Cap));
    }

    #[test]
    fn brownian_holder_signature() {
        let r = holder_refinement(&[0.40, 0.45, 0.55], 256, 3, 4, 100, 3).unwrap();
        // Nested grids: every path's estimate is nondecreasing in the level.
        for row in &r.moments {
            assert!(row.windows(2).all(|w| w[1].mean >= w[0].mean));
        }
        assert!(r.growth[0] < 1.10, "{:?}", r.growth);
        assert!(r.growth[1] > r.growth[0]);
        assert!(r.growth[2] > 1.25, "{:?}", r.growth);
    }

    #[test]
    fn small_truncation_study_separates_decays() {
        let good = NoiseConfig { s0: 4.0, dt: 1.0 / 8.0, t_end: 1.0, seed: 1, ..NoiseConfig::additive() };
        let r = regularity_report(&good, 100, &[8, 12, 16]).unwrap();
        assert!(r.trace_hypothesis && r.bounded, "{r:?}");
        let bad = NoiseConfig { s0: 2.0, ..good };
        let r = regularity_report(&bad, 100, &[8, 12, 16]).unwrap();
        assert!(!r.trace_hypothesis);
        assert!(!r.bounded);
        assert!(r.truncations[2].sup_high.mean > r.truncations[0].sup_high.mean);
    }
}
