//! Discrete Hölder norms and stopping times.
//!
//! For samples f(t_i), t_i = i·dt, the Hölder norm is estimated as
//!
//! ‖f‖_{C^θ} ≈ sup_{|i−j| ≥ 2} ‖f(t_i) − f(t_j)‖/|t_i − t_j|^θ + sup_i ‖f(t_i)‖.
//!
//! Pairs one step apart are excluded: at lag dt the quotient of a rough
//! path is dominated by sampling noise. Since the supremum runs over
//! finitely many pairs the value is a lower estimate of the true norm.

use serde::Serialize;

use super::{OuPath, ScalarPath};
use crate::error::{Error, Result};

/// Smallest lag, in samples, entering the Hölder quotient.
pub const HOLDER_MIN_LAG: usize = 2;

/// Hölder seminorm, supremum and their sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderNorm {
    /// sup over pairs of ‖f(t) − f(s)‖/|t − s|^θ.
    pub seminorm: f64,
    /// sup_t ‖f(t)‖.
    pub sup: f64,
    /// seminorm + sup.
    pub total: f64,
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("Hölder exponent {theta} outside (0, 1)")))
    }
}

fn min_lag(len: usize) -> usize {
    HOLDER_MIN_LAG.min(len.saturating_sub(1)).max(1)
}

/// Hölder norm of a sampled path given its pointwise norms and pairwise
/// distances.
pub fn holder_norm_with(len: usize, dt: f64, theta: f64, norm: impl Fn(usize) -> f64, dist: impl Fn(usize, usize) -> f64) -> Result<HolderNorm> {
    check_theta(theta)?;
    if len < 2 {
        return Err(Error::InvalidArgument("a Hölder norm needs at least two samples".into()));
    }
    let lag0 = min_lag(len);
    let mut seminorm: f64 = 0.0;
    for i in 0..len {
        for j in (i + lag0)..len {
            seminorm = seminorm.max(dist(i, j) / ((j - i) as f64 * dt).powf(theta));
        }
    }
    let sup = (0..len).map(&norm).fold(0.0, f64::max);
    Ok(HolderNorm { seminorm, sup, total: seminorm + sup })
}

/// Hölder norm of a scalar path.
pub fn holder_norm_scalar(values: &[f64], dt: f64, theta: f64) -> Result<HolderNorm> {
    holder_norm_with(values.len(), dt, theta, |i| values[i].abs(), |i, j| (values[i] - values[j]).abs())
}

/// Which threshold stopped the path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StopReason {
    /// The pointwise norm reached its threshold.
    Level,
    /// The running Hölder norm reached its threshold.
    Holder,
    /// Neither did before t = L.
    Cap,
}

/// A stopping time evaluated on the sample grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StoppingTime {
    /// T_L.
    pub time: f64,
    /// Sample index of the first crossing (or the last sample ≤ L).
    pub index: usize,
    /// Cause.
    pub reason: StopReason,
}

/// The quantities a stopping time looks at.
pub enum StopPath<'a> {
    /// z with its H^{(5+σ)/2} level and H^{(3+σ)/2} Hölder norms.
    Additive {
        /// Stochastic convolution.
        z: &'a OuPath,
        /// σ.
        sigma: f64,
        /// C_S.
        c_s: f64,
    },
    /// |B| and the C^{1/2−2δ} norm of B.
    Multiplicative(&'a ScalarPath),
}

#[allow(clippy::too_many_arguments)]
/// Running first crossing of `level(i) ≥ a` or running Hölder norm ≥ h.
fn first_crossing(
    len: usize,
    dt: f64,
    big_l: f64,
    theta: f64,
    level: impl Fn(usize) -> f64,
    level_cap: f64,
    holder_sup: impl Fn(usize) -> f64,
    dist: impl Fn(usize, usize) -> f64,
    holder_cap: f64,
) -> StoppingTime {
    let last = ((big_l / dt) * (1.0 + 1e-12)).floor() as usize;
    let last = last.min(len - 1);
    let mut semi: f64 = 0.0;
    let mut sup: f64 = 0.0;
    for i in 0..=last {
        if level(i) >= level_cap {
            return StoppingTime { time: i as f64 * dt, index: i, reason: StopReason::Level };
        }
        sup = sup.max(holder_sup(i));
        for j in 0..i.saturating_sub(HOLDER_MIN_LAG - 1) {
            semi = semi.max(dist(i, j) / ((i - j) as f64 * dt).powf(theta));
        }
        if semi + sup >= holder_cap {
            return StoppingTime { time: i as f64 * dt, index: i, reason: StopReason::Holder };
        }
    }
    StoppingTime { time: big_l, index: last, reason: StopReason::Cap }
}

/// T_L: the first sample time at which a threshold is reached, capped at L.
///
/// Additive: ‖z(t)‖_{H^{(5+σ)/2}} ≥ L^{1/4}/C_S or
/// ‖z‖_{C^{2/5−2δ}_t H^{(3+σ)/2}} ≥ L^{1/2}/C_S.
/// Multiplicative: |B(t)| ≥ L^{1/4} or ‖B‖_{C^{1/2−2δ}_t} ≥ L^{1/2}.
/// The path must cover [0, L].
pub fn stopping_time(path: &StopPath<'_>, big_l: f64, delta: f64) -> Result<StoppingTime> {
    if !(big_l > 0.0) {
        return Err(Error::InvalidArgument(format!("L = {big_l} must be positive")));
    }
    let (len, dt) = match path {
        StopPath::Additive { z, .. } => (z.len(), z.dt),
        StopPath::Multiplicative(b) => (b.values.len(), b.dt),
    };
    if len == 0 || ((len - 1) as f64 * dt) < big_l * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "path covers [0, {}] but the stopping time needs [0, {big_l}]",
            len.saturating_sub(1) as f64 * dt
        )));
    }
    Ok(match path {
        StopPath::Additive { z, sigma, c_s } => {
            let w_hi = z.modes.weights((5.0 + sigma) / 2.0);
            let w_lo = z.modes.weights((3.0 + sigma) / 2.0);
            let theta = 2.0 / 5.0 - 2.0 * delta;
            check_theta(theta)?;
            first_crossing(
                len,
                dt,
                big_l,
                theta,
                |i| z.modes.weighted_norm(&w_hi, &z.z[i]),
                big_l.powf(0.25) / c_s,
                |i| z.modes.weighted_norm(&w_lo, &z.z[i]),
                |i, j| z.modes.weighted_distance(&w_lo, &z.z[i], &z.z[j]),
                big_l.sqrt() / c_s,
            )
        }
        StopPath::Multiplicative(b) => {
            let theta = 0.5 - 2.0 * delta;
            check_theta(theta)?;
            let v = &b.values;
            first_crossing(
                len,
                dt,
                big_l,
                theta,
                |i| v[i].abs(),
                big_l.powf(0.25),
                |i| v[i].abs(),
                |i, j| (v[i] - v[j]).abs(),
                big_l.sqrt(),
            )
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{ou_convolve, AdditivePath, ModeSet};
    use proptest::prelude::*;

    #[test]
    fn linear_path_half_exponent() {
        let t_end = 2.0;
        let n = 200;
        let dt = t_end / n as f64;
        let v: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let h = holder_norm_scalar(&v, dt, 0.5).unwrap();
        assert!((h.seminorm - t_end.sqrt()).abs() < 1e-12);
        assert!((h.sup - t_end).abs() < 1e-12);
    }

    #[test]
    fn constant_path_has_zero_seminorm() {
        let h = holder_norm_scalar(&[3.0; 50], 0.1, 0.3).unwrap();
        assert_eq!(h.seminorm, 0.0);
        assert_eq!(h.total, 3.0);
    }

    #[test]
    fn exponent_outside_unit_interval_is_rejected() {
        assert!(holder_norm_scalar(&[0.0, 1.0, 2.0], 0.1, 1.0).is_err());
        assert!(holder_norm_scalar(&[0.0, 1.0, 2.0], 0.1, 0.0).is_err());
    }

    #[test]
    fn zero_paths_stop_at_l_in_both_modes() {
        let big_l = 3.0;
        let b = ScalarPath { dt: 0.01, values: vec![0.0; 301] };
        let t = stopping_time(&StopPath::Multiplicative(&b), big_l, 1.0 / 24.0).unwrap();
        assert_eq!(t.time, big_l);
        assert_eq!(t.reason, StopReason::Cap);
        let modes = ModeSet::new(8, 4.0).unwrap();
        let z = ou_convolve(&AdditivePath::zero(modes, 0.1, 30), 1.0);
        let t = stopping_time(&StopPath::Additive { z: &z, sigma: 0.1, c_s: 1.0 }, big_l, 1.0 / 60.0).unwrap();
        assert_eq!(t.time, big_l);
    }

    #[test]
    fn short_path_is_rejected() {
        let b = ScalarPath { dt: 0.01, values: vec![0.0; 100] };
        assert!(stopping_time(&StopPath::Multiplicative(&b), 2.0, 0.04).is_err());
    }

    #[test]
    fn ramp_crosses_within_one_step() {
        // B(t) = t with L = 16: |B| ≥ 2 at t* = 2; the Hölder norm at t*
        // is 2^{7/12} + 2 < 4.
        let dt = 0.013;
        let n = (16.0 / dt) as usize + 2;
        let b = ScalarPath { dt, values: (0..n).map(|i| i as f64 * dt).collect() };
        let t = stopping_time(&StopPath::Multiplicative(&b), 16.0, 1.0 / 24.0).unwrap();
        assert_eq!(t.reason, StopReason::Level);
        assert!(t.time >= 2.0 && t.time < 2.0 + dt);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn stopping_time_is_monotone_in_l(seed in 0u64..1000, l1 in 0.5f64..4.0, dl in 0.0f64..3.0) {
            let cfg = crate::noise::NoiseConfig { seed, dt: 0.01, t_end: 8.0, ..crate::noise::NoiseConfig::multiplicative() };
            let crate::noise::NoisePath::Multiplicative(b) = crate::noise::sample_wiener(&cfg).unwrap() else { unreachable!() };
            let a = stopping_time(&StopPath::Multiplicative(&b), l1, 1.0 / 24.0).unwrap();
            let c = stopping_time(&StopPath::Multiplicative(&b), l1 + dl, 1.0 / 24.0).unwrap();
            prop_assert!(c.time >= a.time);
        }
    }
}
