//! Driving noise and the stochastic convolution.
//!
//! Additive noise is a GG*-Wiener process with GG* diagonal in the Fourier
//! basis, eigenvalue g_k² = |k|^{−2s₀} on each of the two divergence-free
//! directions of mode k. Every retained mode is stored once (the half space
//! of wavevectors whose first nonzero component is positive); the partner
//! −k is its complex conjugate. Coordinates are taken in an orthonormal
//! basis (e₁(k), e₂(k)) of k^⊥, so every sampled field is divergence-free
//! by construction and the Leray projection is the identity on it.
//!
//! The stochastic convolution z solves dz + (−Δ)^m z dt = dB with z(0) = 0
//! and is advanced by the exact Ornstein–Uhlenbeck update. The pair
//! (ΔB, Δz) over one step is jointly Gaussian; it is sampled from two
//! independent normals per coordinate: the Wiener increment itself and an
//! innovation that carries the part of the OU increment not explained by
//! ΔB. The innovation does not depend on m, so one sampled Wiener path
//! yields z for any m with the correct joint law.
//!
//! Multiplicative noise is a scalar Brownian motion.

pub mod holder;
pub mod regularity;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ledger::NoiseMode;
use crate::spectral::{FourierField3, Grid3};

pub use holder::{holder_norm_scalar, holder_norm_with, stopping_time, HolderNorm, StopPath, StopReason, StoppingTime, HOLDER_MIN_LAG};
pub use regularity::{
    holder_refinement, regularity_report, upsilon, upsilon_check, upsilon_mollified, HolderRefinement, Moment, RegularityReport,
    TruncationMoments, UpsilonCheck,
};

/// Parameters of the noise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseConfig {
    /// Additive or multiplicative.
    pub mode: NoiseMode,
    /// Spectral decay: g_k² = |k|^{−2s₀} (additive).
    pub s0: f64,
    /// Regularity index σ > 0.
    pub sigma: f64,
    /// Fractional order m.
    pub m: f64,
    /// Time step.
    pub dt: f64,
    /// Final time.
    pub t_end: f64,
    /// Seed.
    pub seed: u64,
    /// Spectral truncation: modes with max|k_i| < n/2 (additive).
    pub n: usize,
    /// Constant C_S in the additive stopping thresholds.
    pub c_s: f64,
    /// Hölder margin δ.
    pub delta: f64,
}

impl NoiseConfig {
    /// Additive defaults: s₀ = 4, σ = 1/10, m = 1, dt = 1/32, T = 1,
    /// n = 16, C_S = 1, δ = 1/60.
    pub fn additive() -> Self {
        NoiseConfig {
            mode: NoiseMode::Additive,
            s0: 4.0,
            sigma: 0.1,
            m: 1.0,
            dt: 1.0 / 32.0,
            t_end: 1.0,
            seed: 0,
            n: 16,
            c_s: 1.0,
            delta: 1.0 / 60.0,
        }
    }

    /// Multiplicative defaults: dt = 1/256, T = 1, δ = 1/24.
    pub fn multiplicative() -> Self {
        NoiseConfig {
            mode: NoiseMode::Multiplicative,
            dt: 1.0 / 256.0,
            delta: 1.0 / 24.0,
            ..Self::additive()
        }
    }

    /// Reject non-positive steps, horizons shorter than one step and
    /// out-of-range exponents.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end >= self.dt * (1.0 - 1e-12)) {
            return bad(format!("T = {} must be at least dt = {}", self.t_end, self.dt));
        }
        if !(self.sigma > 0.0) {
            return bad(format!("sigma = {} must be positive", self.sigma));
        }
        if !(self.m > 0.0) {
            return bad(format!("m = {} must be positive", self.m));
        }
        if !(self.c_s > 0.0) {
            return bad(format!("C_S = {} must be positive", self.c_s));
        }
        if !(self.delta > 0.0 && self.delta < 0.2) {
            return bad(format!("delta = {} outside (0, 1/5)", self.delta));
        }
        if self.mode == NoiseMode::Additive {
            Grid3::new(self.n)?;
        }
        Ok(())
    }

    /// Number of steps: samples are t_i = i·dt for i = 0..=steps.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
    }

    /// Tr((−Δ)^{5/2−m+2σ}GG*) < ∞ on the full lattice: s₀ > 4 − m + 2σ.
    pub fn trace_hypothesis(&self) -> bool {
        self.s0 > 4.0 - self.m + 2.0 * self.sigma
    }

    /// The stronger hypothesis Tr((−Δ)^{3/2+2σ}GG*) < ∞: s₀ > 3 + 2σ.
    pub fn strong_trace_hypothesis(&self) -> bool {
        self.s0 > 3.0 + 2.0 * self.sigma
    }
}

/// One retained Fourier mode and its divergence-free frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeInfo {
    /// Flat grid index of k.
    pub idx: usize,
    /// Flat grid index of −k.
    pub idx_neg: usize,
    /// Integer wavevector.
    pub k: [i64; 3],
    /// |k|².
    pub k2: f64,
    /// g_k = |k|^{−s₀}.
    pub g: f64,
    /// Orthonormal basis of k^⊥.
    pub frame: [[f64; 3]; 2],
}

/// The half set of retained modes of a truncation.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSet {
    /// Grid the modes live on.
    pub grid: Grid3,
    /// Modes with first nonzero component positive and max|k_i| < n/2.
    pub modes: Vec<ModeInfo>,
}

fn frame_of(k: [i64; 3]) -> [[f64; 3]; 2] {
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    let nk = (kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2]).sqrt();
    let kh = [kf[0] / nk, kf[1] / nk, kf[2] / nk];
    // Axis least aligned with k.
    let ax = (0..3).min_by(|&a, &b| kh[a].abs().total_cmp(&kh[b].abs())).expect("three axes");
    let mut e = [0.0; 3];
    e[ax] = 1.0;
    let cross = |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let c = cross(kh, e);
    let nc = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let e1 = [c[0] / nc, c[1] / nc, c[2] / nc];
    let e2 = cross(kh, e1);
    [e1, e2]
}

impl ModeSet {
    /// Retained modes of the grid of size n with decay s₀.
    pub fn new(n: usize, s0: f64) -> Result<Self> {
        let grid = Grid3::new(n)?;
        let h = (n / 2) as i64;
        let mut modes = Vec::new();
        for idx in 0..grid.len() {
            let k = grid.wavevector(idx);
            if k.iter().any(|c| c.abs() >= h) {
                continue;
            }
            let first = k.iter().copied().find(|&c| c != 0);
            if !matches!(first, Some(c) if c > 0) {
                continue;
            }
            let wrap = |c: i64| if c < 0 { (c + n as i64) as usize } else { c as usize };
            let idx_neg = grid.index(wrap(-k[0]), wrap(-k[1]), wrap(-k[2]));
            let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
            modes.push(ModeInfo { idx, idx_neg, k, k2, g: k2.powf(-0.5 * s0), frame: frame_of(k) });
        }
        Ok(ModeSet { grid, modes })
    }

    /// Number of retained (half-set) modes.
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    /// Whether no mode is retained.
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Assemble a Hermitian, divergence-free field from frame coordinates.
    pub fn field(&self, coords: &[[Complex64; 2]]) -> FourierField3 {
        let mut f = FourierField3::zeros(self.grid);
        for (mi, c) in self.modes.iter().zip(coords) {
            for d in 0..3 {
                let v = c[0] * mi.frame[0][d] + c[1] * mi.frame[1][d];
                f.comp_mut(d)[mi.idx] = v;
                f.comp_mut(d)[mi.idx_neg] = v.conj();
            }
        }
        f
    }

    /// ‖f‖_{H^s} = ((2π)³ Σ_k (1+|k|²)^s |f̂_k|²)^{1/2} over both k and −k.
    pub fn hs_norm(&self, coords: &[[Complex64; 2]], s: f64) -> f64 {
        let w = self.weights(s);
        self.weighted_norm(&w, coords)
    }

    /// Per-mode weights 2(2π)³(1+|k|²)^s of the squared H^s norm.
    pub fn weights(&self, s: f64) -> Vec<f64> {
        let c = 2.0 * (2.0 * PI).powi(3);
        self.modes.iter().map(|m| c * (1.0 + m.k2).powf(s)).collect()
    }

    /// Norm with precomputed weights.
    pub fn weighted_norm(&self, w: &[f64], coords: &[[Complex64; 2]]) -> f64 {
        w.iter().zip(coords).map(|(w, c)| w * (c[0].norm_sqr() + c[1].norm_sqr())).sum::<f64>().sqrt()
    }

    /// Weighted distance of two coordinate vectors.
    pub fn weighted_distance(&self, w: &[f64], a: &[[Complex64; 2]], b: &[[Complex64; 2]]) -> f64 {
        w.iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * ((x[0] - y[0]).norm_sqr() + (x[1] - y[1]).norm_sqr()))
            .sum::<f64>()
            .sqrt()
    }
}

/// Standard complex normal: E|ξ|² = 1.
pub fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// RNG of Monte-Carlo sample `stream` under `seed`.
pub fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Coefficients of the exact joint (ΔB, Δz) step for one mode with unit g.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuStep {
    /// e^{−λ dt}.
    pub decay: f64,
    /// Var ΔB = dt.
    pub var_b: f64,
    /// Var of the noise part of Δz: (1 − e^{−2λdt})/(2λ).
    pub var_z: f64,
    /// Cov(ΔB, noise part of Δz): (1 − e^{−λdt})/λ.
    pub cov: f64,
    /// Regression coefficient cov/var_b.
    pub slope: f64,
    /// Innovation standard deviation (var_z − cov²/var_b)^{1/2}.
    pub innovation: f64,
}

impl OuStep {
    /// Step coefficients for rate λ = |k|^{2m} and step dt.
    pub fn new(lambda: f64, dt: f64) -> Self {
        let x = lambda * dt;
        let decay = (-x).exp();
        let var_z = -(-2.0 * x).exp_m1() / (2.0 * lambda);
        let cov = -(-x).exp_m1() / lambda;
        let slope = cov / dt;
        let innovation = (var_z - cov * cov / dt).max(0.0).sqrt();
        OuStep { decay, var_b: dt, var_z, cov, slope, innovation }
    }

    /// z ← e^{−λdt} z + slope·ΔB + g·innovation·η.
    #[inline]
    pub fn advance(&self, z: Complex64, db: Complex64, g_eta: Complex64) -> Complex64 {
        z * self.decay + db * self.slope + g_eta * self.innovation
    }
}

/// Sampled additive Wiener path in frame coordinates.
#[derive(Clone, Debug)]
pub struct AdditivePath {
    /// Retained modes.
    pub modes: ModeSet,
    /// Time step.
    pub dt: f64,
    /// B(t_i), i = 0..=steps.
    pub b: Vec<Vec<[Complex64; 2]>>,
    /// Innovations η_i (unit complex normals scaled by g_k), i = 1..=steps.
    pub innovations: Vec<Vec<[Complex64; 2]>>,
}

impl AdditivePath {
    /// Path identically zero.
    pub fn zero(modes: ModeSet, dt: f64, steps: usize) -> Self {
        let z = vec![[Complex64::new(0.0, 0.0); 2]; modes.len()];
        AdditivePath { dt, b: vec![z.clone(); steps + 1], innovations: vec![z; steps], modes }
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.b.len()
    }

    /// Whether the path has no samples.
    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// B(t_i) as a field.
    pub fn field(&self, i: usize) -> FourierField3 {
        self.modes.field(&self.b[i]).with_time(i as f64 * self.dt)
    }
}

/// Scalar path sampled on t_i = i·dt.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalarPath {
    /// Time step.
    pub dt: f64,
    /// Values.
    pub values: Vec<f64>,
}

impl ScalarPath {
    /// Time of sample i.
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Value at time t by sample lookup: 0 for t < 0, else the latest
    /// sample not after t.
    pub fn at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let i = ((t / self.dt) + 1e-9).floor() as usize;
        self.values[i.min(self.values.len() - 1)]
    }
}

/// A sampled Wiener path.
#[derive(Clone, Debug)]
pub enum NoisePath {
    /// Cylindrical GG*-Wiener process.
    Additive(AdditivePath),
    /// Real Brownian motion.
    Multiplicative(ScalarPath),
}

/// Sample the Wiener path of `cfg` with the RNG stream 0.
pub fn sample_wiener(cfg: &NoiseConfig) -> Result<NoisePath> {
    sample_wiener_stream(cfg, 0)
}

/// Sample the Wiener path of `cfg` with RNG stream `stream`.
pub fn sample_wiener_stream(cfg: &NoiseConfig, stream: u64) -> Result<NoisePath> {
    cfg.validate()?;
    let mut rng = sample_rng(cfg.seed, stream);
    let steps = cfg.steps();
    let sd = cfg.dt.sqrt();
    Ok(match cfg.mode {
        NoiseMode::Multiplicative => {
            let mut values = Vec::with_capacity(steps + 1);
            let mut b = 0.0;
            values.push(b);
            for _ in 0..steps {
                let x: f64 = rng.sample(StandardNormal);
                b += sd * x;
                values.push(b);
            }
            NoisePath::Multiplicative(ScalarPath { dt: cfg.dt, values })
        }
        NoiseMode::Additive => {
            let modes = ModeSet::new(cfg.n, cfg.s0)?;
            let nm = modes.len();
            let mut b = Vec::with_capacity(steps + 1);
            let mut innovations = Vec::with_capacity(steps);
            let mut cur = vec![[Complex64::new(0.0, 0.0); 2]; nm];
            b.push(cur.clone());
            for _ in 0..steps {
                let mut eta = Vec::with_capacity(nm);
                for (mi, c) in modes.modes.iter().zip(cur.iter_mut()) {
                    let mut e = [Complex64::new(0.0, 0.0); 2];
                    for d in 0..2 {
                        c[d] += complex_normal(&mut rng) * (mi.g * sd);
                        e[d] = complex_normal(&mut rng) * mi.g;
                    }
                    eta.push(e);
                }
                b.push(cur.clone());
                innovations.push(eta);
            }
            NoisePath::Additive(AdditivePath { modes, dt: cfg.dt, b, innovations })
        }
    })
}

/// Stochastic convolution in frame coordinates.
#[derive(Clone, Debug)]
pub struct OuPath {
    /// Retained modes.
    pub modes: ModeSet,
    /// Time step.
    pub dt: f64,
    /// Fractional order used.
    pub m: f64,
    /// z(t_i), i = 0..=steps.
    pub z: Vec<Vec<[Complex64; 2]>>,
}

impl OuPath {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.z.len()
    }

    /// Whether the path has no samples.
    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// z(t_i) as a field.
    pub fn field(&self, i: usize) -> FourierField3 {
        self.modes.field(&self.z[i]).with_time(i as f64 * self.dt)
    }

    /// z at time t: zero for t ≤ 0, exact sample on the grid.
    pub fn field_at(&self, t: f64) -> Result<FourierField3> {
        if t <= 0.0 {
            return Ok(FourierField3::zeros(self.modes.grid).with_time(t));
        }
        let x = t / self.dt;
        let i = x.round();
        if (x - i).abs() > 1e-9 || i as usize >= self.len() {
            return Err(Error::InvalidArgument(format!("t = {t} is not a sample time of the noise path")));
        }
        Ok(self.field(i as usize))
    }
}

/// Exact OU update driven by the Wiener path (z(0) = 0).
pub fn ou_convolve(path: &AdditivePath, m: f64) -> OuPath {
    let modes = path.modes.clone();
    let steps: Vec<OuStep> = modes.modes.iter().map(|mi| OuStep::new(mi.k2.powf(m), path.dt)).collect();
    let mut z = Vec::with_capacity(path.len());
    let mut cur = vec![[Complex64::new(0.0, 0.0); 2]; modes.len()];
    z.push(cur.clone());
    for i in 1..path.len() {
        for (j, c) in cur.iter_mut().enumerate() {
            for d in 0..2 {
                let db = path.b[i][j][d] - path.b[i - 1][j][d];
                c[d] = steps[j].advance(c[d], db, path.innovations[i - 1][j][d]);
            }
        }
        z.push(cur.clone());
    }
    OuPath { modes, dt: path.dt, m, z }
}

/// Monte-Carlo moments of a single probe mode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeMoments {
    /// Probe wavevector.
    pub k: [i64; 3],
    /// Samples.
    pub samples: usize,
    /// Time horizon.
    pub t_end: f64,
    /// Time step.
    pub dt: f64,
    /// Mean of |β_k(T)|² for one frame coordinate of B.
    pub var_b: f64,
    /// Its standard error.
    pub var_b_se: f64,
    /// Prediction T·|k|^{−2s₀}.
    pub var_b_predicted: f64,
    /// Mean of |z_k(T)|² for one frame coordinate.
    pub var_z: f64,
    /// Its standard error.
    pub var_z_se: f64,
    /// Exact finite-T variance g²(1 − e^{−2λT})/(2λ).
    pub var_z_predicted: f64,
    /// Stationary variance g²/(2λ).
    pub var_z_stationary: f64,
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Simulate one coordinate of the probe mode k over [0, T] with the same
/// joint exact update as [`ou_convolve`], `samples` times.
pub fn probe_mode(cfg: &NoiseConfig, k: [i64; 3], samples: usize) -> Result<ProbeMoments> {
    cfg.validate()?;
    let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
    if k2 == 0.0 || samples < 2 {
        return Err(Error::InvalidArgument("probe needs k ≠ 0 and at least two samples".into()));
    }
    let g = k2.powf(-0.5 * cfg.s0);
    let lambda = k2.powf(cfg.m);
    let steps = cfg.steps();
    let t_end = steps as f64 * cfg.dt;
    let st = OuStep::new(lambda, cfg.dt);
    let sd = cfg.dt.sqrt();
    let mut rng = sample_rng(cfg.seed, 0);
    let mut bs = Vec::with_capacity(samples);
    let mut zs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let (mut b, mut z) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for _ in 0..steps {
            let db = complex_normal(&mut rng) * (g * sd);
            let eta = complex_normal(&mut rng) * g;
            b += db;
            z = st.advance(z, db, eta);
        }
        bs.push(b.norm_sqr());
        zs.push(z.norm_sqr());
    }
    let (var_b, var_b_se) = mean_se(&bs);
    let (var_z, var_z_se) = mean_se(&zs);
    Ok(ProbeMoments {
        k,
        samples,
        t_end,
        dt: cfg.dt,
        var_b,
        var_b_se,
        var_b_predicted: t_end * g * g,
        var_z,
        var_z_se,
        var_z_predicted: g * g * -(-2.0 * lambda * t_end).exp_m1() / (2.0 * lambda),
        var_z_stationary: g * g / (2.0 * lambda),
    })
}

/// Euler–Maruyama reference for one probe coordinate: mean |z(T)|² and its
/// standard error with step dt/`substeps`.
pub fn probe_mode_euler(cfg: &NoiseConfig, k: [i64; 3], samples: usize, substeps: usize) -> Result<(f64, f64)> {
    cfg.validate()?;
    let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
    let g = k2.powf(-0.5 * cfg.s0);
    let lambda = k2.powf(cfg.m);
    let h = cfg.dt / substeps.max(1) as f64;
    let n = cfg.steps() * substeps.max(1);
    let sd = h.sqrt();
    let mut rng = sample_rng(cfg.seed ^ 0x45_4d, 0);
    let mut zs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut z = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            z += -lambda * h * z + complex_normal(&mut rng) * (g * sd);
        }
        zs.push(z.norm_sqr());
    }
    Ok(mean_se(&zs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ops::divergence;
    use crate::spectral::SpectralData;
    use crate::tolerances::{MC_SIGMA_WINDOW, SPECTRAL_EXACT};

    fn small() -> NoiseConfig {
        NoiseConfig { n: 8, dt: 0.05, t_end: 0.5, seed: 7, ..NoiseConfig::additive() }
    }

    #[test]
    fn frames_are_orthonormal_and_transverse() {
        let ms = ModeSet::new(12, 3.0).unwrap();
        for mi in &ms.modes {
            let k = [mi.k[0] as f64, mi.k[1] as f64, mi.k[2] as f64];
            let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            let [e1, e2] = mi.frame;
            assert!(dot(e1, k).abs() < 1e-13 && dot(e2, k).abs() < 1e-13);
            assert!((dot(e1, e1) - 1.0).abs() < 1e-14 && (dot(e2, e2) - 1.0).abs() < 1e-14);
            assert!(dot(e1, e2).abs() < 1e-14);
        }
        // Half of the (n−1)³ − 1 nonzero modes with |k_i| < n/2.
        assert_eq!(ms.len(), (11 * 11 * 11 - 1) / 2);
    }

    #[test]
    fn wiener_starts_at_zero_and_is_reproducible() {
        let cfg = small();
        let (NoisePath::Additive(a), NoisePath::Additive(b)) = (sample_wiener(&cfg).unwrap(), sample_wiener(&cfg).unwrap()) else {
            panic!("additive path expected");
        };
        assert!(a.b[0].iter().all(|c| c[0].norm() == 0.0 && c[1].norm() == 0.0));
        assert_eq!(a.b, b.b);
        assert_eq!(a.innovations, b.innovations);
        let m = NoiseConfig { seed: 3, ..NoiseConfig::multiplicative() };
        let (NoisePath::Multiplicative(x), NoisePath::Multiplicative(y)) = (sample_wiener(&m).unwrap(), sample_wiener(&m).unwrap()) else {
            panic!("scalar path expected");
        };
        assert_eq!(x.values[0], 0.0);
        assert_eq!(x, y);
    }

    #[test]
    fn z_starts_at_zero_and_stays_divergence_free() {
        let cfg = small();
        let NoisePath::Additive(p) = sample_wiener(&cfg).unwrap() else { unreachable!() };
        let z = ou_convolve(&p, cfg.m);
        assert_eq!(z.field(0), FourierField3::zeros(z.modes.grid).with_time(0.0));
        for i in 0..z.len() {
            let f = z.field(i);
            let d = divergence(&f);
            let scale = crate::spectral::ops::coeff_l2(&f).max(1e-300);
            assert!(crate::spectral::ops::coeff_l2(&d) / scale < SPECTRAL_EXACT);
            // Real field: imaginary part of the inverse transform vanishes.
            let phys = f.component(0).physical();
            assert!(phys.iter().all(|v| v.is_finite()));
            assert_eq!(f.grid().n(), 8);
        }
    }

    #[test]
    fn exact_step_covariances() {
        let s = OuStep::new(3.0, 0.1);
        // Joint law: Var(Δz) = slope²·dt + innovation².
        assert!((s.slope * s.slope * s.var_b + s.innovation * s.innovation - s.var_z).abs() < 1e-15);
        assert!((s.slope * s.var_b - s.cov).abs() < 1e-16);
        // λ → 0 limit: z increments equal B increments.
        let t = OuStep::new(1e-12, 0.1);
        assert!((t.slope - 1.0).abs() < 1e-9 && t.innovation < 1e-6);
    }

    #[test]
    fn probe_variances_match_predictions() {
        let cfg = NoiseConfig { s0: 1.0, m: 1.0, dt: 0.05, t_end: 1.0, ..NoiseConfig::additive() };
        let p = probe_mode(&cfg, [1, 0, 0], 4000).unwrap();
        assert!((p.var_b - p.var_b_predicted).abs() <= MC_SIGMA_WINDOW * p.var_b_se);
        assert!((p.var_z - p.var_z_predicted).abs() <= MC_SIGMA_WINDOW * p.var_z_se);
    }

    #[test]
    fn exact_update_matches_fine_euler_reference() {
        let cfg = NoiseConfig { s0: 1.0, m: 1.0, dt: 0.1, t_end: 0.5, seed: 11, ..NoiseConfig::additive() };
        let k = [1, 1, 0];
        let exact = probe_mode(&cfg, k, 4000).unwrap();
        let (em, em_se) = probe_mode_euler(&cfg, k, 4000, 64).unwrap();
        let se = (exact.var_z_se.powi(2) + em_se.powi(2)).sqrt();
        assert!((exact.var_z - em).abs() <= MC_SIGMA_WINDOW * se, "{} vs {em} ± {se}", exact.var_z);
    }

    #[test]
    fn halving_dt_keeps_second_moments() {
        let cfg = NoiseConfig { s0: 1.0, m: 1.0, dt: 0.1, t_end: 0.6, seed: 5, ..NoiseConfig::additive() };
        let a = probe_mode(&cfg, [2, 1, 0], 4000).unwrap();
        let b = probe_mode(&NoiseConfig { dt: 0.05, seed: 6, ..cfg }, [2, 1, 0], 4000).unwrap();
        let se = (a.var_z_se.powi(2) + b.var_z_se.powi(2)).sqrt();
        assert!((a.var_z - b.var_z).abs() <= MC_SIGMA_WINDOW * se);
        assert!((a.var_z_predicted - b.var_z_predicted).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(NoiseConfig { dt: 0.0, ..NoiseConfig::additive() }.validate().is_err());
        assert!(NoiseConfig { t_end: 0.01, dt: 0.1, ..NoiseConfig::additive() }.validate().is_err());
        assert!(NoiseConfig { n: 7, ..NoiseConfig::additive() }.validate().is_err());
        assert!(NoiseConfig::additive().trace_hypothesis());
        assert!(!NoiseConfig { s0: 2.0, ..NoiseConfig::additive() }.trace_hypothesis());
    }
}
