//! Norms of jet fields against their scaling predictions, exponent fits
//! over parameter sweeps, and the stationary-phase product bound.
//!
//! Every norm is measured twice:
//!
//! - in cell coordinates (see [`super::cell`]), which is exact up to the
//!   fine one- and two-dimensional quadratures and works at any scale;
//! - on the physical grid by spectral differentiation and grid quadrature,
//!   which requires the grid to resolve the thinnest jet feature.
//!
//! Time derivatives use ∂_t = μ(ξ·∇), valid for every jet field.
//! ‖∇^N f‖ is the L^p norm of the Frobenius norm of the N-th derivative
//! tensor.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::cell::CellGrids;
use super::family::{JetFamily, JetPoint, JetScales};
use crate::error::{Error, Result};
use crate::geometry::DirectionSet;
use crate::spectral::grid;
use crate::spectral::Grid3;
use crate::tolerances::{SCALING_EXPONENT_REL, STATIONARY_PHASE_RATIO};

/// Largest N + M accepted.
pub const MAX_TOTAL_ORDER: usize = 3;

/// Jet quantities whose norms are estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum JetQuantity {
    /// ψ_(ξ).
    Psi,
    /// φ_(ξ).
    SmallPhi,
    /// Φ_(ξ).
    BigPhi,
    /// W_(ξ).
    W,
    /// W^(c)_(ξ).
    Wc,
    /// V_(ξ).
    V,
}

impl JetQuantity {
    /// All quantities.
    pub const ALL: [JetQuantity; 6] = [Self::Psi, Self::SmallPhi, Self::BigPhi, Self::W, Self::Wc, Self::V];

    /// Whether the quantity depends on time.
    pub fn time_dependent(self) -> bool {
        !matches!(self, Self::SmallPhi | Self::BigPhi)
    }

    /// Predicted size of ‖∇^N∂_t^M ·‖_{L^p} up to a profile constant.
    pub fn predicted(self, s: &JetScales, n: usize, m: usize, p: f64) -> f64 {
        let (rp, rq, l, mu) = (s.r_perp, s.r_par, s.lambda, s.mu);
        let time = (rp * l * mu / rq).powi(m as i32);
        let base = rp.powf(2.0 / p - 1.0) * rq.powf(1.0 / p - 0.5) * l.powi(n as i32) * time;
        match self {
            Self::Psi => rq.powf(1.0 / p - 0.5) * (rp * l / rq).powi(n as i32) * time,
            Self::SmallPhi | Self::BigPhi => rp.powf(2.0 / p - 1.0) * l.powi(n as i32),
            Self::W => base,
            Self::Wc => base * rp / rq,
            Self::V => base / (l * l),
        }
    }

    /// Predicted exponent of the given sweep axis.
    pub fn predicted_exponent(self, axis: SweepAxis, n: usize, m: usize, p: f64) -> f64 {
        let (n, m) = (n as f64, m as f64);
        let rq_common = 1.0 / p - 0.5;
        let rp_common = 2.0 / p - 1.0;
        match (self, axis) {
            (Self::Psi, SweepAxis::Lambda) => n + m,
            (Self::Psi, SweepAxis::RPerp) => n + m,
            (Self::Psi, SweepAxis::RPar) => rq_common - n - m,
            (Self::SmallPhi | Self::BigPhi, SweepAxis::Lambda) => n,
            (Self::SmallPhi | Self::BigPhi, SweepAxis::RPerp) => rp_common,
            (Self::SmallPhi | Self::BigPhi, SweepAxis::RPar) => 0.0,
            (Self::W, SweepAxis::Lambda) => n + m,
            (Self::W, SweepAxis::RPerp) => rp_common + m,
            (Self::W, SweepAxis::RPar) => rq_common - m,
            (Self::Wc, SweepAxis::Lambda) => n + m,
            (Self::Wc, SweepAxis::RPerp) => rp_common + m + 1.0,
            (Self::Wc, SweepAxis::RPar) => rq_common - m - 1.0,
            (Self::V, SweepAxis::Lambda) => n + m - 2.0,
            (Self::V, SweepAxis::RPerp) => rp_common + m,
            (Self::V, SweepAxis::RPar) => rq_common - m,
        }
    }
}

/// One row of a norm report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormEntry {
    /// Quantity.
    pub quantity: JetQuantity,
    /// Value in cell coordinates.
    pub cell: f64,
    /// Value on the physical grid, when requested.
    pub grid: Option<f64>,
    /// Predicted size (without constant).
    pub predicted: f64,
    /// cell / predicted: the profile-dependent implicit constant.
    pub constant: f64,
}

/// Output of [`estimate_jet_norms`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JetNormReport {
    /// Spatial derivative order N.
    pub n: usize,
    /// Time derivative order M.
    pub m: usize,
    /// Exponent p.
    pub p: f64,
    /// Physical grid size, when used.
    pub grid_n: Option<usize>,
    /// Entries (time-independent quantities are skipped when M > 0).
    pub entries: Vec<NormEntry>,
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// |∇^j g|²_F summed over the components of g, on the y-grid.
fn grad_sq_2d(cells: &CellGrids, comps: &[&[f64]], j: usize) -> Vec<f64> {
    let mut out = vec![0.0; cells.ny * cells.ny];
    for g in comps {
        for a in 0..=j {
            let d = if j == 0 { g.to_vec() } else { cells.dy_spec(g, [a, j - a]) };
            let w = factorial(j) / (factorial(a) * factorial(j - a));
            for (o, v) in out.iter_mut().zip(&d) {
                *o += w * v * v;
            }
        }
    }
    out
}

/// ∫_T ∫_box (Σ_i C(N,i) f_i(s)² G_{N−i}(y))^{p/2}, with `fs[i]` = F^{(i)}
/// and `gs[j]` = |∇^j g|²_F.
fn product_lp(cells: &CellGrids, fs: &[Vec<f64>], gs: &[Vec<f64>], n: usize, p: f64) -> f64 {
    let w: Vec<f64> = (0..=n).map(|i| binom(n, i)).collect();
    let measure = cells.ds() * cells.dy2();
    if p == 2.0 {
        let total: f64 = (0..=n)
            .map(|i| w[i] * fs[i].iter().map(|v| v * v).sum::<f64>() * gs[n - i].iter().sum::<f64>())
            .sum();
        return (total * measure).sqrt();
    }
    // Restrict the double loop to where the factors are not negligible.
    let s_idx: Vec<usize> = (0..cells.ns)
        .filter(|&k| fs.iter().any(|f| f[k] != 0.0 && f[k].abs() > 1e-300))
        .collect();
    let smax = fs.iter().flat_map(|f| f.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
    let gmax = gs.iter().flat_map(|g| g.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
    let s_idx: Vec<usize> = s_idx
        .into_iter()
        .filter(|&k| fs.iter().any(|f| f[k].abs() > 1e-15 * smax))
        .collect();
    let y_idx: Vec<usize> = (0..cells.ny * cells.ny)
        .filter(|&k| gs.iter().any(|g| g[k].abs() > 1e-30 * gmax))
        .collect();
    let total: f64 = s_idx
        .par_iter()
        .map(|&a| {
            let fa: Vec<f64> = (0..=n).map(|i| w[i] * fs[i][a] * fs[i][a]).collect();
            y_idx
                .iter()
                .map(|&b| {
                    let v: f64 = (0..=n).map(|i| fa[i] * gs[n - i][b]).sum();
                    v.powf(p / 2.0)
                })
                .sum::<f64>()
        })
        .sum();
    (total * measure).powf(1.0 / p)
}

fn validate_orders(n: usize, m: usize, p: f64) -> Result<()> {
    if n + m > MAX_TOTAL_ORDER {
        return Err(Error::InvalidArgument(format!(
            "N + M = {} exceeds {MAX_TOTAL_ORDER}",
            n + m
        )));
    }
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must be a finite number >= 1")));
    }
    Ok(())
}

/// Cell-coordinate value of ‖∇^N∂_t^M q‖_{L^p(T³)}.
fn cell_norm(family: &JetFamily, cells: &CellGrids, q: JetQuantity, n: usize, m: usize, p: f64) -> f64 {
    let k = family.kappa;
    let kmu = k * family.scales.mu;
    let pre = k.powi(n as i32) * kmu.powi(m as i32);
    let psi_d = |j: usize| if j == 0 { cells.psi.clone() } else { cells.ds_spec(&cells.psi, j) };
    match q {
        JetQuantity::Psi => {
            let d = psi_d(n + m);
            let int: f64 = d.iter().map(|v| v.abs().powf(p)).sum::<f64>() * cells.ds();
            pre * (int * (2.0 * PI).powi(2)).powf(1.0 / p)
        }
        JetQuantity::SmallPhi | JetQuantity::BigPhi => {
            let g = if q == JetQuantity::SmallPhi { &cells.phi } else { &cells.big_phi };
            let gs = grad_sq_2d(cells, &[g], n);
            let int: f64 = gs.iter().map(|v| v.powf(p / 2.0)).sum::<f64>() * cells.dy2();
            k.powi(n as i32) * (int * 2.0 * PI).powf(1.0 / p)
        }
        JetQuantity::W | JetQuantity::Wc | JetQuantity::V => {
            let (shift, factor, comps): (usize, f64, Vec<&[f64]>) = match q {
                JetQuantity::W => (0, 1.0, vec![&cells.phi]),
                JetQuantity::Wc => (
                    1,
                    family.scales.r_perp.powi(2),
                    vec![&cells.dbig_phi[0], &cells.dbig_phi[1]],
                ),
                _ => (0, family.potential_factor(), vec![&cells.big_phi]),
            };
            let fs: Vec<Vec<f64>> = (0..=n).map(|i| psi_d(m + shift + i)).collect();
            let gs: Vec<Vec<f64>> = (0..=n).map(|j| grad_sq_2d(cells, &comps, j)).collect();
            factor * pre * product_lp(cells, &fs, &gs, n, p)
        }
    }
}

/// Dense samples of a quantity for direction 0 at t = 0 on the grid.
fn grid_samples(family: &JetFamily, g: &Grid3, q: JetQuantity) -> Vec<Vec<f64>> {
    let n = g.n();
    let [xi, a, b] = *family.frame(0);
    let rp2 = family.scales.r_perp.powi(2);
    let c = family.potential_factor();
    let comps = match q {
        JetQuantity::Psi | JetQuantity::SmallPhi | JetQuantity::BigPhi => 1,
        _ => 3,
    };
    let pts: Vec<JetPoint> = (0..g.len()).into_par_iter().map(|i| family.point(0, 0.0, g.point(i))).collect();
    let mut out = vec![vec![0.0; n * n * n]; comps];
    for (i, pt) in pts.iter().enumerate() {
        match q {
            JetQuantity::Psi => out[0][i] = pt.psi,
            JetQuantity::SmallPhi => out[0][i] = pt.phi,
            JetQuantity::BigPhi => out[0][i] = pt.big_phi,
            JetQuantity::W => (0..3).for_each(|d| out[d][i] = xi[d] * pt.psi * pt.phi),
            JetQuantity::Wc => (0..3).for_each(|d| {
                out[d][i] = rp2 * pt.dpsi * (a[d] * pt.dbig_phi[0] + b[d] * pt.dbig_phi[1])
            }),
            JetQuantity::V => (0..3).for_each(|d| out[d][i] = c * xi[d] * pt.psi * pt.big_phi),
        }
    }
    out
}

fn multi_indices(j: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..=j {
        for b in 0..=(j - a) {
            out.push([a, b, j - a - b]);
        }
    }
    out
}

/// Physical-grid value of ‖∇^N∂_t^M q‖_{L^p(T³)}.
fn grid_norm(family: &JetFamily, g: &Grid3, q: JetQuantity, n: usize, m: usize, p: f64) -> f64 {
    let xi = family.frame(0)[0];
    let mu = family.scales.mu;
    let samples = grid_samples(family, g, q);
    let coeffs: Vec<Vec<Complex64>> = samples.iter().map(|s| grid::forward_real(s, g.n())).collect();
    let time_symbol = |idx: usize| -> Complex64 {
        let k = g.deriv_wavevector(idx);
        Complex64::new(0.0, mu * (k[0] * xi[0] + k[1] * xi[1] + k[2] * xi[2])).powi(m as i32)
    };
    if p == 2.0 {
        let mut total = 0.0;
        for c in &coeffs {
            for (idx, v) in c.iter().enumerate() {
                let k = g.deriv_wavevector(idx);
                let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                total += k2.powi(n as i32) * (v * time_symbol(idx)).norm_sqr();
            }
        }
        return (total * (2.0 * PI).powi(3)).sqrt();
    }
    let mut mag = vec![0.0; g.len()];
    for alpha in multi_indices(n) {
        let w = factorial(n) / alpha.iter().map(|&a| factorial(a)).product::<f64>();
        for c in &coeffs {
            let d: Vec<Complex64> = c
                .iter()
                .enumerate()
                .map(|(idx, v)| {
                    let k = g.deriv_wavevector(idx);
                    let mut s = time_symbol(idx);
                    for ax in 0..3 {
                        s *= Complex64::new(0.0, k[ax]).powi(alpha[ax] as i32);
                    }
                    v * s
                })
                .collect();
            let phys = grid::inverse_real(&d, g.n());
            for (o, v) in mag.iter_mut().zip(&phys) {
                *o += w * v * v;
            }
        }
    }
    (mag.iter().map(|v| v.powf(p / 2.0)).sum::<f64>() * g.cell_volume()).powf(1.0 / p)
}

/// Measure ‖∇^N∂_t^M ·‖_{L^p} of every jet quantity (direction ξ₀) in cell
/// coordinates and, if `grid` is given, on the physical grid.
pub fn estimate_jet_norms(family: &JetFamily, grid: Option<&Grid3>, n: usize, m: usize, p: f64) -> Result<JetNormReport> {
    validate_orders(n, m, p)?;
    if let Some(g) = grid {
        family.require_resolution(g, super::GRID_POINTS_PER_FEATURE, "jet norm estimation")?;
    }
    let cells = CellGrids::new(family);
    let mut entries = Vec::new();
    for q in JetQuantity::ALL {
        if m > 0 && !q.time_dependent() {
            continue;
        }
        let cell = cell_norm(family, &cells, q, n, m, p);
        let predicted = q.predicted(&family.scales, n, m, p);
        entries.push(NormEntry {
            quantity: q,
            cell,
            grid: grid.map(|g| grid_norm(family, g, q, n, m, p)),
            predicted,
            constant: cell / predicted,
        });
    }
    Ok(JetNormReport {
        n,
        m,
        p,
        grid_n: grid.map(|g| g.n()),
        entries,
    })
}

/// Parameter varied in a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SweepAxis {
    /// λ (with r_⊥ fixed; λr_⊥ must stay integral).
    Lambda,
    /// r_⊥ (with λ fixed).
    RPerp,
    /// r_∥.
    RPar,
}

/// Fitted exponent for one quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    /// Quantity.
    pub quantity: JetQuantity,
    /// Predicted exponent.
    pub predicted: f64,
    /// Least-squares slope of the cell-coordinate values.
    pub fitted_cell: f64,
    /// Least-squares slope of the grid values, when measured.
    pub fitted_grid: Option<f64>,
    /// |fitted − predicted| ≤ tolerance·max(|predicted|, 1) for every
    /// available fit.
    pub within_tolerance: bool,
}

/// Output of [`scaling_sweep`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    /// Axis varied.
    pub axis: SweepAxis,
    /// Parameter values.
    pub values: Vec<f64>,
    /// Norm reports at each value.
    pub reports: Vec<JetNormReport>,
    /// Fits.
    pub fits: Vec<ExponentFit>,
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Sweep one scale over `values` (other scales from `base`), measure the
/// norms and fit exponents. `grid_n`, when given, also measures on the
/// physical grid of that size at every point of the sweep.
#[allow(clippy::too_many_arguments)]
pub fn scaling_sweep(
    profiles: &super::CutoffProfiles,
    set: &DirectionSet,
    base: JetScales,
    axis: SweepAxis,
    values: &[f64],
    grid_n: Option<usize>,
    n: usize,
    m: usize,
    p: f64,
) -> Result<SweepReport> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument("a sweep needs at least two values".into()));
    }
    let grid = grid_n.map(Grid3::new).transpose()?;
    let mut reports = Vec::new();
    for &v in values {
        let mut s = base;
        match axis {
            SweepAxis::Lambda => s.lambda = v,
            SweepAxis::RPerp => s.r_perp = v,
            SweepAxis::RPar => s.r_par = v,
        }
        let fam = JetFamily::build(profiles.clone(), set, s, super::ShiftMode::Centered)?;
        reports.push(estimate_jet_norms(&fam, grid.as_ref(), n, m, p)?);
    }
    let mut fits = Vec::new();
    for (qi, e) in reports[0].entries.iter().enumerate() {
        let q = e.quantity;
        let cell: Vec<f64> = reports.iter().map(|r| r.entries[qi].cell).collect();
        let predicted = q.predicted_exponent(axis, n, m, p);
        let fitted_cell = loglog_slope(values, &cell);
        let fitted_grid = if grid.is_some() {
            let gv: Vec<f64> = reports.iter().map(|r| r.entries[qi].grid.expect("grid")).collect();
            Some(loglog_slope(values, &gv))
        } else {
            None
        };
        let tol = SCALING_EXPONENT_REL * predicted.abs().max(1.0);
        let within_tolerance = (fitted_cell - predicted).abs() <= tol
            && fitted_grid.map_or(true, |f| (f - predicted).abs() <= tol);
        fits.push(ExponentFit {
            quantity: q,
            predicted,
            fitted_cell,
            fitted_grid,
            within_tolerance,
        });
    }
    Ok(SweepReport {
        axis,
        values: values.to_vec(),
        reports,
        fits,
    })
}

// ─────────────────────────────────────────────────────────────────────
// Stationary phase
// ─────────────────────────────────────────────────────────────────────

/// Hypothesis of the stationary-phase product lemma, in logarithms:
/// 2π√3ζ/κ ≤ 1/3 and ζ⁴(2π√3ζ/κ)^N ≤ 1.
pub fn stationary_phase_hypothesis(ln_zeta: f64, ln_kappa: f64, n: usize) -> bool {
    let r = (2.0 * PI * 3f64.sqrt()).ln() + ln_zeta - ln_kappa;
    ln_zeta > 0.0 && r <= -(3f64.ln()) && 4.0 * ln_zeta + n as f64 * r <= 0.0
}

/// Hypothesis of the frequency-separated product lemma, in logarithms:
/// 1 ≤ ζ < κ and ζ^N ≤ κ^{N−2}.
pub fn separated_product_hypothesis(ln_zeta: f64, ln_kappa: f64, n: usize) -> bool {
    ln_zeta >= 0.0 && ln_zeta < ln_kappa && n as f64 * ln_zeta <= (n as f64 - 2.0) * ln_kappa
}

/// Slow factor f(x) = 1 + amp·cos(m·x).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlowMode {
    /// Integer wavevector m.
    pub m: [i64; 3],
    /// Amplitude.
    pub amp: f64,
}

/// Fast (T/κ)³-periodic factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FastPattern {
    /// cos(κx₁).
    Plane,
    /// cos(κx₁)cos(κx₂)cos(κx₃).
    Checker,
    /// exp(cos κx₁ + cos κx₂).
    Bump,
}

/// One measured pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductSample {
    /// Slow factor (None for f ≡ 1).
    pub slow: Option<SlowMode>,
    /// Fast pattern.
    pub fast: FastPattern,
    /// κ.
    pub kappa: i64,
    /// C_f = max_{j ≤ N+4} ‖D^j f‖/ζ^j.
    pub c_f: f64,
    /// ‖fg‖/(C_f‖g‖).
    pub ratio: f64,
    /// Hypothesis of the stationary-phase lemma at (ζ, κ, N).
    pub hypothesis: bool,
}

/// Output of [`check_stationary_phase_product`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationaryPhaseReport {
    /// ζ.
    pub zeta: f64,
    /// N.
    pub n: usize,
    /// p ∈ {1, 2}.
    pub p: f64,
    /// Grid size used.
    pub grid_n: usize,
    /// Samples.
    pub samples: Vec<ProductSample>,
    /// Largest ratio over samples.
    pub max_ratio: f64,
    /// Largest ratio over samples whose hypothesis holds.
    pub max_ratio_under_hypothesis: Option<f64>,
    /// Frequency-separated lemma hypothesis at the largest κ.
    pub separated_hypothesis: bool,
    /// Whether all hypothesis-satisfying ratios stay below the bound.
    pub bounded: bool,
}

fn slow_value(f: &Option<SlowMode>, x: [f64; 3]) -> f64 {
    match f {
        None => 1.0,
        Some(s) => 1.0 + s.amp * (s.m[0] as f64 * x[0] + s.m[1] as f64 * x[1] + s.m[2] as f64 * x[2]).cos(),
    }
}

fn fast_value(g: FastPattern, kappa: f64, x: [f64; 3]) -> f64 {
    match g {
        FastPattern::Plane => (kappa * x[0]).cos(),
        FastPattern::Checker => (kappa * x[0]).cos() * (kappa * x[1]).cos() * (kappa * x[2]).cos(),
        FastPattern::Bump => ((kappa * x[0]).cos() + (kappa * x[1]).cos()).exp(),
    }
}

/// Normalised L^p average (⨍|h|^p)^{1/p} on the grid; normalisation makes
/// f ≡ 1 have C_f = 1.
fn avg_lp(g: &Grid3, h: impl Fn([f64; 3]) -> f64 + Sync, p: f64) -> f64 {
    let s: f64 = (0..g.len()).into_par_iter().map(|i| h(g.point(i)).abs().powf(p)).sum();
    (s / g.len() as f64).powf(1.0 / p)
}

/// Measure ‖fg‖_{L^p}/(C_f‖g‖_{L^p}) over slow/fast test pairs.
pub fn check_stationary_phase_product(
    zeta: f64,
    kappas: &[i64],
    n: usize,
    p: f64,
    grid_n: usize,
) -> Result<StationaryPhaseReport> {
    if p != 1.0 && p != 2.0 {
        return Err(Error::InvalidArgument(format!("p = {p}; the lemma covers p in {{1, 2}}")));
    }
    if !(zeta.is_finite() && zeta > 1.0) {
        return Err(Error::InvalidArgument(format!("zeta = {zeta} must exceed 1")));
    }
    let g = Grid3::new(grid_n)?;
    if let Some(&k) = kappas.iter().find(|&&k| 2 * k + 2 >= grid_n as i64) {
        return Err(Error::Resolution {
            what: format!("fast mode kappa = {k}"),
            min_n: (2 * k + 4) as usize,
        });
    }
    let slows = [
        None,
        Some(SlowMode { m: [1, 0, 0], amp: 0.5 }),
        Some(SlowMode { m: [0, 1, 1], amp: 0.5 }),
        Some(SlowMode { m: [1, -1, 1], amp: 0.9 }),
    ];
    let fasts = [FastPattern::Plane, FastPattern::Checker, FastPattern::Bump];
    let mut samples = Vec::new();
    for &kappa in kappas {
        for slow in &slows {
            // ‖D^j f‖: D^j f = amp m^{⊗j} cos^{(j)}(m·x), Frobenius amp|m|^j|cos^{(j)}|.
            let mut c_f = avg_lp(&g, |x| slow_value(slow, x), p);
            if let Some(s) = slow {
                let mn = ((s.m[0] * s.m[0] + s.m[1] * s.m[1] + s.m[2] * s.m[2]) as f64).sqrt();
                for j in 1..=n + 4 {
                    let trig = avg_lp(
                        &g,
                        |x| {
                            let ph = s.m[0] as f64 * x[0] + s.m[1] as f64 * x[1] + s.m[2] as f64 * x[2];
                            if j % 2 == 0 { ph.cos() } else { ph.sin() }
                        },
                        p,
                    );
                    c_f = c_f.max(s.amp * mn.powi(j as i32) * trig / zeta.powi(j as i32));
                }
            }
            for &fast in &fasts {
                let k = kappa as f64;
                let fg = avg_lp(&g, |x| slow_value(slow, x) * fast_value(fast, k, x), p);
                let gn = avg_lp(&g, |x| fast_value(fast, k, x), p);
                samples.push(ProductSample {
                    slow: *slow,
                    fast,
                    kappa,
                    c_f,
                    ratio: fg / (c_f * gn),
                    hypothesis: stationary_phase_hypothesis(zeta.ln(), k.ln(), n),
                });
            }
        }
    }
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let under: Vec<f64> = samples.iter().filter(|s| s.hypothesis).map(|s| s.ratio).collect();
    let max_ratio_under_hypothesis = under.iter().copied().reduce(f64::max);
    let kmax = kappas.iter().copied().max().unwrap_or(1) as f64;
    Ok(StationaryPhaseReport {
        zeta,
        n,
        p,
        grid_n,
        separated_hypothesis: separated_product_hypothesis(zeta.ln(), kmax.ln(), n),
        bounded: max_ratio_under_hypothesis.map_or(true, |r| r <= STATIONARY_PHASE_RATIO),
        samples,
        max_ratio,
        max_ratio_under_hypothesis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{CutoffProfiles, ShiftMode};

    fn fam(s: JetScales) -> JetFamily {
        let set = DirectionSet::build().unwrap();
        JetFamily::build(CutoffProfiles::build(4).unwrap(), &set, s, ShiftMode::Centered).unwrap()
    }

    #[test]
    fn l2_normalisations() {
        let f = fam(JetScales { r_perp: 0.2, r_par: 0.5, lambda: 10.0, mu: 3.0 });
        let r = estimate_jet_norms(&f, None, 0, 0, 2.0).unwrap();
        let get = |q| r.entries.iter().find(|e| e.quantity == q).unwrap().cell;
        let w = get(JetQuantity::W);
        assert!((w - (2.0 * PI).powf(1.5)).abs() < 1e-8 * w, "{w}");
        // ‖ψ_(ξ)‖_{L²(T³)} = (2π)·‖ψ‖_{L²(ℝ)} = (2π)^{3/2}.
        let psi = get(JetQuantity::Psi);
        assert!((psi - (2.0 * PI).powf(1.5)).abs() < 1e-8 * psi);
    }

    #[test]
    fn grid_and_cell_agree_when_resolved() {
        let f = fam(JetScales { r_perp: 0.9, r_par: 0.95, lambda: 1.0 / 0.9, mu: 1.0 });
        let g = Grid3::new(96).unwrap();
        for (n, m, p) in [(1, 0, 2.0), (0, 1, 2.0), (1, 0, 1.5)] {
            let r = estimate_jet_norms(&f, Some(&g), n, m, p).unwrap();
            for e in &r.entries {
                let gv = e.grid.unwrap();
                assert!((gv - e.cell).abs() < 5e-2 * e.cell, "{n} {m} {p}: {e:?}");
            }
        }
    }

    #[test]
    fn orders_and_resolution_are_validated() {
        let f = fam(JetScales { r_perp: 0.1, r_par: 0.5, lambda: 10.0, mu: 1.0 });
        assert!(estimate_jet_norms(&f, None, 2, 2, 2.0).is_err());
        assert!(estimate_jet_norms(&f, None, 1, 0, 0.5).is_err());
        let g = Grid3::new(16).unwrap();
        assert!(matches!(
            estimate_jet_norms(&f, Some(&g), 1, 0, 2.0),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn lambda_exponent_of_gradient() {
        let set = DirectionSet::build().unwrap();
        let profiles = CutoffProfiles::build(4).unwrap();
        let base = JetScales { r_perp: 0.25, r_par: 0.5, lambda: 4.0, mu: 1.0 };
        let s = scaling_sweep(&profiles, &set, base, SweepAxis::Lambda, &[4.0, 8.0, 16.0], None, 1, 0, 2.0).unwrap();
        let w = s.fits.iter().find(|f| f.quantity == JetQuantity::W).unwrap();
        assert!((w.fitted_cell - 1.0).abs() < 1e-9, "{w:?}");
    }

    #[test]
    fn stationary_phase_trivial_and_bounded() {
        let r = check_stationary_phase_product(1.2, &[40, 48], 1, 2.0, 104).unwrap();
        for s in r.samples.iter().filter(|s| s.slow.is_none()) {
            assert!((s.ratio - 1.0).abs() < 1e-12, "{s:?}");
            assert_eq!(s.c_f, 1.0);
        }
        assert!(r.samples.iter().all(|s| s.hypothesis));
        assert!(r.bounded, "{r:?}");
    }

    #[test]
    fn hypotheses_in_log_space() {
        assert!(!stationary_phase_hypothesis(1.2f64.ln(), 8f64.ln(), 1));
        assert!(stationary_phase_hypothesis(1.2f64.ln(), 48f64.ln(), 1));
        assert!(separated_product_hypothesis(2f64.ln(), 100f64.ln(), 3));
        assert!(!separated_product_hypothesis(50f64.ln(), 100f64.ln(), 3));
    }
}
