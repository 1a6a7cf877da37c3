//! Rescaled, periodised and shifted jets W_(ξ), correctors W^(c)_(ξ) and
//! potentials V_(ξ).
//!
//! With κ = n_* r_⊥ λ and the frame (ξ, A_ξ, B_ξ = ξ×A_ξ), each jet is a
//! function of the cell coordinates
//!
//!   s = κ(x·ξ + μt),  y = κ((x − a_ξ)·A_ξ, (x − a_ξ)·B_ξ),
//!
//! reduced to [−π, π). The rescaled profiles are ψ_{r_∥}(s) = ψ(s/r_∥)/r_∥^{1/2},
//! Φ_{r_⊥}(y) = Φ(y/r_⊥)/r_⊥ and φ_{r_⊥}(y) = φ(y/r_⊥)/r_⊥, and
//!
//! - W_(ξ) = ξ ψ φ,
//! - V_(ξ) = ξ ψ Φ/(n_*²λ²),
//! - W^(c)_(ξ) = curl curl V_(ξ) − W_(ξ) = r_⊥² ψ′ (A ∂_{y₁}Φ + B ∂_{y₂}Φ).
//!
//! Because n_*ξ, n_*A, n_*B are integer vectors and λr_⊥ ∈ ℕ, every field
//! is (2π/(λr_⊥))-periodic in each axis. Time enters only through s, so
//! ∂_t = μ(ξ·∇) on every jet field and ∂_t is evaluated analytically.

use rayon::prelude::*;
use serde::Serialize;

use super::placement::{place, Placement};
use super::profiles::CutoffProfiles;
use crate::error::{Error, Result};
use crate::geometry::{Direction, DirectionSet};
use crate::spectral::Grid3;

/// Relative tolerance on λr_⊥ being an integer.
const CELL_COUNT_SLACK: f64 = 1e-9;

/// Free scales of a jet family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JetScales {
    /// Concentration r_⊥ across the jet.
    pub r_perp: f64,
    /// Concentration r_∥ along the jet.
    pub r_par: f64,
    /// Frequency λ.
    pub lambda: f64,
    /// Temporal oscillation μ.
    pub mu: f64,
}

impl JetScales {
    /// Validate r_⊥ < r_∥ < 1, μ > 0 and λr_⊥ ∈ ℕ; return λr_⊥.
    pub fn cells(&self) -> Result<i64> {
        let all_finite = [self.r_perp, self.r_par, self.lambda, self.mu]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !all_finite {
            return Err(Error::Scale(format!("scales must be finite and positive: {self:?}")));
        }
        if !(self.r_perp < self.r_par && self.r_par < 1.0) {
            return Err(Error::Scale(format!(
                "need r_perp < r_par < 1, got r_perp = {}, r_par = {}",
                self.r_perp, self.r_par
            )));
        }
        let c = self.lambda * self.r_perp;
        let k = c.round();
        if k < 1.0 || (c - k).abs() > CELL_COUNT_SLACK * c {
            return Err(Error::Scale(format!("lambda * r_perp = {c} is not a positive integer")));
        }
        Ok(k as i64)
    }
}

/// How the shifts a_ξ are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ShiftMode {
    /// Greedy placement with pairwise disjoint supports (required for
    /// families entering a perturbation).
    Disjoint,
    /// All shifts zero; supports may overlap. Used for per-direction
    /// studies where disjointness is irrelevant.
    Centered,
}

/// Values of the profile building blocks at one space-time point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct JetPoint {
    /// ψ_{r_∥}(s).
    pub psi: f64,
    /// dψ_{r_∥}/ds.
    pub dpsi: f64,
    /// Φ_{r_⊥}(y).
    pub big_phi: f64,
    /// ∇_y Φ_{r_⊥}(y).
    pub dbig_phi: [f64; 2],
    /// φ_{r_⊥}(y).
    pub phi: f64,
}

impl JetPoint {
    /// Whether the point lies outside the tube (all transverse profiles vanish).
    pub fn outside_tube(&self) -> bool {
        self.big_phi == 0.0 && self.phi == 0.0 && self.dbig_phi == [0.0, 0.0]
    }
}

/// Jet fields at one space-time point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct JetFields {
    /// Building blocks.
    pub point: JetPoint,
    /// W_(ξ).
    pub w: [f64; 3],
    /// W^(c)_(ξ).
    pub wc: [f64; 3],
    /// V_(ξ).
    pub v: [f64; 3],
    /// curl V_(ξ).
    pub curl_v: [f64; 3],
    /// ∂_t V_(ξ).
    pub dt_v: [f64; 3],
    /// ∂_t ψ_(ξ).
    pub dt_psi: f64,
}

/// Per-direction jet data with shifts and scales.
#[derive(Clone, Debug, Serialize)]
pub struct JetFamily {
    /// Profiles.
    pub profiles: CutoffProfiles,
    /// Directions with their frames.
    #[serde(skip)]
    pub directions: Vec<Direction>,
    /// n_*.
    pub n_star: i64,
    /// Scales.
    pub scales: JetScales,
    /// λr_⊥ ∈ ℕ.
    pub cells: i64,
    /// κ = n_* r_⊥ λ.
    pub kappa: f64,
    /// Shifts a_ξ.
    pub shifts: Vec<[f64; 3]>,
    /// Shift mode.
    pub mode: ShiftMode,
    /// Placement data when disjoint.
    pub placement: Option<Placement>,
    #[serde(skip)]
    frames: Vec<[[f64; 3]; 3]>,
}

fn wrap(v: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    v - two_pi * (v / two_pi).round()
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl JetFamily {
    /// Build a family.
    pub fn build(profiles: CutoffProfiles, set: &DirectionSet, scales: JetScales, mode: ShiftMode) -> Result<Self> {
        let cells = scales.cells()?;
        let kappa_int = set.n_star * cells;
        let kappa = kappa_int as f64;
        let (shifts, placement) = match mode {
            ShiftMode::Centered => (vec![[0.0; 3]; set.len()], None),
            ShiftMode::Disjoint => {
                let p = place(&set.directions, kappa_int, 1.0 / (set.n_star as f64 * scales.lambda))?;
                (p.shifts.clone(), Some(p))
            }
        };
        let frames = set
            .directions
            .iter()
            .map(|d| [d.xi_f64(), d.a_f64(), d.b_f64()])
            .collect();
        Ok(Self {
            profiles,
            directions: set.directions.clone(),
            n_star: set.n_star,
            scales,
            cells,
            kappa,
            shifts,
            mode,
            placement,
            frames,
        })
    }

    /// Number of directions.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Whether the family is empty.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frame (ξ, A, B) of direction k.
    pub fn frame(&self, k: usize) -> &[[f64; 3]; 3] {
        &self.frames[k]
    }

    /// Spatial period 2π/(λr_⊥) of every jet field.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.cells as f64
    }

    /// Physical tube radius 1/(n_*λ).
    pub fn tube_radius(&self) -> f64 {
        1.0 / (self.n_star as f64 * self.scales.lambda)
    }

    /// Physical half-length r_∥/κ of a jet pulse along ξ.
    pub fn pulse_half_length(&self) -> f64 {
        self.scales.r_par / self.kappa
    }

    /// 1/(n_*²λ²).
    pub fn potential_factor(&self) -> f64 {
        let nl = self.n_star as f64 * self.scales.lambda;
        1.0 / (nl * nl)
    }

    /// Cell coordinates (s, y₁, y₂) before reduction to [−π, π).
    pub fn cell_coordinates(&self, k: usize, t: f64, x: [f64; 3]) -> [f64; 3] {
        let [xi, a, b] = &self.frames[k];
        let sh = &self.shifts[k];
        let d = [x[0] - sh[0], x[1] - sh[1], x[2] - sh[2]];
        [
            self.kappa * (dot(&x, xi) + self.scales.mu * t),
            self.kappa * dot(&d, a),
            self.kappa * dot(&d, b),
        ]
    }

    /// Profiles evaluated at cell coordinates.
    pub fn point_at_cell(&self, z: [f64; 3]) -> JetPoint {
        let (rp, rq) = (self.scales.r_perp, self.scales.r_par);
        let s = wrap(z[0]) / rq;
        let y = [wrap(z[1]) / rp, wrap(z[2]) / rp];
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        let p = &self.profiles;
        let (big_phi, dbig_phi, phi) = if r >= 1.0 {
            (0.0, [0.0, 0.0], 0.0)
        } else {
            let dr = p.big_phi_dr(r);
            let g = if r > 0.0 {
                [dr * y[0] / r / (rp * rp), dr * y[1] / r / (rp * rp)]
            } else {
                [0.0, 0.0]
            };
            (p.big_phi(r) / rp, g, p.phi(r) / rp)
        };
        JetPoint {
            psi: p.psi(s) / rq.sqrt(),
            dpsi: p.psi_ds(s) / rq.powf(1.5),
            big_phi,
            dbig_phi,
            phi,
        }
    }

    /// Profiles at a space-time point.
    pub fn point(&self, k: usize, t: f64, x: [f64; 3]) -> JetPoint {
        self.point_at_cell(self.cell_coordinates(k, t, x))
    }

    /// All jet fields of direction k at (t, x).
    pub fn fields(&self, k: usize, t: f64, x: [f64; 3]) -> JetFields {
        let p = self.point(k, t, x);
        self.fields_from_point(k, p)
    }

    fn fields_from_point(&self, k: usize, p: JetPoint) -> JetFields {
        let [xi, a, b] = &self.frames[k];
        let rp2 = self.scales.r_perp * self.scales.r_perp;
        let c = self.potential_factor();
        let kmu = self.kappa * self.scales.mu;
        let mut out = JetFields {
            point: p,
            dt_psi: kmu * p.dpsi,
            ..Default::default()
        };
        for i in 0..3 {
            out.w[i] = xi[i] * p.psi * p.phi;
            out.wc[i] = rp2 * p.dpsi * (a[i] * p.dbig_phi[0] + b[i] * p.dbig_phi[1]);
            out.v[i] = c * xi[i] * p.psi * p.big_phi;
            out.curl_v[i] = c * self.kappa * p.psi * (a[i] * p.dbig_phi[1] - b[i] * p.dbig_phi[0]);
            out.dt_v[i] = c * xi[i] * kmu * p.dpsi * p.big_phi;
        }
        out
    }

    /// Fields of direction k at time t on the m³ grid x_j = 2πj/m, for the
    /// grid points inside the tube support only (all fields vanish elsewhere).
    pub fn support_samples(&self, k: usize, t: f64, m: usize) -> Vec<(usize, JetFields)> {
        let h = 2.0 * std::f64::consts::PI / m as f64;
        (0..m * m * m)
            .into_par_iter()
            .filter_map(|idx| {
                let x = [(idx / (m * m)) as f64 * h, ((idx / m) % m) as f64 * h, (idx % m) as f64 * h];
                let p = self.point(k, t, x);
                if p.outside_tube() {
                    None
                } else {
                    Some((idx, self.fields_from_point(k, p)))
                }
            })
            .collect()
    }

    /// Dense samples of one derived vector field of direction k on an m³ grid.
    pub fn dense_vector(&self, k: usize, t: f64, m: usize, pick: impl Fn(&JetFields) -> [f64; 3]) -> [Vec<f64>; 3] {
        let mut out = [vec![0.0; m * m * m], vec![0.0; m * m * m], vec![0.0; m * m * m]];
        for (idx, f) in self.support_samples(k, t, m) {
            let v = pick(&f);
            for c in 0..3 {
                out[c][idx] = v[c];
            }
        }
        out
    }

    /// Grid averages ⨍W_(ξ) and ⨍W_(ξ)⊗W_(ξ) on the m³ grid.
    pub fn grid_moments(&self, k: usize, t: f64, m: usize) -> ([f64; 3], [[f64; 3]; 3]) {
        let samples = self.support_samples(k, t, m);
        let n3 = (m * m * m) as f64;
        let mut mean = [0.0; 3];
        let mut second = [[0.0; 3]; 3];
        for (_, f) in &samples {
            for i in 0..3 {
                mean[i] += f.w[i];
                for j in 0..3 {
                    second[i][j] += f.w[i] * f.w[j];
                }
            }
        }
        for i in 0..3 {
            mean[i] /= n3;
            for j in 0..3 {
                second[i][j] /= n3;
            }
        }
        (mean, second)
    }

    /// Number of grid points (m³ grid) where Φ_(ξ)Φ_(ξ′) ≠ 0 for some ξ ≠ ξ′,
    /// listed per pair.
    pub fn grid_overlaps(&self, t: f64, m: usize) -> Vec<((usize, usize), usize)> {
        let supports: Vec<Vec<usize>> = (0..self.len())
            .map(|k| {
                self.support_samples(k, t, m)
                    .into_iter()
                    .filter(|(_, f)| f.point.big_phi != 0.0)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        let mut out = Vec::new();
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let set: std::collections::HashSet<usize> = supports[i].iter().copied().collect();
                let count = supports[j].iter().filter(|x| set.contains(x)).count();
                out.push(((i, j), count));
            }
        }
        out
    }

    /// Largest sup-difference of W_(ξ) under translation by one period along
    /// each axis, over `samples` deterministic points.
    pub fn periodicity_defect(&self, samples: usize) -> f64 {
        let per = self.period();
        let mut worst: f64 = 0.0;
        for i in 0..samples {
            // Low-discrepancy points in [0, 2π)³.
            let u = |q: f64| (i as f64 * q).fract() * 2.0 * std::f64::consts::PI;
            let x = [u(0.754_877_666), u(0.569_840_291), u(0.362_465_47)];
            let t = 0.01 * i as f64;
            for k in 0..self.len() {
                let base = self.fields(k, t, x);
                for ax in 0..3 {
                    let mut y = x;
                    y[ax] += per;
                    let f = self.fields(k, t, y);
                    for c in 0..3 {
                        worst = worst.max((f.w[c] - base.w[c]).abs());
                        worst = worst.max((f.wc[c] - base.wc[c]).abs());
                        worst = worst.max((f.v[c] - base.v[c]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Smallest grid size whose spacing resolves the jet's thinnest
    /// feature with `points` samples.
    pub fn min_resolving_n(&self, points: f64) -> usize {
        let feature = self.tube_radius().min(self.pulse_half_length());
        let n = (points * 2.0 * std::f64::consts::PI / feature).ceil() as usize;
        n + n % 2
    }

    /// Reject grids that do not resolve the jet.
    pub fn require_resolution(&self, grid: &Grid3, points: f64, what: &str) -> Result<()> {
        let min_n = self.min_resolving_n(points);
        if grid.n() < min_n {
            return Err(Error::Resolution {
                what: what.to_string(),
                min_n,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerances::JET_PERIODICITY;

    fn family(scales: JetScales, mode: ShiftMode) -> JetFamily {
        let set = DirectionSet::build().unwrap();
        JetFamily::build(CutoffProfiles::build(4).unwrap(), &set, scales, mode).unwrap()
    }

    #[test]
    fn scale_validation() {
        let ok = JetScales { r_perp: 0.25, r_par: 0.5, lambda: 8.0, mu: 3.0 };
        assert_eq!(ok.cells().unwrap(), 2);
        let bad = JetScales { lambda: 7.0, ..ok };
        assert!(matches!(bad.cells(), Err(Error::Scale(_))));
        let bad = JetScales { r_par: 0.2, ..ok };
        assert!(bad.cells().is_err());
        let bad = JetScales { mu: f64::NAN, ..ok };
        assert!(bad.cells().is_err());
    }

    #[test]
    fn fields_are_periodic() {
        let f = family(JetScales { r_perp: 1.0 / 6.0, r_par: 0.5, lambda: 12.0, mu: 5.0 }, ShiftMode::Disjoint);
        assert!(f.periodicity_defect(40) < JET_PERIODICITY);
    }

    #[test]
    fn disjoint_family_has_no_grid_overlaps() {
        let f = family(JetScales { r_perp: 1.0 / 6.0, r_par: 0.5, lambda: 6.0, mu: 5.0 }, ShiftMode::Disjoint);
        for (_, c) in f.grid_overlaps(0.3, 48) {
            assert_eq!(c, 0);
        }
    }

    #[test]
    fn centered_fat_family_overlaps() {
        let f = family(JetScales { r_perp: 0.9, r_par: 0.95, lambda: 1.0 / 0.9, mu: 1.0 }, ShiftMode::Centered);
        assert!(f.grid_overlaps(0.0, 16).iter().any(|(_, c)| *c > 0));
    }

    #[test]
    fn time_derivative_matches_difference_quotient() {
        let f = family(JetScales { r_perp: 0.25, r_par: 0.5, lambda: 4.0, mu: 2.0 }, ShiftMode::Centered);
        let h = 1e-6;
        let x = [0.3, 1.1, -0.4];
        for k in 0..f.len() {
            let d = f.fields(k, 0.0, x);
            let fd = (f.point(k, h, x).psi - f.point(k, -h, x).psi) / (2.0 * h);
            assert!((fd - d.dt_psi).abs() <= 1e-5 * d.dt_psi.abs().max(1.0));
        }
    }
}
