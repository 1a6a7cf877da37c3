//! Jet fields in cell coordinates.
//!
//! The map x ↦ z = (s, y₁, y₂) = κ(x·ξ + μt, (x−a)·A, (x−a)·B) is κ times an
//! orthogonal map followed by a translation; it pushes Lebesgue measure on
//! T³ to Lebesgue measure on T³ (κO is an integer matrix), and ∇_x = κOᵀ∇_z.
//! Every jet field is a sum of separable terms f(s)g(y) in the frame
//! (ξ, A, B), so derivative identities and L^p norms in x reduce exactly to
//! one-dimensional (s) and two-dimensional (y) computations, which are
//! resolved here by spectral differentiation on fine grids regardless of
//! how small the physical tubes are.
//!
//! Because ψ_{r_∥} is supported in |s| ≤ r_∥ and Φ_{r_⊥}, φ_{r_⊥} in
//! |y| ≤ r_⊥, the periodic boxes are shrunk to half-widths
//! min(π, 1.5 r): the functions are periodic on the smaller box and every
//! derivative and integral is unchanged.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::family::JetFamily;

/// Grid points per unit of the rescaled profile argument (s/r_∥).
const POINTS_PER_RADIUS_S: f64 = 256.0;
/// Grid points per unit of the rescaled profile argument (|y|/r_⊥).
const POINTS_PER_RADIUS_Y: f64 = 128.0;
/// Box half-width in units of the support radius.
const BOX_FACTOR: f64 = 1.5;

/// Periodic 1-D spectral derivative of the given order on a box of
/// half-width `l`; odd orders zero the Nyquist mode.
pub fn deriv_1d(vals: &[f64], l: f64, order: usize) -> Vec<f64> {
    let n = vals.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    apply_symbol(&mut buf, n, l, order);
    inv.process(&mut buf);
    buf.iter().map(|z| z.re / n as f64).collect()
}

fn wavenumber(i: usize, n: usize, l: f64) -> f64 {
    let k = if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
    k as f64 * std::f64::consts::PI / l
}

fn symbol(i: usize, n: usize, l: f64, order: usize) -> Complex64 {
    if order % 2 == 1 && i == n / 2 {
        return Complex64::new(0.0, 0.0);
    }
    let k = wavenumber(i, n, l);
    Complex64::new(0.0, k).powi(order as i32)
}

fn apply_symbol(buf: &mut [Complex64], n: usize, l: f64, order: usize) {
    for (i, z) in buf.iter_mut().enumerate() {
        *z *= symbol(i, n, l, order);
    }
}

fn fft_rows(buf: &mut [Complex64], n: usize, plan: &Arc<dyn Fft<f64>>) {
    for row in buf.chunks_mut(n) {
        plan.process(row);
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Periodic 2-D spectral derivative ∂_{y₁}^{o₀}∂_{y₂}^{o₁} on an n×n
/// row-major grid (index i·n + j ↔ (y₁_i, y₂_j)) of half-width `l`.
pub fn deriv_2d(vals: &[f64], n: usize, l: f64, order: [usize; 2]) -> Vec<f64> {
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_rows(&mut buf, n, &fwd);
    transpose(&mut buf, n);
    fft_rows(&mut buf, n, &fwd);
    // buf is now indexed [j][i] (transposed).
    for j in 0..n {
        let sj = symbol(j, n, l, order[1]);
        for i in 0..n {
            buf[j * n + i] *= sj * symbol(i, n, l, order[0]);
        }
    }
    fft_rows(&mut buf, n, &inv);
    transpose(&mut buf, n);
    fft_rows(&mut buf, n, &inv);
    let scale = (n * n) as f64;
    buf.iter().map(|z| z.re / scale).collect()
}

fn pow2_at_least(x: f64) -> usize {
    (x.ceil() as usize).next_power_of_two()
}

/// The profiles of one family sampled on fine cell grids.
#[derive(Clone, Debug)]
pub struct CellGrids {
    /// Points of the s-grid.
    pub ns: usize,
    /// Points per axis of the y-grid.
    pub ny: usize,
    /// Half-width of the s-box.
    pub ls: f64,
    /// Half-width of the y-box.
    pub ly: f64,
    /// ψ_{r_∥}(s).
    pub psi: Vec<f64>,
    /// Analytic dψ_{r_∥}/ds.
    pub dpsi: Vec<f64>,
    /// Φ_{r_⊥}(y).
    pub big_phi: Vec<f64>,
    /// Analytic ∇_yΦ_{r_⊥}.
    pub dbig_phi: [Vec<f64>; 2],
    /// Analytic φ_{r_⊥}(y).
    pub phi: Vec<f64>,
}

impl CellGrids {
    /// Sample the profiles of `family`.
    pub fn new(family: &JetFamily) -> Self {
        let pi = std::f64::consts::PI;
        let (rp, rq) = (family.scales.r_perp, family.scales.r_par);
        let ls = (BOX_FACTOR * rq).min(pi);
        let ly = (BOX_FACTOR * rp).min(pi);
        let ns = pow2_at_least(POINTS_PER_RADIUS_S * 2.0 * ls / rq);
        let ny = pow2_at_least(POINTS_PER_RADIUS_Y * 2.0 * ly / rp);
        let (ds, dy) = (2.0 * ls / ns as f64, 2.0 * ly / ny as f64);
        let mut psi = vec![0.0; ns];
        let mut dpsi = vec![0.0; ns];
        for i in 0..ns {
            let p = family.point_at_cell([-ls + i as f64 * ds, 2.0 * pi, 2.0 * pi]);
            psi[i] = p.psi;
            dpsi[i] = p.dpsi;
        }
        let mut big_phi = vec![0.0; ny * ny];
        let mut d0 = vec![0.0; ny * ny];
        let mut d1 = vec![0.0; ny * ny];
        let mut phi = vec![0.0; ny * ny];
        for i in 0..ny {
            for j in 0..ny {
                let p = family.point_at_cell([0.0, -ly + i as f64 * dy, -ly + j as f64 * dy]);
                let idx = i * ny + j;
                big_phi[idx] = p.big_phi;
                d0[idx] = p.dbig_phi[0];
                d1[idx] = p.dbig_phi[1];
                phi[idx] = p.phi;
            }
        }
        Self {
            ns,
            ny,
            ls,
            ly,
            psi,
            dpsi,
            big_phi,
            dbig_phi: [d0, d1],
            phi,
        }
    }

    /// s-grid spacing.
    pub fn ds(&self) -> f64 {
        2.0 * self.ls / self.ns as f64
    }

    /// y-grid cell area.
    pub fn dy2(&self) -> f64 {
        let dy = 2.0 * self.ly / self.ny as f64;
        dy * dy
    }

    /// Spectral s-derivative.
    pub fn ds_spec(&self, f: &[f64], order: usize) -> Vec<f64> {
        deriv_1d(f, self.ls, order)
    }

    /// Spectral y-derivative.
    pub fn dy_spec(&self, g: &[f64], order: [usize; 2]) -> Vec<f64> {
        deriv_2d(g, self.ny, self.ly, order)
    }
}

/// One separable term c·f(s)g(y) with c expressed in the frame (ξ, A, B).
pub struct SepTerm<'a> {
    /// Frame coefficients.
    pub c: [f64; 3],
    /// s-profile.
    pub f: &'a [f64],
    /// y-profile.
    pub g: &'a [f64],
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L²(T×box) norm of a sum of separable terms.
///
/// For each frame component the s-profiles are orthonormalised (modified
/// Gram–Schmidt, applied twice), Σ f_i⊗g_i = Σ q_j⊗h_j, and the norm is
/// Σ‖h_j‖². Cancellations between nearly equal terms then happen
/// pointwise, so small residuals keep full absolute precision (expanding
/// the Gram matrix instead would lose half the digits).
pub fn separable_l2(cells: &CellGrids, terms: &[SepTerm<'_>]) -> f64 {
    let mut total = 0.0;
    for d in 0..3 {
        let active: Vec<(f64, &[f64], &[f64])> = terms
            .iter()
            .filter(|t| t.c[d] != 0.0)
            .map(|t| (t.c[d], t.f, t.g))
            .collect();
        let mut qs: Vec<Vec<f64>> = Vec::new();
        let mut hs: Vec<Vec<f64>> = Vec::new();
        for (c, f, g) in active {
            let mut v: Vec<f64> = f.iter().map(|x| c * x).collect();
            let mut coefs = vec![0.0; qs.len()];
            for _ in 0..2 {
                for (j, q) in qs.iter().enumerate() {
                    let r = inner(q, &v);
                    coefs[j] += r;
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= r * qi;
                    }
                }
            }
            for (j, r) in coefs.iter().enumerate() {
                for (h, gi) in hs[j].iter_mut().zip(g) {
                    *h += r * gi;
                }
            }
            let nv = inner(&v, &v).sqrt();
            if nv > 0.0 {
                qs.push(v.iter().map(|x| x / nv).collect());
                hs.push(g.iter().map(|x| nv * x).collect());
            }
        }
        total += hs.iter().map(|h| inner(h, h)).sum::<f64>();
    }
    (total * cells.ds() * cells.dy2()).sqrt()
}

/// Relative residuals of the linear and quadratic jet identities in cell
/// coordinates (identical for every ξ, since only the frame rotates).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CellResiduals {
    /// ‖div(W + W^(c))‖ / ‖div W‖.
    pub div_free: f64,
    /// ‖curl curl V − (W + W^(c))‖ / ‖W + W^(c)‖.
    pub curl_curl: f64,
    /// ‖div(W⊗W) − μ⁻¹∂_t(φ²ψ²ξ)‖ / ‖μ⁻¹∂_t(φ²ψ²ξ)‖.
    pub quadratic: f64,
    /// s-grid size used.
    pub ns: usize,
    /// y-grid size used (per axis).
    pub ny: usize,
}

/// Evaluate the three jet identities with spectral derivatives against
/// analytic building blocks.
pub fn cell_residuals(family: &JetFamily, cells: &CellGrids) -> CellResiduals {
    let k = family.kappa;
    let mu = family.scales.mu;
    let rp2 = family.scales.r_perp * family.scales.r_perp;
    let c = family.potential_factor();
    let (xi, a, b) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]);
    let scaled = |v: [f64; 3], s: f64| [v[0] * s, v[1] * s, v[2] * s];

    // (i) div(W + W^c): ∂_s of the ξ-part plus ∇_y of the (A, B)-part.
    let dpsi_spec = cells.ds_spec(&cells.psi, 1);
    let d11 = cells.dy_spec(&cells.dbig_phi[0], [1, 0]);
    let d22 = cells.dy_spec(&cells.dbig_phi[1], [0, 1]);
    let trans: Vec<f64> = d11.iter().zip(&d22).map(|(x, y)| x + y).collect();
    let div_w = separable_l2(cells, &[SepTerm { c: scaled(xi, k), f: &dpsi_spec, g: &cells.phi }]);
    let div_res = separable_l2(
        cells,
        &[
            SepTerm { c: scaled(xi, k), f: &dpsi_spec, g: &cells.phi },
            SepTerm { c: scaled(xi, k * rp2), f: &cells.dpsi, g: &trans },
        ],
    );

    // (ii) curl curl V = ∇div V − ΔV for V = c ξ ψ Φ, in the frame.
    let lap_phi: Vec<f64> = {
        let p20 = cells.dy_spec(&cells.big_phi, [2, 0]);
        let p02 = cells.dy_spec(&cells.big_phi, [0, 2]);
        p20.iter().zip(&p02).map(|(x, y)| x + y).collect()
    };
    let d1_phi = cells.dy_spec(&cells.big_phi, [1, 0]);
    let d2_phi = cells.dy_spec(&cells.big_phi, [0, 1]);
    let d2psi_spec = cells.ds_spec(&cells.psi, 2);
    let kk = k * k * c;
    let target = [
        SepTerm { c: xi, f: &cells.psi, g: &cells.phi },
        SepTerm { c: scaled(a, rp2), f: &cells.dpsi, g: &cells.dbig_phi[0] },
        SepTerm { c: scaled(b, rp2), f: &cells.dpsi, g: &cells.dbig_phi[1] },
    ];
    let target_norm = separable_l2(cells, &target);
    let cc_res = separable_l2(
        cells,
        &[
            // ∇ div V
            SepTerm { c: scaled(xi, kk), f: &d2psi_spec, g: &cells.big_phi },
            SepTerm { c: scaled(a, kk), f: &dpsi_spec, g: &d1_phi },
            SepTerm { c: scaled(b, kk), f: &dpsi_spec, g: &d2_phi },
            // −ΔV
            SepTerm { c: scaled(xi, -kk), f: &d2psi_spec, g: &cells.big_phi },
            SepTerm { c: scaled(xi, -kk), f: &cells.psi, g: &lap_phi },
            // −(W + W^c)
            SepTerm { c: scaled(xi, -1.0), f: &cells.psi, g: &cells.phi },
            SepTerm { c: scaled(a, -rp2), f: &cells.dpsi, g: &cells.dbig_phi[0] },
            SepTerm { c: scaled(b, -rp2), f: &cells.dpsi, g: &cells.dbig_phi[1] },
        ],
    );

    // (iii) div(W⊗W) = ξ κ ∂_s(ψ²) φ² against μ⁻¹ ∂_t(ψ²) φ² ξ, with
    // ∂_t ψ² = 2ψ · κμ ψ′ analytic.
    let psi_sq: Vec<f64> = cells.psi.iter().map(|v| v * v).collect();
    let dpsi_sq = cells.ds_spec(&psi_sq, 1);
    let dt_psi_sq: Vec<f64> = cells
        .psi
        .iter()
        .zip(&cells.dpsi)
        .map(|(p, d)| 2.0 * p * k * mu * d / mu)
        .collect();
    let phi_sq: Vec<f64> = cells.phi.iter().map(|v| v * v).collect();
    let rhs = separable_l2(cells, &[SepTerm { c: xi, f: &dt_psi_sq, g: &phi_sq }]);
    let quad_res = separable_l2(
        cells,
        &[
            SepTerm { c: scaled(xi, k), f: &dpsi_sq, g: &phi_sq },
            SepTerm { c: scaled(xi, -1.0), f: &dt_psi_sq, g: &phi_sq },
        ],
    );

    CellResiduals {
        div_free: div_res / div_w,
        curl_curl: cc_res / target_norm,
        quadratic: quad_res / rhs,
        ns: cells.ns,
        ny: cells.ny,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_derivatives_of_trig() {
        let n = 32;
        let l = 2.0;
        let pi = std::f64::consts::PI;
        let x: Vec<f64> = (0..n).map(|i| -l + 2.0 * l * i as f64 / n as f64).collect();
        let f: Vec<f64> = x.iter().map(|&t| (3.0 * pi * t / l).sin()).collect();
        let d = deriv_1d(&f, l, 1);
        for (t, v) in x.iter().zip(&d) {
            assert!((v - 3.0 * pi / l * (3.0 * pi * t / l).cos()).abs() < 1e-12);
        }
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] = (pi * x[i] / l).sin() * (2.0 * pi * x[j] / l).cos();
            }
        }
        let d = deriv_2d(&g, n, l, [1, 1]);
        for i in 0..n {
            for j in 0..n {
                let e = -(pi / l) * (2.0 * pi / l) * (pi * x[i] / l).cos() * (2.0 * pi * x[j] / l).sin();
                assert!((d[i * n + j] - e).abs() < 1e-11);
            }
        }
    }
}
