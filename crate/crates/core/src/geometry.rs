//! A concrete direction set Λ ⊂ S² ∩ ℚ³ with rational orthonormal frames,
//! the coefficient maps c_ξ and amplitudes γ_ξ = √c_ξ of the geometric
//! decomposition R = Σ γ_ξ(R)² ξ⊗ξ, and the constants C_Λ and M.
//!
//! Λ has six directions, so {ξ⊗ξ} is a basis of Sym(3) and the
//! coefficients c_ξ(R) are the unique solution of a 6×6 linear system,
//! inverted once in exact rational arithmetic.
//!
//! Writing c_ξ(Id + S) = c_ξ(Id) + ⟨G_ξ, S⟩_F, the smallest value of c_ξ on
//! the operator-norm ball ‖S‖ ≤ r is c_ξ(Id) − r‖G_ξ‖_* (nuclear norm), so
//! every c_ξ stays positive exactly for r < r* = min_ξ c_ξ(Id)/‖G_ξ‖_*.
//! The amplitudes are used on the smaller admissible ball of radius r*/2,
//! on which every c_ξ keeps at least half of its central value, so γ_ξ and
//! ∇γ_ξ stay bounded there.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};
use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::field::SYM_PAIRS;

/// Rational 3-vector.
pub type QVec = [Rational64; 3];

/// The six directions, as integer numerators over the common denominator 3.
const DIRECTIONS: [[i64; 3]; 6] = [
    [1, 2, -2],
    [1, 2, 2],
    [2, -2, -1],
    [2, -1, -2],
    [2, -1, 2],
    [2, 2, 1],
];

/// The frame vectors A_ξ in the same order, over the denominator 3.
const FRAME_A: [[i64; 3]; 6] = [
    [-2, -1, -2],
    [-2, -1, 2],
    [-2, -1, -2],
    [-2, -2, -1],
    [-2, -2, 1],
    [-2, 1, 2],
];

const DENOM: i64 = 3;

fn q(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

pub(crate) fn qdot(a: &QVec, b: &QVec) -> Rational64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn qcross(a: &QVec, b: &QVec) -> QVec {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn to_f64(v: &QVec) -> [f64; 3] {
    let f = |r: &Rational64| *r.numer() as f64 / *r.denom() as f64;
    [f(&v[0]), f(&v[1]), f(&v[2])]
}

/// Format a rational vector as "(a/b, c/d, e/f)".
pub fn format_qvec(v: &QVec) -> String {
    let s: Vec<String> = v.iter().map(|r| r.to_string()).collect();
    format!("({})", s.join(", "))
}

/// One direction with its frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    /// ξ.
    pub xi: QVec,
    /// A_ξ, orthogonal to ξ.
    pub a: QVec,
    /// ξ × A_ξ.
    pub b: QVec,
}

impl Direction {
    /// ξ in floating point.
    pub fn xi_f64(&self) -> [f64; 3] {
        to_f64(&self.xi)
    }
    /// A_ξ in floating point.
    pub fn a_f64(&self) -> [f64; 3] {
        to_f64(&self.a)
    }
    /// ξ × A_ξ in floating point.
    pub fn b_f64(&self) -> [f64; 3] {
        to_f64(&self.b)
    }
}

/// The direction set with its frames and the geometric constants.
#[derive(Clone, Debug)]
pub struct DirectionSet {
    /// Directions with frames, in fixed order.
    pub directions: Vec<Direction>,
    /// Smallest natural number clearing every frame denominator.
    pub n_star: i64,
    /// Supremum r* of radii on which all c_ξ(Id + S) > 0 for ‖S‖ ≤ r.
    pub positivity_radius: f64,
    /// Radius r*/2 of the ball on which γ is used.
    pub admissible_radius: f64,
    /// Exact inverse of the dyad matrix: c = inverse · vec(R), vec in the
    /// stored order 11, 12, 13, 22, 23, 33.
    pub inverse: [[Rational64; 6]; 6],
    inverse_f64: [[f64; 6]; 6],
    /// Dual matrices G_ξ with c_ξ(R) = ⟨G_ξ, R⟩_F.
    pub duals: Vec<Matrix3<f64>>,
}

/// Exact inverse of a 6×6 rational matrix by Gauss–Jordan elimination.
fn invert6(m: [[Rational64; 6]; 6]) -> Result<[[Rational64; 6]; 6]> {
    let mut a = m;
    let mut inv = [[Rational64::zero(); 6]; 6];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = Rational64::one();
    }
    for col in 0..6 {
        let piv = (col..6)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::Derivation("direction dyads do not span Sym(3)".into()))?;
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for j in 0..6 {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..6 {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col];
                for j in 0..6 {
                    let (ac, ic) = (a[col][j], inv[col][j]);
                    a[r][j] -= f * ac;
                    inv[r][j] -= f * ic;
                }
            }
        }
    }
    Ok(inv)
}

/// Rank of the dyad matrix computed by exact elimination.
pub fn dyad_rank(dirs: &[Direction]) -> usize {
    let mut rows: Vec<Vec<Rational64>> = dirs
        .iter()
        .map(|d| SYM_PAIRS.iter().map(|&(i, j)| d.xi[i] * d.xi[j]).collect())
        .collect();
    let mut rank = 0;
    for col in 0..6 {
        if let Some(p) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) {
            rows.swap(rank, p);
            for r in 0..rows.len() {
                if r != rank && !rows[r][col].is_zero() {
                    let f = rows[r][col] / rows[rank][col];
                    let pr = rows[rank].clone();
                    for (x, y) in rows[r].iter_mut().zip(&pr) {
                        *x -= f * y;
                    }
                }
            }
            rank += 1;
        }
    }
    rank
}

/// Operator (spectral) norm of a symmetric matrix.
pub fn op_norm(m: &Matrix3<f64>) -> f64 {
    SymmetricEigen::new(*m)
        .eigenvalues
        .iter()
        .map(|e| e.abs())
        .fold(0.0, f64::max)
}

fn nuclear_norm(m: &Matrix3<f64>) -> f64 {
    SymmetricEigen::new(*m).eigenvalues.iter().map(|e| e.abs()).sum()
}

/// Stored-order vector of a symmetric matrix.
fn sym_vec(r: &Matrix3<f64>) -> [f64; 6] {
    let mut v = [0.0; 6];
    for (s, &(i, j)) in SYM_PAIRS.iter().enumerate() {
        v[s] = r[(i, j)];
    }
    v
}

impl DirectionSet {
    /// Build and validate the fixed direction set.
    pub fn build() -> Result<Self> {
        let directions: Vec<Direction> = DIRECTIONS
            .iter()
            .zip(FRAME_A.iter())
            .map(|(x, a)| {
                let xi = [q(x[0], DENOM), q(x[1], DENOM), q(x[2], DENOM)];
                let av = [q(a[0], DENOM), q(a[1], DENOM), q(a[2], DENOM)];
                let b = qcross(&xi, &av);
                Direction { xi, a: av, b }
            })
            .collect();
        for (k, d) in directions.iter().enumerate() {
            let one = Rational64::one();
            let ok = qdot(&d.xi, &d.xi) == one
                && qdot(&d.a, &d.a) == one
                && qdot(&d.b, &d.b) == one
                && qdot(&d.xi, &d.a).is_zero()
                && qdot(&d.xi, &d.b).is_zero()
                && qdot(&d.a, &d.b).is_zero();
            if !ok {
                return Err(Error::Derivation(format!("frame {k} is not orthonormal")));
            }
        }
        let n_star = directions
            .iter()
            .flat_map(|d| d.xi.iter().chain(&d.a).chain(&d.b).map(|r| *r.denom()))
            .fold(1i64, |acc, den| acc.lcm(&den));
        if dyad_rank(&directions) != 6 {
            return Err(Error::Derivation("direction dyads do not span Sym(3)".into()));
        }
        let mut m = [[Rational64::zero(); 6]; 6];
        for (c, d) in directions.iter().enumerate() {
            for (s, &(i, j)) in SYM_PAIRS.iter().enumerate() {
                m[s][c] = d.xi[i] * d.xi[j];
            }
        }
        let inverse = invert6(m)?;
        let mut inverse_f64 = [[0.0; 6]; 6];
        for r in 0..6 {
            for c in 0..6 {
                inverse_f64[r][c] = *inverse[r][c].numer() as f64 / *inverse[r][c].denom() as f64;
            }
        }
        let duals: Vec<Matrix3<f64>> = (0..6)
            .map(|xi| {
                let mut g = Matrix3::zeros();
                for (s, &(i, j)) in SYM_PAIRS.iter().enumerate() {
                    let w = if i == j { 1.0 } else { 0.5 };
                    g[(i, j)] = w * inverse_f64[xi][s];
                    g[(j, i)] = w * inverse_f64[xi][s];
                }
                g
            })
            .collect();
        let mut set = Self {
            directions,
            n_star,
            positivity_radius: 0.0,
            admissible_radius: 0.0,
            inverse,
            inverse_f64,
            duals,
        };
        let c_id = set.coefficients(&Matrix3::identity());
        if c_id.iter().any(|c| *c <= 0.0) {
            return Err(Error::Derivation(format!("c_ξ(Id) not positive: {c_id:?}")));
        }
        set.positivity_radius = c_id
            .iter()
            .zip(&set.duals)
            .map(|(c, g)| c / nuclear_norm(g))
            .fold(f64::INFINITY, f64::min);
        set.admissible_radius = 0.5 * set.positivity_radius;
        Ok(set)
    }

    /// Number of directions |Λ|.
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    /// Always false.
    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Coefficients c_ξ(R), linear in R.
    pub fn coefficients(&self, r: &Matrix3<f64>) -> [f64; 6] {
        let v = sym_vec(r);
        let mut c = [0.0; 6];
        for (xi, cx) in c.iter_mut().enumerate() {
            *cx = (0..6).map(|s| self.inverse_f64[xi][s] * v[s]).sum();
        }
        c
    }

    /// Exact coefficients c_ξ(Id).
    pub fn coefficients_at_identity_exact(&self) -> [Rational64; 6] {
        let v = [1, 0, 0, 1, 0, 1].map(|x: i64| Rational64::from_integer(x));
        let mut c = [Rational64::zero(); 6];
        for (xi, cx) in c.iter_mut().enumerate() {
            *cx = (0..6).map(|s| self.inverse[xi][s] * v[s]).sum();
        }
        c
    }

    /// γ_ξ(R) = √c_ξ(R) on the admissible ball ‖R − Id‖ ≤ r*/2.
    pub fn gamma(&self, r: &Matrix3<f64>) -> Result<[f64; 6]> {
        let dist = op_norm(&(r - Matrix3::identity()));
        if dist > self.admissible_radius {
            return Err(Error::GeometryDomain {
                distance: dist,
                radius: self.admissible_radius,
            });
        }
        Ok(self.coefficients(r).map(|c| c.max(0.0).sqrt()))
    }

    /// Σ_ξ γ_ξ² ξ⊗ξ.
    pub fn reconstruct(&self, gamma: &[f64; 6]) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for (g, d) in gamma.iter().zip(&self.directions) {
            let x = d.xi_f64();
            for i in 0..3 {
                for j in 0..3 {
                    m[(i, j)] += g * g * x[i] * x[j];
                }
            }
        }
        m
    }

    /// C_Λ = 8|Λ|(1 + 8π³)^{1/2}.
    pub fn c_lambda(&self) -> f64 {
        8.0 * self.len() as f64 * (1.0 + 8.0 * PI.powi(3)).sqrt()
    }

    /// Sample the admissible ball and return M with its sampling report.
    pub fn constant_m(&self, samples: usize, seed: u64) -> MEstimate {
        let r = self.admissible_radius;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points: Vec<Matrix3<f64>> = Vec::with_capacity(samples + 12);
        // Eigen-analytic extremal points: ∓r·sgn(G_ξ) minimise/maximise c_ξ.
        for g in &self.duals {
            let e = SymmetricEigen::new(*g);
            let sgn = e.eigenvectors
                * Matrix3::from_diagonal(&e.eigenvalues.map(|v| v.signum()))
                * e.eigenvectors.transpose();
            points.push(Matrix3::identity() - sgn * r);
            points.push(Matrix3::identity() + sgn * r);
        }
        while points.len() < samples + 12 {
            let mut s = Matrix3::zeros();
            for &(i, j) in &SYM_PAIRS {
                let v: f64 = rng.gen_range(-1.0..1.0);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
            let nrm = op_norm(&s);
            if nrm == 0.0 {
                continue;
            }
            let rad = r * rng.gen::<f64>().powf(1.0 / 6.0);
            points.push(Matrix3::identity() + s * (rad / nrm));
        }
        let grad_norms: Vec<f64> = self.duals.iter().map(|g| g.norm()).collect();
        let mut sup = 0.0f64;
        for p in &points {
            let c = self.coefficients(p);
            for (cx, gn) in c.iter().zip(&grad_norms) {
                let val = cx.sqrt() + gn / (2.0 * cx.sqrt());
                sup = sup.max(val);
            }
        }
        MEstimate {
            m: self.c_lambda() * sup,
            sup_gamma_plus_gradient: sup,
            samples: points.len(),
        }
    }

    /// Largest radius found by sampling at which all sampled c_ξ stay
    /// positive, at a given trial radius: returns the minimum sampled
    /// coefficient.
    pub fn min_coefficient_on_sphere(&self, radius: f64, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = f64::INFINITY;
        let mut eval = |s: &Matrix3<f64>| {
            let c = self.coefficients(&(Matrix3::identity() + s));
            best = best.min(c.iter().copied().fold(f64::INFINITY, f64::min));
        };
        for g in &self.duals {
            let e = SymmetricEigen::new(*g);
            let sgn = e.eigenvectors
                * Matrix3::from_diagonal(&e.eigenvalues.map(|v| v.signum()))
                * e.eigenvectors.transpose();
            eval(&(-sgn * radius));
        }
        for _ in 0..samples {
            let mut s = Matrix3::zeros();
            for &(i, j) in &SYM_PAIRS {
                let v: f64 = rng.gen_range(-1.0..1.0);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
            let nrm = op_norm(&s);
            if nrm > 0.0 {
                eval(&(s * (radius / nrm)));
            }
        }
        best
    }

    /// Certify r*: all samples strictly inside (radius (1−ε)r*) keep every
    /// coefficient positive, and the extremal point at (1+ε)r* makes one
    /// negative.
    pub fn certify_positivity(&self, samples: usize, seed: u64) -> PositivityCertificate {
        let eps = 1e-6;
        let inside = self.min_coefficient_on_sphere(self.positivity_radius * (1.0 - eps), samples, seed);
        let outside =
            self.min_coefficient_on_sphere(self.positivity_radius * (1.0 + eps), 0, seed);
        PositivityCertificate {
            radius: self.positivity_radius,
            min_coefficient_inside: inside,
            min_coefficient_outside: outside,
            samples,
            certified: inside > 0.0 && outside < 0.0,
        }
    }

    /// Full geometry dump for reports.
    pub fn dump(&self, m_samples: usize) -> GeometryDump {
        let m1 = self.constant_m(m_samples, 1);
        let m2 = self.constant_m(2 * m_samples, 2);
        let cert = self.certify_positivity(m_samples, 3);
        GeometryDump {
            directions: self.directions.iter().map(|d| format_qvec(&d.xi)).collect(),
            frames_a: self.directions.iter().map(|d| format_qvec(&d.a)).collect(),
            frames_b: self.directions.iter().map(|d| format_qvec(&d.b)).collect(),
            n_star: self.n_star,
            coefficients_at_identity: self
                .coefficients_at_identity_exact()
                .iter()
                .map(|c| c.to_string())
                .collect(),
            positivity_radius: self.positivity_radius,
            admissible_radius: self.admissible_radius,
            positivity_certified: cert.certified,
            c_lambda: self.c_lambda(),
            m: m2.m,
            m_samples: m2.samples,
            m_relative_change_on_doubling: ((m2.m - m1.m) / m2.m).abs(),
        }
    }

    /// Short fingerprint embedded in every run report.
    pub fn fingerprint(&self) -> String {
        let dirs: Vec<String> = self.directions.iter().map(|d| format_qvec(&d.xi)).collect();
        format!(
            "Lambda=[{}]; n_star={}; positivity_radius={:.12e}",
            dirs.join(" "),
            self.n_star,
            self.positivity_radius
        )
    }
}

/// Sampled value of M.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MEstimate {
    /// M = C_Λ · sup.
    pub m: f64,
    /// sup_ξ sup_R (γ_ξ(R) + |∇γ_ξ(R)|) over the samples.
    pub sup_gamma_plus_gradient: f64,
    /// Number of sample points.
    pub samples: usize,
}

/// Sampling certificate for the positivity radius.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PositivityCertificate {
    /// r*.
    pub radius: f64,
    /// Smallest sampled coefficient just inside r*.
    pub min_coefficient_inside: f64,
    /// Smallest coefficient at the extremal point just outside r*.
    pub min_coefficient_outside: f64,
    /// Random samples used inside.
    pub samples: usize,
    /// Whether both sides confirm r*.
    pub certified: bool,
}

/// Machine-readable geometry report.
#[derive(Clone, Debug, Serialize)]
pub struct GeometryDump {
    /// Λ as rational vectors.
    pub directions: Vec<String>,
    /// A_ξ.
    pub frames_a: Vec<String>,
    /// ξ × A_ξ.
    pub frames_b: Vec<String>,
    /// n*.
    pub n_star: i64,
    /// c_ξ(Id), exact.
    pub coefficients_at_identity: Vec<String>,
    /// r*.
    pub positivity_radius: f64,
    /// r*/2.
    pub admissible_radius: f64,
    /// Sampling certificate verdict.
    pub positivity_certified: bool,
    /// C_Λ.
    pub c_lambda: f64,
    /// M at the finer sampling.
    pub m: f64,
    /// Samples used for M.
    pub m_samples: usize,
    /// |M(2N) − M(N)| / M(2N).
    pub m_relative_change_on_doubling: f64,
}

/// Random symmetric matrix in the admissible ball (for tests and
/// acceptance).
pub fn random_admissible(set: &DirectionSet, rng: &mut impl Rng) -> Matrix3<f64> {
    let mut s = Matrix3::zeros();
    for &(i, j) in &SYM_PAIRS {
        let v: f64 = rng.gen_range(-1.0..1.0);
        s[(i, j)] = v;
        s[(j, i)] = v;
    }
    let nrm = op_norm(&s).max(1e-300);
    let rad = set.admissible_radius * rng.gen::<f64>();
    Matrix3::identity() + s * (rad / nrm)
}

/// Whether a rational vector times n* is integral.
pub fn is_integral_multiple(v: &QVec, n: i64) -> bool {
    v.iter().all(|r| (*r * Rational64::from_integer(n)).is_integer())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerances::{GEOMETRY_RECONSTRUCTION, LINEAR_MAP_EXACT, M_SAMPLING_CONVERGENCE};
    use proptest::prelude::*;

    fn set() -> DirectionSet {
        DirectionSet::build().unwrap()
    }

    #[test]
    fn frames_are_exactly_orthonormal_and_integral() {
        let s = set();
        assert_eq!(s.n_star, 3);
        for d in &s.directions {
            for v in [&d.xi, &d.a, &d.b] {
                assert!(is_integral_multiple(v, s.n_star));
                assert_eq!(qdot(v, v), Rational64::one());
            }
            assert!(qdot(&d.xi, &d.a).is_zero());
            assert!(qdot(&d.xi, &d.b).is_zero());
            assert!(qdot(&d.a, &d.b).is_zero());
        }
        assert_eq!(dyad_rank(&s.directions), 6);
    }

    #[test]
    fn identity_coefficients() {
        let s = set();
        let c = s.coefficients_at_identity_exact();
        let expect = [q(7, 10), q(3, 10), q(1, 2), q(2, 5), q(3, 5), q(1, 2)];
        assert_eq!(c, expect);
        let g = s.gamma(&Matrix3::identity()).unwrap();
        assert!((s.reconstruct(&g) - Matrix3::identity()).norm() < GEOMETRY_RECONSTRUCTION);
    }

    #[test]
    fn off_diagonal_example_and_domain_error() {
        let s = set();
        let mut r = Matrix3::identity();
        let e = 0.9 * s.admissible_radius;
        r[(0, 1)] = e;
        r[(1, 0)] = e;
        let g = s.gamma(&r).unwrap();
        assert!((s.reconstruct(&g) - r).norm() < GEOMETRY_RECONSTRUCTION);
        let mut far = Matrix3::identity();
        far[(2, 2)] += 1.0;
        match s.gamma(&far) {
            Err(Error::GeometryDomain { distance, .. }) => assert!((distance - 1.0).abs() < 1e-12),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn positivity_radius_certified() {
        let s = set();
        assert!(s.positivity_radius > 0.1 && s.positivity_radius < 0.11);
        let cert = s.certify_positivity(20_000, 7);
        assert!(cert.certified, "{cert:?}");
    }

    #[test]
    fn constants() {
        let s = set();
        assert!((s.c_lambda() - 757.6).abs() < 0.1);
        let m1 = s.constant_m(20_000, 1);
        let m2 = s.constant_m(40_000, 2);
        assert!(((m2.m - m1.m) / m2.m).abs() < M_SAMPLING_CONVERGENCE);
        let gid = s.gamma(&Matrix3::identity()).unwrap();
        for g in gid {
            assert!(m2.m >= s.c_lambda() * g);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_reconstruction(seed in 0u64..100_000) {
            let s = set();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_admissible(&s, &mut rng);
            let g = s.gamma(&r).unwrap();
            prop_assert!(g.iter().all(|x| *x > 0.0));
            prop_assert!((s.reconstruct(&g) - r).norm() < GEOMETRY_RECONSTRUCTION);
        }

        #[test]
        fn prop_coefficients_linear(seed in 0u64..100_000, alpha in 0.0f64..1.0) {
            let s = set();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r1 = random_admissible(&s, &mut rng);
            let r2 = random_admissible(&s, &mut rng);
            let lhs = s.coefficients(&(r1 * alpha + r2 * (1.0 - alpha)));
            let c1 = s.coefficients(&r1);
            let c2 = s.coefficients(&r2);
            for k in 0..6 {
                prop_assert!((lhs[k] - (alpha * c1[k] + (1.0 - alpha) * c2[k])).abs() < LINEAR_MAP_EXACT);
            }
        }
    }
}
