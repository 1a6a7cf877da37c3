//! Shifts a_ξ that make the tube supports of the Φ_(ξ) pairwise disjoint.
//!
//! The support of Φ_(ξ) is a periodic array of straight tubes of radius
//! ρ = 1/(n_*λ) around the lines a_ξ + (2π/κ)(jA_ξ + kB_ξ) + ℝξ, with
//! κ = n_* r_⊥ λ, repeated with period 2π in every axis. Two tubes with
//! non-parallel axes are disjoint iff their axes are at distance ≥ 2ρ,
//! and the distance between the axes is |(p − p′)·ν|/|ν| with ν = ξ×ξ′.
//! Over all lattice copies the projections (p − p′)·ν fill the coset
//! (a_ξ − a_ξ′)·ν + (2π/κ)hℤ, where h is the gcd of the rationals
//! A·ν, B·ν, A′·ν, B′·ν and κν_i. Disjointness of the pair is therefore
//! the one-dimensional condition
//!
//!   dist((a_ξ − a_ξ′)·ν, (2π/κ)hℤ) ≥ 2ρ|ν|,
//!
//! feasible only if (2π/κ)h ≥ 4ρ|ν|, i.e. r_⊥ ≤ πh/(2|ν|).
//!
//! Shifts are chosen greedily in the order of Λ on a cubic lattice of
//! candidate shifts, starting at pitch 2ρ (one tube diameter, i.e. 2r_⊥
//! in cell units) and refining by halving until every pair clears the
//! condition with a relative margin.

use num_integer::Integer;
use num_rational::Rational64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{qcross, qdot, Direction};

/// Relative margin by which every pairwise clearance must exceed 2ρ|ν|.
pub const PLACEMENT_MARGIN: f64 = 0.05;
/// Number of candidate-lattice refinements (pitch halvings) attempted.
const MAX_REFINEMENTS: usize = 2;

fn rat_f64(r: &Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// gcd of a list of rationals (the positive generator of the group they span).
fn rational_gcd(values: &[Rational64]) -> Rational64 {
    let mut num = 0i64;
    let mut den = 1i64;
    for v in values {
        let l = den.lcm(v.denom());
        num = (num * (l / den)).gcd(&(v.numer() * (l / v.denom())));
        den = l;
    }
    Rational64::new(num, den)
}

/// Data for one unordered pair (i < j).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairGeometry {
    /// Indices into Λ.
    pub pair: (usize, usize),
    /// ν = ξ_i × ξ_j (as floats).
    pub nu: [f64; 3],
    /// Lattice generator h (rational, exact) as a float.
    pub h: f64,
    /// Largest r_⊥ for which this pair can be separated.
    pub max_r_perp: f64,
}

/// Exact pair geometry for a given κ = n_*·(λr_⊥).
pub fn pair_geometry(dirs: &[Direction], kappa: i64) -> Vec<PairGeometry> {
    let mut out = Vec::new();
    for i in 0..dirs.len() {
        for j in i + 1..dirs.len() {
            let (d, e) = (&dirs[i], &dirs[j]);
            let nu = qcross(&d.xi, &e.xi);
            let k = Rational64::from_integer(kappa);
            let h = rational_gcd(&[
                qdot(&d.a, &nu),
                qdot(&d.b, &nu),
                qdot(&e.a, &nu),
                qdot(&e.b, &nu),
                k * nu[0],
                k * nu[1],
                k * nu[2],
            ]);
            let nu_f = [rat_f64(&nu[0]), rat_f64(&nu[1]), rat_f64(&nu[2])];
            let nu_norm = nu_f.iter().map(|x| x * x).sum::<f64>().sqrt();
            out.push(PairGeometry {
                pair: (i, j),
                nu: nu_f,
                h: rat_f64(&h),
                max_r_perp: std::f64::consts::PI * rat_f64(&h) / (2.0 * nu_norm),
            });
        }
    }
    out
}

/// Normalised clearance of a pair: dist(d, Phℤ)/(2ρ|ν|) − 1, where
/// d = (a_i − a_j)·ν. Non-negative means disjoint.
fn clearance(pg: &PairGeometry, ai: &[f64; 3], aj: &[f64; 3], period: f64, rho: f64) -> f64 {
    let d: f64 = (0..3).map(|c| (ai[c] - aj[c]) * pg.nu[c]).sum();
    let lat = period * pg.h;
    let r = d.rem_euclid(lat);
    let dist = r.min(lat - r);
    let nu_norm = pg.nu.iter().map(|x| x * x).sum::<f64>().sqrt();
    dist / (2.0 * rho * nu_norm) - 1.0
}

/// Outcome of the greedy placement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Placement {
    /// One shift per direction.
    pub shifts: Vec<[f64; 3]>,
    /// Smallest normalised pairwise clearance (≥ margin on success).
    pub min_clearance: f64,
    /// Candidate-lattice pitch used.
    pub pitch: f64,
}

/// Greedy placement for tubes of radius `rho` in cells of period
/// 2π/κ. Errors list the pairs that could not be separated.
pub fn place(dirs: &[Direction], kappa: i64, rho: f64) -> Result<Placement> {
    let pairs = pair_geometry(dirs, kappa);
    let period = 2.0 * std::f64::consts::PI / kappa as f64;
    let infeasible: Vec<(usize, usize)> = pairs
        .iter()
        .filter(|pg| {
            let nu_norm = pg.nu.iter().map(|x| x * x).sum::<f64>().sqrt();
            period * pg.h < 4.0 * rho * nu_norm * (1.0 + PLACEMENT_MARGIN)
        })
        .map(|pg| pg.pair)
        .collect();
    if !infeasible.is_empty() {
        return Err(Error::Placement(infeasible));
    }
    let mut pitch = 2.0 * rho;
    let mut last_conflicts = Vec::new();
    for _ in 0..=MAX_REFINEMENTS {
        let steps = (period / pitch).ceil() as usize;
        let mut shifts: Vec<[f64; 3]> = vec![[0.0; 3]];
        let mut ok = true;
        for j in 1..dirs.len() {
            // Choose the candidate that maximises the worst clearance against
            // the already placed directions; ties keep the first candidate.
            let mut best: Option<([f64; 3], f64)> = None;
            for c0 in 0..steps {
                for c1 in 0..steps {
                    for c2 in 0..steps {
                        let a = [c0 as f64 * pitch, c1 as f64 * pitch, c2 as f64 * pitch];
                        let worst = (0..j)
                            .map(|i| {
                                let pg = &pairs[pair_slot(dirs.len(), i, j)];
                                clearance(pg, &shifts[i], &a, period, rho)
                            })
                            .fold(f64::INFINITY, f64::min);
                        if best.map_or(true, |(_, b)| worst > b) {
                            best = Some((a, worst));
                        }
                    }
                }
            }
            let (a, worst) = best.expect("at least one candidate");
            if worst < PLACEMENT_MARGIN {
                ok = false;
                last_conflicts = (0..j)
                    .filter(|&i| {
                        clearance(&pairs[pair_slot(dirs.len(), i, j)], &shifts[i], &a, period, rho)
                            < PLACEMENT_MARGIN
                    })
                    .map(|i| (i, j))
                    .collect();
                break;
            }
            shifts.push(a);
        }
        if ok {
            let min_clearance = pairs
                .iter()
                .map(|pg| clearance(pg, &shifts[pg.pair.0], &shifts[pg.pair.1], period, rho))
                .fold(f64::INFINITY, f64::min);
            return Ok(Placement {
                shifts,
                min_clearance,
                pitch,
            });
        }
        pitch /= 2.0;
    }
    Err(Error::Placement(last_conflicts))
}

/// Position of the pair (i, j), i < j, in the output of [`pair_geometry`].
fn pair_slot(n: usize, i: usize, j: usize) -> usize {
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DirectionSet;

    #[test]
    fn rational_gcd_basics() {
        let g = rational_gcd(&[Rational64::new(2, 3), Rational64::new(4, 9), Rational64::new(-2, 1)]);
        assert_eq!(g, Rational64::new(2, 9));
    }

    #[test]
    fn pair_slots_enumerate_in_order() {
        let set = DirectionSet::build().unwrap();
        let pg = pair_geometry(&set.directions, 3);
        for (s, p) in pg.iter().enumerate() {
            assert_eq!(pair_slot(6, p.pair.0, p.pair.1), s);
        }
    }

    #[test]
    fn small_tubes_place_and_large_tubes_fail() {
        let set = DirectionSet::build().unwrap();
        let lambda = 6.0;
        let rho = 1.0 / (3.0 * lambda);
        // r_⊥ = 1/6, λr_⊥ = 1, κ = 3.
        let p = place(&set.directions, 3, rho).unwrap();
        assert!(p.min_clearance >= PLACEMENT_MARGIN);
        // r_⊥ = 1/2: tubes too fat for some pair.
        let err = place(&set.directions, 9, rho).unwrap_err();
        assert!(matches!(err, Error::Placement(ref v) if !v.is_empty()));
    }
}
