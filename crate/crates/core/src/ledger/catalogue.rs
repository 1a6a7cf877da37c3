//! The constraint catalogue.
//!
//! Every inequality the scheme's estimates need is one row of [`CATALOGUE`]:
//! a name, a plain-language origin, the schemes it applies to, the search
//! knob that is adjusted to satisfy it, the expected behaviour as a grows,
//! and the check itself written in the expression language of
//! [`super::expr`].
//!
//! Symbols available in monomials:
//!
//! | symbol | value |
//! |--------|-------|
//! | `a`, `b`, `L`, `cR`, `M` | ledger parameters and the geometric constant |
//! | `K`, `T`, `trace` | targets and Tr(GG*) |
//! | `e`, `pi`, `twopi`, `sqrt3` | numeric constants |
//! | `lam0`, `lam1`, `lam2` | λ_q, λ_{q+1}, λ_{q+2} |
//! | `del1`, `del2` | δ_{q+1}, δ_{q+2} |
//! | `l`, `rperp`, `rpar`, `mu`, `kappa` | mollifier and jet scales, κ = λ_{q+1}r_⊥ |
//! | `M0max`, `M0min` | M₀(L) and M₀(0) of the active scheme |
//! | `mL` | √3 L^{1/4} e^{L^{1/4}/2} |
//! | `basecap` | ((2π)^{3/2} a⁴ − 2)/2 |
//! | `multcap` | c_R e^L / (L^{1/4}(2L+13) e^{L^{1/4}/2}) |
//! | `grow_lhs`, `grow_rhs` | 3/2 + 1/L and (1/√2 − 1/2) e^{LT} |
//! | `budget_lhs`, `budget_rhs` | L^{1/4}(2π)^{3/2} + K (T·trace)^{1/2} and L e^{LT} |
//! | `eLT` | e^{LT} |
//! | `mgrow_lhs`, `mgrow_rhs` | (3/2) e^{2√L} and (1/√2 − 1/2) e^{2LT} |
//! | `KTsq` | [ln(K e^{T/2})]² |

use serde::Serialize;

/// Which schemes a constraint belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Modes {
    /// Additive and multiplicative.
    Both,
    /// Additive noise only.
    Additive,
    /// Linear multiplicative noise only.
    Multiplicative,
}

/// The knob the search turns to satisfy a constraint (in quantifier order).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Knob {
    /// Fixed by m, δ and the choice of α; nothing to tune.
    Structural,
    /// The smallness constant c_R.
    CR,
    /// L, fixed first from its lower bounds.
    L,
    /// b, fixed after L.
    B,
    /// β, shrunk after b.
    Beta,
    /// a, grown last.
    A,
}

/// Behaviour of a constraint along an increasing a-sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Trend {
    /// Does not depend on a.
    Free,
    /// Holds for all sufficiently large a.
    ALarge,
    /// Holds for all sufficiently small a (an upper bound on a).
    ASmall,
}

/// Comparison used by [`CheckSpec::Compare`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Rel {
    /// lhs ≤ rhs.
    Le,
    /// lhs < rhs.
    Lt,
    /// lhs ≤ ε · rhs ("much less than").
    MuchLess,
}

/// The check performed by a catalogue row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckSpec {
    /// Exact sign: the polynomial is < 0 (`strict`) or ≤ 0.
    Sign { poly: &'static str, strict: bool },
    /// Log-space comparison of two monomials.
    Compare { lhs: &'static str, rel: Rel, rhs: &'static str },
    /// ∃ N ≥ n_min with prefactor · ratio^N ≤ 1.
    ExistsN { prefactor: &'static str, ratio: &'static str, n_min: u32 },
    /// λ_{q+1} r_⊥ ∈ ℕ.
    Integral,
}

/// One row of the catalogue.
#[derive(Clone, Copy, Debug)]
pub struct ConstraintSpec {
    /// Unique identifier.
    pub name: &'static str,
    /// Where in the scheme the constraint is needed.
    pub origin: &'static str,
    /// Applicable schemes.
    pub modes: Modes,
    /// Search knob.
    pub knob: Knob,
    /// Declared a-behaviour (verified against the exact exponents).
    pub trend: Trend,
    /// The check.
    pub check: CheckSpec,
}

const fn sign(name: &'static str, origin: &'static str, modes: Modes, knob: Knob, poly: &'static str) -> ConstraintSpec {
    ConstraintSpec { name, origin, modes, knob, trend: Trend::Free, check: CheckSpec::Sign { poly, strict: true } }
}

#[allow(clippy::too_many_arguments)]
const fn cmp(
    name: &'static str,
    origin: &'static str,
    modes: Modes,
    knob: Knob,
    trend: Trend,
    lhs: &'static str,
    rel: Rel,
    rhs: &'static str,
) -> ConstraintSpec {
    ConstraintSpec { name, origin, modes, knob, trend, check: CheckSpec::Compare { lhs, rel, rhs } }
}

use Knob as Kn;
use Modes::{Additive as Add, Both, Multiplicative as Mul};
use Rel::{Le, Lt, MuchLess as Ll};
use Trend::{ALarge, ASmall, Free};

/// Reynolds-stress target with the L^{p*} → L¹ Hölder factor, share 1/5.
const R5: &str = "twopi^(3*pinv - 3) * cR * del2 * 5^(-1)";
/// Same with share 1/10.
const R10: &str = "twopi^(3*pinv - 3) * cR * del2 * 10^(-1)";

/// Every catalogued constraint.
pub const CATALOGUE: &[ConstraintSpec] = &[
    // ── structural: m, δ, α, p* ────────────────────────────────────────
    sign("m_lower", "range of the fractional order", Both, Kn::Structural, "13/20 - m"),
    sign("m_upper", "range of the fractional order", Both, Kn::Structural, "m - 5/4"),
    sign("delta_positive", "Hölder margin of the stopping time", Both, Kn::Structural, "-delta"),
    sign("delta_additive_range", "Hölder margin, additive stopping time", Add, Kn::Structural, "delta - 1/30"),
    sign("delta_multiplicative_range", "Hölder margin, multiplicative stopping time", Mul, Kn::Structural, "delta - 1/12"),
    sign("alpha_choice", "choice of α", Both, Kn::Structural, "alpha - (5 - 4*m)/384"),
    sign("p_star_above_one", "Reynolds-stress Lebesgue exponent", Both, Kn::Structural, "pinv - 1"),
    sign("p_star_below_two", "Reynolds-stress Lebesgue exponent", Both, Kn::Structural, "1/2 - pinv"),
    sign("mollifier_gap_exponent", "b-side exponent of the mollified-stress gap", Both, Kn::Structural, "(5 - 4*m)/48 - 49*alpha/24 + (4*m - 5)/24"),
    sign("corrector_exponent", "corrector and temporal-corrector L^p bounds", Both, Kn::Structural, "20*alpha + (20*m - 25)/24"),
    sign("temporal_exponent", "corrector and temporal-corrector L^p bounds", Both, Kn::Structural, "4*alpha + m/2 - 5/8"),
    sign("corrector_exponent_sobolev", "perturbation W^{1,p} bounds", Both, Kn::Structural, "24*alpha + (20*m - 25)/24"),
    sign("temporal_exponent_sobolev", "perturbation W^{1,p} bounds", Both, Kn::Structural, "8*alpha + m/2 - 5/8"),
    sign("stationary_phase_alpha", "principal perturbation L² bound", Both, Kn::Structural, "alpha - (25 - 20*m)/384"),
    sign("corrector_stress_alpha", "corrector stress", Both, Kn::Structural, "alpha - (15 - 12*m)/335"),
    sign("oscillation_alpha", "spatial oscillation stress", Both, Kn::Structural, "alpha - (15 - 12*m)/95"),
    sign("commutator_lemma_alpha", "high-frequency commutator lemma", Both, Kn::Structural, "alpha - (5 - 4*m)/48"),
    sign("multiplicative_corrector_alpha", "multiplicative corrector stress", Mul, Kn::Structural, "alpha - (25 - 20*m)/480"),
    sign("multiplicative_corrector_alpha_b", "multiplicative corrector stress", Mul, Kn::Structural, "alpha - (5 - 4*m)/32"),
    // ── c_R ─────────────────────────────────────────────────────────────
    cmp("cR_amplitude", "amplitude L² bound (c_R^{1/4} ≪ 1/M)", Both, Kn::CR, Free, "cR^(1/4) * M", Ll, "1"),
    cmp("cR_principal", "principal perturbation L² bound (c_R ≪ (2π)^{-6})", Both, Kn::CR, Free, "cR * twopi^6", Ll, "1"),
    cmp("cR_multiplicative", "multiplicative amplitude bounds (c_R ≪ M^{-4})", Mul, Kn::CR, Free, "cR * M^4", Ll, "1"),
    // ── L ───────────────────────────────────────────────────────────────
    cmp("L_floor", "base pair", Add, Kn::L, Free, "16", Le, "L"),
    cmp("L_vs_cR", "base pair stress bound", Add, Kn::L, Free, "153 * twopi^(3/2) * cR^(-1)", Lt, "L"),
    cmp("L_above_one", "multiplicative base pair", Mul, Kn::L, Free, "1", Lt, "L"),
    cmp("L_multiplicative_necessary", "multiplicative base pair stress bound", Mul, Kn::L, Free, "18 * twopi^(3/2) * sqrt3", Lt, "multcap"),
    cmp("target_growth_additive", "energy growth target", Add, Kn::L, Free, "grow_lhs", Lt, "grow_rhs"),
    cmp("target_budget_additive", "norm-inflation target (sufficient form)", Add, Kn::L, Free, "budget_lhs", Le, "budget_rhs"),
    cmp("target_K_additive", "norm-inflation target (sufficient form)", Add, Kn::L, Free, "K", Le, "eLT"),
    cmp("target_growth_multiplicative", "energy growth target", Mul, Kn::L, Free, "mgrow_lhs", Lt, "mgrow_rhs"),
    cmp("target_K_multiplicative", "norm-inflation target", Mul, Kn::L, Free, "KTsq", Lt, "L"),
    // ── b ───────────────────────────────────────────────────────────────
    cmp("b_vs_L", "choice of b (b > L²)", Add, Kn::B, Free, "L^2", Lt, "b"),
    sign("b_vs_alpha", "choice of b (αb > 16)", Both, Kn::B, "16 - alpha*b"),
    sign("b_at_least_two", "geometric summation of δ_q (b ≥ 2)", Both, Kn::B, "1 - b"),
    // ── β ───────────────────────────────────────────────────────────────
    sign("beta_positive", "range of β", Both, Kn::Beta, "-beta"),
    sign("beta_below_one", "range of β", Both, Kn::Beta, "beta - 1"),
    sign("beta_vs_alpha", "choice of β (α > 16βb)", Both, Kn::Beta, "16*beta*b - alpha"),
    sign("commutator_exponent", "first commutator stress exponent", Both, Kn::Beta, "-alpha*b/2 + 10/3 + 2*beta*b^2 + 8/3"),
    cmp("base_upper_additive", "base pair stress bound", Add, Kn::Beta, ASmall, "17 * twopi^(3/2) * a^(2*beta*b)", Le, "cR * L"),
    cmp("base_upper_multiplicative", "multiplicative base pair stress bound", Mul, Kn::Beta, ASmall, "2 * twopi^(3/2) * sqrt3 * a^(2*beta*b)", Le, "multcap"),
    // ── a ───────────────────────────────────────────────────────────────
    cmp("base_lower", "geometric summation of δ_q (9 < a^{2βb})", Both, Kn::A, ALarge, "9", Lt, "a^(2*beta*b)"),
    cmp("base_cap", "base pair C¹ bound", Both, Kn::A, ALarge, "L", Le, "basecap"),
    cmp("mL_vs_l", "multiplicative amplitude bounds (m_L ≤ a^26)", Mul, Kn::A, ALarge, "mL", Le, "a^26"),
    cmp("mollifier_gap", "mollified-stress gap (b-side)", Both, Kn::A, ALarge, "b * a^(b*(5 - 4*m)/48) * a^(b*(-49*alpha/24 + (4*m - 5)/24))", Ll, "1"),
    cmp("mollifier_log_floor", "mollified-stress gap (e² ≤ a^{(5-4m)/48})", Both, Kn::A, ALarge, "e^2", Le, "a^((5 - 4*m)/48)"),
    cmp("mollified_stress_gap", "mollified-stress gap", Both, Kn::A, ALarge, "M0max^(1/2) * lam1^((4*m - 5 - 52*alpha)/24) * del2^(-1)", Ll, "1"),
    cmp("mollifier_velocity", "mollification scale (l λ_q⁴ ≤ λ_{q+1}^{-α})", Both, Kn::A, ALarge, "l * lam0^4", Le, "lam1^(-alpha)"),
    cmp("mollifier_time", "mollification scale (4L ≤ l⁻¹)", Both, Kn::A, ALarge, "4 * L", Le, "l^(-1)"),
    cmp("mollifier_ceiling", "mollification scale (l⁻¹ ≤ λ_{q+1}^{2α})", Both, Kn::A, ALarge, "l^(-1)", Le, "lam1^(2*alpha)"),
    cmp("jet_scale_order", "jet scales (r_⊥ ≪ r_∥)", Both, Kn::A, ALarge, "rperp", Ll, "rpar"),
    cmp("jet_length", "jet scales (r_∥ ≪ 1)", Both, Kn::A, ALarge, "rpar", Ll, "1"),
    cmp("jet_frequency", "jet scales (r_⊥⁻¹ ≪ λ_{q+1})", Both, Kn::A, ALarge, "rperp^(-1)", Ll, "lam1"),
    ConstraintSpec { name: "jet_integrality", origin: "jet periodicity (λ_{q+1} r_⊥ ∈ ℕ)", modes: Both, knob: Kn::A, trend: Free, check: CheckSpec::Integral },
    cmp("stationary_phase_ratio", "product estimate hypothesis (2π√3ζ/κ ≤ 1/3, ζ = l⁻⁸)", Both, Kn::A, ALarge, "2 * pi * sqrt3 * l^(-8) * kappa^(-1)", Le, "3^(-1)"),
    ConstraintSpec {
        name: "stationary_phase_order",
        origin: "product estimate hypothesis (ζ⁴(2π√3ζ/κ)^N ≤ 1)",
        modes: Both,
        knob: Kn::A,
        trend: ALarge,
        check: CheckSpec::ExistsN { prefactor: "l^(-32)", ratio: "2 * pi * sqrt3 * l^(-8) * kappa^(-1)", n_min: 1 },
    },
    cmp("commutator_zeta_floor", "commutator lemma hypothesis (1 ≤ ζ, ζ = l⁻⁵)", Both, Kn::A, ALarge, "1", Le, "l^(-5)"),
    cmp("commutator_frequency_gap", "commutator lemma hypothesis (ζ < κ)", Both, Kn::A, ALarge, "l^(-5)", Lt, "kappa"),
    ConstraintSpec {
        name: "commutator_order",
        origin: "commutator lemma hypothesis (ζ^N ≤ κ^{N-2})",
        modes: Both,
        knob: Kn::A,
        trend: ALarge,
        check: CheckSpec::ExistsN { prefactor: "kappa^2", ratio: "l^(-5) * kappa^(-1)", n_min: 3 },
    },
    cmp("reynolds_linear_a", "linear stress", Both, Kn::A, ALarge, "M0min^(-1/2) * lam1^(-61*alpha/6)", Ll, R5),
    cmp("reynolds_linear_b", "linear stress", Both, Kn::A, ALarge, "M0min^(-1/2) * lam1^(-alpha/6)", Ll, R5),
    cmp("reynolds_linear_c", "linear stress", Both, Kn::A, ALarge, "M0min^(-1/2) * lam1^((35*alpha - 12*m)/6)", Ll, R5),
    cmp("reynolds_linear_d", "linear stress", Both, Kn::A, ALarge, "lam1^((12*m - 15 - 148*alpha)/24)", Ll, R5),
    cmp("reynolds_linear_e", "linear stress", Both, Kn::A, ALarge, "lam1^((-122*alpha + 12 - 24*m)/12)", Ll, R5),
    cmp("reynolds_corrector_a", "corrector stress", Both, Kn::A, ALarge, "del1 * lam1^((8*m - 10 + 203*alpha)/12 + (-74*alpha - 4*m + 5)/24)", Ll, R5),
    cmp("reynolds_corrector_b", "corrector stress", Both, Kn::A, ALarge, "M0max^(1/2) * del1^(3/2) * lam1^((11*alpha + 4*m - 5)/12 + (-74*alpha - 4*m + 5)/24)", Ll, R5),
    cmp("reynolds_oscillation_space", "spatial oscillation stress", Both, Kn::A, ALarge, "lam1^((92*alpha + 12*m - 15)/24)", Ll, R10),
    cmp("reynolds_oscillation_time", "temporal oscillation stress", Both, Kn::A, ALarge, "del1 * lam1^((9 - 36*m - 4*alpha)/24)", Ll, R10),
    cmp("reynolds_commutator_additive", "first commutator stress", Add, Kn::A, ALarge, "l^(2/5 - 2*delta) * lam0^4", Ll, "cR * del2 * 5^(-1)"),
    cmp("reynolds_commutator_second", "second commutator stress", Add, Kn::A, ALarge, "l^(2/5 - 2*delta)", Ll, "cR * del2 * 5^(-1)"),
    cmp("reynolds_commutator_multiplicative", "multiplicative commutator stress", Mul, Kn::A, ALarge, "l^(1/2 - 2*delta) * lam0^4", Ll, "del2 * lam0^(-8/3)"),
];

/// Symbols whose value depends on the stage index q.
pub const STAGE_SYMBOLS: &[&str] = &["lam0", "lam1", "lam2", "del1", "del2", "l", "rperp", "rpar", "mu", "kappa"];

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn names_are_unique() {
        let mut seen = HashSet::new();
        for c in CATALOGUE {
            assert!(seen.insert(c.name), "duplicate {}", c.name);
        }
    }
}
