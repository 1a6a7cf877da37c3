//! Parameter search in quantifier order.
//!
//! The scheme fixes its parameters in a definite order: c_R first, then L
//! from its lower bounds, then b above L² and 16/α, then β below α/(16b),
//! and finally a large enough for every "a sufficiently large" estimate.
//! [`search`] follows that order literally. The base is restricted to
//! a = (2^j)^{24/(25−20m)} so that λ_{q+1} r_⊥ is an exact integer; j is
//! found by exponential then binary search over the a-monotone rows.
//!
//! The only two-sided condition is the window 9 < a^{2βb} ≤ c_R L/(17(2π)^{3/2})
//! (additive) or its multiplicative analogue. L is chosen so that the
//! window is at least (9, 18]; if the smallest a satisfying every other row
//! overshoots it, β is halved (moving the window to larger a) and the a
//! search is repeated.

use std::f64::consts::PI;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{FromPrimitive, One};
use serde::Serialize;

use super::{alpha, check_rows, AValue, ConstraintReport, Knob, LedgerContext, LedgerRecord, NoiseMode, ParameterLedger, Trend};
use crate::error::{Error, Result};

/// Default iteration cap (number of row evaluations of the whole ledger).
pub const DEFAULT_MAX_ITERATIONS: usize = 4096;

/// Upper end of the β-window targeted when L is fixed: a^{2βb} ≤ 18.
const WINDOW_TOP: f64 = 18.0;

/// Safety factor on the lower bounds of L (the window needs room).
const L_MARGIN: f64 = 2.0;

/// Relative slack added to L² before taking b above it, so that b > L²
/// also holds after rounding L² to a double.
const B_SLACK: f64 = 1e-6;

/// Inputs of [`search`].
#[derive(Clone, Debug)]
pub struct SearchRequest {
    /// Fractional order m ∈ (13/20, 5/4).
    pub m: BigRational,
    /// Scheme.
    pub mode: NoiseMode,
    /// Targets, stage range and "≪" threshold.
    pub ctx: LedgerContext,
    /// c_R; `None` picks half the largest value the c_R rows allow.
    pub c_r: Option<f64>,
    /// Hölder margin δ; `None` picks half the upper end of its range.
    pub delta_holder: Option<BigRational>,
    /// Noise regularity σ (recorded in the ledger).
    pub sigma: f64,
    /// Iteration cap.
    pub max_iterations: usize,
}

impl SearchRequest {
    /// Request with default c_R, δ, σ = 1 and the default iteration cap.
    pub fn new(m: BigRational, mode: NoiseMode, ctx: LedgerContext) -> Self {
        SearchRequest { m, mode, ctx, c_r: None, delta_holder: None, sigma: 1.0, max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

/// Result of a successful [`search`].
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// The ledger found.
    pub ledger: ParameterLedger,
    /// Its full feasibility report.
    pub report: ConstraintReport,
    /// Ledger evaluations used.
    pub iterations: usize,
    /// Number of times β was halved below α/(16b).
    pub beta_halvings: u32,
    /// a = (2^j)^{24/(25−20m)} with this j.
    pub log2_k: u64,
    /// The row that fails at j − 1 (the constraint fixing a).
    pub binding: String,
    /// ⌊16/α⌋ + 1, the α-driven lower bound on b.
    pub b_alpha_floor: BigUint,
}

/// Machine-readable summary of a [`SearchOutcome`].
#[derive(Clone, Debug, Serialize)]
pub struct SearchSummary {
    /// Ledger.
    pub ledger: LedgerRecord,
    /// Ledger evaluations used.
    pub iterations: usize,
    /// β halvings.
    pub beta_halvings: u32,
    /// j in k = 2^j.
    pub log2_k: u64,
    /// Binding constraint for a.
    pub binding: String,
    /// ⌊16/α⌋ + 1.
    pub b_alpha_floor: String,
    /// Feasibility report of the returned ledger.
    pub report: ConstraintReport,
}

impl SearchOutcome {
    /// Machine-readable summary.
    pub fn summary(&self) -> SearchSummary {
        SearchSummary {
            ledger: self.ledger.record(),
            iterations: self.iterations,
            beta_halvings: self.beta_halvings,
            log2_k: self.log2_k,
            binding: self.binding.clone(),
            b_alpha_floor: self.b_alpha_floor.to_string(),
            report: self.report.clone(),
        }
    }

    /// Human-readable text.
    pub fn render_text(&self) -> String {
        let l = &self.ledger;
        let mut s = format!("ledger search ({} scheme, m = {})\n", l.mode, l.m);
        s += &format!("  c_R   = {:.6e}\n  L     = {:.6e}\n  b     = {}\n", l.c_r, l.big_l, l.b);
        s += &format!("  beta  = {}  (alpha/(16 b) halved {} times)\n", l.beta, self.beta_halvings);
        s += &format!("  a     = (2^{})^(24/(25-20m)), ln a = {:.6e}\n", self.log2_k, l.ln_a());
        s += &format!("  delta = {}\n  binding constraint for a: {}\n", l.delta_holder, self.binding);
        s += &format!("  16/alpha floor for b: {}\n  evaluations: {}\n", self.b_alpha_floor, self.iterations);
        s += &self.report.render_text();
        s
    }

    /// key=value lines.
    pub fn render_kv(&self) -> String {
        let l = &self.ledger;
        let mut s = format!(
            "m={}\na={}\nln_a={:.12e}\nb={}\nbeta={}\nL={:.12e}\ncR={:.12e}\ndelta={}\nsigma={:.12e}\n",
            l.m,
            l.a.describe(),
            l.ln_a(),
            l.b,
            l.beta,
            l.big_l,
            l.c_r,
            l.delta_holder,
            l.sigma
        );
        s += &format!(
            "beta_halvings={}\nlog2_k={}\nbinding={}\nb_alpha_floor={}\niterations={}\n",
            self.beta_halvings, self.log2_k, self.binding, self.b_alpha_floor, self.iterations
        );
        s += &self.report.render_kv();
        s
    }
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn int(b: &BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(b.clone()))
}

fn floor_plus_one(r: &BigRational) -> BigUint {
    (r.floor().to_integer() + BigInt::one()).to_biguint().unwrap_or_else(BigUint::one)
}

/// Default c_R: half the largest value allowed by the c_R rows.
pub fn default_c_r(mode: NoiseMode, ctx: &LedgerContext) -> f64 {
    let eps = ctx.epsilon;
    let m = ctx.geometry_m;
    let mut c = (eps * (2.0 * PI).powi(-6)).min((eps / m).powi(4));
    if mode == NoiseMode::Multiplicative {
        c = c.min(eps / m.powi(4));
    }
    0.5 * c
}

/// Default δ: half the upper end of the mode's range.
pub fn default_delta(mode: NoiseMode) -> BigRational {
    match mode {
        NoiseMode::Additive => q(1, 60),
        NoiseMode::Multiplicative => q(1, 24),
    }
}

fn ln_multcap(c_r: f64, l: f64) -> f64 {
    c_r.ln() + l - 0.25 * l.ln() - (2.0 * l + 13.0).ln() - 0.5 * l.powf(0.25)
}

/// Initial L: the additive lower bounds with a factor-2 margin, or the
/// smallest L whose multiplicative cap leaves the window (9, 18].
fn initial_l(mode: NoiseMode, c_r: f64) -> f64 {
    let tp = (2.0 * PI).powf(1.5);
    match mode {
        NoiseMode::Additive => (L_MARGIN * 153.0 * tp / c_r).max(16.0),
        NoiseMode::Multiplicative => {
            let target = (2.0 * WINDOW_TOP * tp * 3f64.sqrt()).ln();
            let f = |l: f64| ln_multcap(c_r, l) - target;
            let (mut lo, mut hi) = (2.0, 4.0);
            while f(hi) < 0.0 {
                lo = hi;
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        }
    }
}

struct Counter {
    used: usize,
    cap: usize,
}

impl Counter {
    fn check(&mut self, l: &ParameterLedger, ctx: &LedgerContext, keep: impl Fn(Knob, Trend) -> bool, binding: &str) -> Result<ConstraintReport> {
        if self.used >= self.cap {
            return Err(Error::SearchExhausted { iterations: self.used, binding: binding.to_string() });
        }
        self.used += 1;
        Ok(check_rows(l, ctx, |s| keep(s.knob, s.trend)))
    }
}

fn first_failure(r: &ConstraintReport) -> String {
    r.results
        .iter()
        .filter(|c| !c.pass)
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
        .map(|c| c.name.clone())
        .unwrap_or_default()
}

/// Find a ledger passing every catalogued row for stages 0..=q_max.
pub fn search(req: &SearchRequest) -> Result<SearchOutcome> {
    let m = &req.m;
    if !(m > &q(13, 20) && m < &q(5, 4)) {
        return Err(Error::InvalidArgument(format!("m = {m} outside (13/20, 5/4)")));
    }
    let ctx = &req.ctx;
    let mode = req.mode;
    let al = alpha(m);
    let c_r = req.c_r.unwrap_or_else(|| default_c_r(mode, ctx));
    if !(c_r > 0.0 && c_r.is_finite()) {
        return Err(Error::InvalidArgument(format!("c_R = {c_r} must be positive")));
    }
    let mut counter = Counter { used: 0, cap: req.max_iterations };
    let b_alpha_floor = floor_plus_one(&(q(16, 1) / &al));
    let mut ledger = ParameterLedger {
        m: m.clone(),
        a: AValue::power_of_two_root(0),
        b: b_alpha_floor.clone(),
        beta: &al / (q(32, 1) * int(&b_alpha_floor)),
        big_l: initial_l(mode, c_r),
        c_r,
        sigma: req.sigma,
        delta_holder: req.delta_holder.clone().unwrap_or_else(|| default_delta(mode)),
        mode,
        q: 0,
    };

    // Structural and c_R rows: nothing to tune, so a failure is final.
    let r = counter.check(&ledger, ctx, |k, _| matches!(k, Knob::Structural | Knob::CR), "structural")?;
    if !r.pass {
        return Err(Error::SearchExhausted { iterations: counter.used, binding: first_failure(&r) });
    }

    // L: start from the lower bounds, double until every L row holds.
    loop {
        let r = counter.check(&ledger, ctx, |k, _| k == Knob::L, "L")?;
        if r.pass {
            break;
        }
        if !ledger.big_l.is_finite() || ledger.big_l > 1e150 {
            return Err(Error::SearchExhausted { iterations: counter.used, binding: first_failure(&r) });
        }
        ledger.big_l *= 2.0;
    }

    // b > L² ∨ 16/α.
    let mut b = b_alpha_floor.clone();
    if mode == NoiseMode::Additive {
        let l2 = ledger.big_l * ledger.big_l * (1.0 + B_SLACK);
        let bl = BigUint::from_f64(l2.floor()).ok_or_else(|| Error::Derivation(format!("L² = {l2} not representable")))? + 1u32;
        b = b.max(bl);
    }
    ledger.b = b;
    loop {
        let r = counter.check(&ledger, ctx, |k, _| k == Knob::B, "b")?;
        if r.pass {
            break;
        }
        ledger.b = &ledger.b * 2u32;
    }

    // β = α/(16 b 2^s), then the smallest a passing the a-monotone rows.
    let base_beta = &al / (q(16, 1) * int(&ledger.b));
    let mut s: u32 = 1;
    loop {
        ledger.beta = &base_beta / BigRational::from_integer(BigInt::one() << s);
        let r = counter.check(&ledger, ctx, |k, t| k == Knob::Beta && t != Trend::ASmall, "beta")?;
        if !r.pass {
            return Err(Error::SearchExhausted { iterations: counter.used, binding: first_failure(&r) });
        }

        let a_rows = |k: Knob, _t: Trend| k == Knob::A;
        let passes = |j: u64, l: &mut ParameterLedger, c: &mut Counter| -> Result<ConstraintReport> {
            l.a = AValue::power_of_two_root(j);
            c.check(l, ctx, a_rows, "a")
        };
        let mut hi: u64 = 1;
        while !passes(hi, &mut ledger, &mut counter)?.pass {
            if hi > (1 << 40) {
                return Err(Error::SearchExhausted { iterations: counter.used, binding: "a".into() });
            }
            hi *= 2;
        }
        let mut lo = hi / 2;
        let mut binding = if lo == 0 { String::new() } else { first_failure(&passes(lo, &mut ledger, &mut counter)?) };
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let r = passes(mid, &mut ledger, &mut counter)?;
            if r.pass {
                hi = mid;
            } else {
                lo = mid;
                binding = first_failure(&r);
            }
        }
        ledger.a = AValue::power_of_two_root(hi);

        let full = counter.check(&ledger, ctx, |_, _| true, "full")?;
        if full.pass {
            return Ok(SearchOutcome {
                ledger,
                report: full,
                iterations: counter.used,
                beta_halvings: s,
                log2_k: hi,
                binding: if binding.is_empty() { "none".into() } else { binding },
                b_alpha_floor,
            });
        }
        // Only the upper β-window rows may fail here; anything else means
        // a row is not monotone in a, which the search cannot repair.
        let window_only = full.results.iter().filter(|c| !c.pass).all(|c| c.knob == Knob::Beta && c.declared_trend == Trend::ASmall);
        if !window_only {
            return Err(Error::SearchExhausted { iterations: counter.used, binding: first_failure(&full) });
        }
        s += 1;
        if s > 256 {
            return Err(Error::SearchExhausted { iterations: counter.used, binding: first_failure(&full) });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{check_feasibility, derive, p_star};
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    fn ctx() -> LedgerContext {
        LedgerContext::with_geometry().unwrap()
    }

    #[test]
    fn round_trip_for_three_orders_both_modes() {
        let ctx = ctx();
        for mode in [NoiseMode::Additive, NoiseMode::Multiplicative] {
            for (n, d) in [(7, 10), (1, 1), (6, 5)] {
                let out = search(&SearchRequest::new(q(n, d), mode, ctx.clone())).unwrap();
                let again = check_feasibility(&out.ledger, &ctx);
                assert!(again.pass, "{mode} m={n}/{d}: {:?}", again.failed);
                assert_eq!(again, out.report);
                for qq in 0..=ctx.q_max {
                    let mut l = out.ledger.clone();
                    l.q = qq;
                    assert!(derive(&l).unwrap().exponents.routes_agree);
                }
            }
        }
    }

    #[test]
    fn b_grows_as_alpha_shrinks() {
        let ctx = ctx();
        let one = search(&SearchRequest::new(q(1, 1), NoiseMode::Multiplicative, ctx.clone())).unwrap();
        let near = search(&SearchRequest::new(q(6, 5), NoiseMode::Multiplicative, ctx.clone())).unwrap();
        assert!(near.ledger.b > one.ledger.b);
        assert_eq!(one.b_alpha_floor, BigUint::from(7681u32));
        assert_eq!(near.b_alpha_floor, BigUint::from(38401u32));
        let add_one = search(&SearchRequest::new(q(1, 1), NoiseMode::Additive, ctx.clone())).unwrap();
        let add_near = search(&SearchRequest::new(q(6, 5), NoiseMode::Additive, ctx)).unwrap();
        assert!(add_near.ledger.b >= add_one.ledger.b);
        assert!(add_near.b_alpha_floor > add_one.b_alpha_floor);
    }

    #[test]
    fn multiplicative_cap_holds_on_direct_re_evaluation() {
        let ctx = ctx();
        let out = search(&SearchRequest::new(q(1, 1), NoiseMode::Multiplicative, ctx)).unwrap();
        let l = &out.ledger;
        let cap = l.c_r * l.big_l.exp() / (l.big_l.powf(0.25) * (2.0 * l.big_l + 13.0) * (0.5 * l.big_l.powf(0.25)).exp());
        let tp = (2.0 * PI).powf(1.5);
        assert!(cap >= 18.0 * tp * 3f64.sqrt());
        // a^{2βb} enters the same bound with the factor 2(2π)^{3/2}√3.
        let x = (2.0 * ratio(&l.beta) * l.b.to_f64().unwrap() * l.ln_a()).exp();
        assert!(2.0 * tp * 3f64.sqrt() * x <= cap);
        assert!(x > 9.0);
    }

    fn ratio(r: &BigRational) -> f64 {
        super::super::ratio_to_f64(r)
    }

    #[test]
    fn a_monotone_rows_flip_at_most_once() {
        let ctx = ctx();
        for mode in [NoiseMode::Additive, NoiseMode::Multiplicative] {
            let out = search(&SearchRequest::new(q(1, 1), mode, ctx.clone())).unwrap();
            let j0 = out.log2_k;
            let mut history: std::collections::HashMap<String, Vec<bool>> = Default::default();
            for i in 0..20u64 {
                let mut l = out.ledger.clone();
                l.a = AValue::power_of_two_root(1 + i * (2 * j0) / 19);
                for r in check_feasibility(&l, &ctx).results {
                    if r.declared_trend != Trend::Free {
                        history.entry(r.name).or_default().push(r.pass);
                    }
                }
            }
            for (name, h) in history {
                let flips = h.windows(2).filter(|w| w[0] != w[1]).count();
                assert!(flips <= 1, "{mode} {name}: {h:?}");
            }
        }
    }

    #[test]
    fn out_of_range_m_is_rejected() {
        let r = search(&SearchRequest::new(q(5, 4), NoiseMode::Additive, LedgerContext::new(10.0)));
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn iteration_cap_reports_binding_constraint() {
        let mut req = SearchRequest::new(q(1, 1), NoiseMode::Additive, LedgerContext::new(10.0));
        req.max_iterations = 6;
        match search(&req) {
            Err(Error::SearchExhausted { iterations, binding }) => {
                assert_eq!(iterations, 6);
                assert!(!binding.is_empty());
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn p_star_lies_in_one_two(num in 651i64..1250) {
            let m = q(num, 1000);
            prop_assume!(m > q(13, 20) && m < q(5, 4));
            let ps = p_star(&m, &alpha(&m)).unwrap();
            prop_assert!(ps > q(1, 1) && ps < q(2, 1));
        }
    }
}
