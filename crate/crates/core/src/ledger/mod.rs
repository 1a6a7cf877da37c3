//! Exact-exponent parameter ledger.
//!
//! The scheme's frequencies λ_q = a^{b^q} overflow any float after one
//! stage, so every derived quantity is held as a [`LogQuantity`]: an exact
//! rational exponent of a plus a floating-point log prefactor. Structural
//! exponent conditions are decided in exact rational arithmetic; conditions
//! that involve the numeric values of L, c_R or a are decided in log space.

pub mod catalogue;
pub mod expr;
pub mod search;

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

pub use catalogue::{CheckSpec, ConstraintSpec, Knob, Modes, Rel, Trend, CATALOGUE};
pub use expr::{parse_rational, ratio_to_f64, LogQuantity, Monomial, Poly, Var, VarValues};
pub use search::{search, SearchOutcome, SearchRequest};

use crate::error::{Error, Result};
use crate::geometry::DirectionSet;
use crate::tolerances::LEDGER_MUCH_LESS;

/// Samples used to estimate the geometric constant M for the ledger.
pub const GEOMETRY_M_SAMPLES: usize = 4096;

/// Largest N tried when a hypothesis asks for the existence of an order N.
pub const MAX_HYPOTHESIS_ORDER: u64 = 1_000_000_000;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Noise type of the scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NoiseMode {
    /// Additive noise (splitting u = v + z).
    Additive,
    /// Linear multiplicative noise (transformation u = e^{B} v).
    Multiplicative,
}

impl NoiseMode {
    /// Lower-case name used in reports and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            NoiseMode::Additive => "additive",
            NoiseMode::Multiplicative => "multiplicative",
        }
    }

    fn applies(self, modes: Modes) -> bool {
        matches!(
            (self, modes),
            (_, Modes::Both) | (NoiseMode::Additive, Modes::Additive) | (NoiseMode::Multiplicative, Modes::Multiplicative)
        )
    }
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(NoiseMode::Additive),
            "multiplicative" => Ok(NoiseMode::Multiplicative),
            _ => Err(Error::InvalidArgument(format!("unknown mode '{s}' (additive|multiplicative)"))),
        }
    }
}

/// α = (5 − 4m)/480.
pub fn alpha(m: &BigRational) -> BigRational {
    (q(5, 1) - q(4, 1) * m) / q(480, 1)
}

/// p* = (40m − 14)/(170α − 19 + 44m); `None` when the denominator vanishes.
pub fn p_star(m: &BigRational, alpha: &BigRational) -> Option<BigRational> {
    let den = q(170, 1) * alpha - q(19, 1) + q(44, 1) * m;
    if den.is_zero() {
        None
    } else {
        Some((q(40, 1) * m - q(14, 1)) / den)
    }
}

/// Exponent e = (25 − 20m)/24 with λ_{q+1} r_⊥ = a^{e b^{q+1}}.
pub fn root_exponent(m: &BigRational) -> BigRational {
    (q(25, 1) - q(20, 1) * m) / q(24, 1)
}

fn ln_biguint(k: &BigUint) -> f64 {
    let bits = k.bits();
    if bits <= 1000 {
        k.to_f64().unwrap_or(f64::INFINITY).ln()
    } else {
        let s = bits - 64;
        (k >> s).to_f64().unwrap_or(f64::INFINITY).ln() + s as f64 * LN_2
    }
}

/// The base a of the frequency tower.
#[derive(Clone, Debug, PartialEq)]
pub enum AValue {
    /// a = k^{24/(25−20m)} with k ∈ ℕ, so that a^{(25−20m)/24} = k exactly.
    Root {
        /// k = a^{(25−20m)/24}.
        k: BigUint,
    },
    /// A plain real a (integrality is then checked numerically).
    Real(f64),
}

impl AValue {
    /// a = (2^j)^{24/(25−20m)}.
    pub fn power_of_two_root(j: u64) -> Self {
        AValue::Root { k: BigUint::one() << j }
    }

    /// ln a.
    pub fn ln_a(&self, m: &BigRational) -> f64 {
        match self {
            AValue::Root { k } => ln_biguint(k) / ratio_to_f64(&root_exponent(m)),
            AValue::Real(a) => a.ln(),
        }
    }

    /// Parse `k:2^J`, `k:<integer>` or a real number.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad value for a: '{s}' (use a real, k:<int> or k:2^<j>)"));
        if let Some(rest) = s.strip_prefix("k:") {
            if let Some(j) = rest.strip_prefix("2^") {
                let j: u64 = j.parse().map_err(|_| bad())?;
                return Ok(AValue::power_of_two_root(j));
            }
            let k: BigUint = rest.parse().map_err(|_| bad())?;
            if k.is_zero() {
                return Err(bad());
            }
            return Ok(AValue::Root { k });
        }
        let a: f64 = s.parse().map_err(|_| bad())?;
        if !(a > 1.0 && a.is_finite()) {
            return Err(bad());
        }
        Ok(AValue::Real(a))
    }

    /// Display form (`k:2^J`, `k:<int>` or the real value).
    pub fn describe(&self) -> String {
        match self {
            AValue::Root { k } => {
                let tz = k.trailing_zeros().unwrap_or(0);
                if !k.is_zero() && (k >> tz) == BigUint::one() {
                    format!("k:2^{tz}")
                } else {
                    format!("k:{k}")
                }
            }
            AValue::Real(a) => format!("{a:e}"),
        }
    }
}

/// Inputs of the scheme's parameter choices.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterLedger {
    /// Fractional order m ∈ (13/20, 5/4).
    pub m: BigRational,
    /// Base of the frequency tower.
    pub a: AValue,
    /// Tower exponent base b ∈ ℕ.
    pub b: BigUint,
    /// Decay rate β of δ_q = λ_q^{−2β}.
    pub beta: BigRational,
    /// L (stopping level and growth rate).
    pub big_l: f64,
    /// Smallness constant c_R.
    pub c_r: f64,
    /// Noise regularity σ.
    pub sigma: f64,
    /// Hölder margin δ of the stopping time.
    pub delta_holder: BigRational,
    /// Noise type.
    pub mode: NoiseMode,
    /// Stage index used by [`derive`].
    pub q: u32,
}

/// Machine-readable form of a [`ParameterLedger`].
#[derive(Clone, Debug, Serialize)]
pub struct LedgerRecord {
    /// m.
    pub m: String,
    /// a (`k:2^J` form or a real).
    pub a: String,
    /// ln a.
    pub ln_a: f64,
    /// b.
    pub b: String,
    /// β.
    pub beta: String,
    /// L.
    pub big_l: f64,
    /// c_R.
    pub c_r: f64,
    /// σ.
    pub sigma: f64,
    /// δ.
    pub delta_holder: String,
    /// Mode.
    pub mode: NoiseMode,
    /// Stage.
    pub q: u32,
}

impl ParameterLedger {
    /// Machine-readable record.
    pub fn record(&self) -> LedgerRecord {
        LedgerRecord {
            m: self.m.to_string(),
            a: self.a.describe(),
            ln_a: self.ln_a(),
            b: self.b.to_string(),
            beta: self.beta.to_string(),
            big_l: self.big_l,
            c_r: self.c_r,
            sigma: self.sigma,
            delta_holder: self.delta_holder.to_string(),
            mode: self.mode,
            q: self.q,
        }
    }

    /// ln a.
    pub fn ln_a(&self) -> f64 {
        self.a.ln_a(&self.m)
    }

    /// α for this m.
    pub fn alpha(&self) -> BigRational {
        alpha(&self.m)
    }

    /// The time weight M₀ of this scheme.
    pub fn m0(&self) -> M0 {
        M0 { mode: self.mode, big_l: self.big_l }
    }

    fn b_rational(&self) -> BigRational {
        BigRational::from_integer(BigInt::from(self.b.clone()))
    }

    fn bpow(&self, k: u32) -> BigRational {
        num_traits::pow(self.b_rational(), k as usize)
    }

    fn var_values(&self) -> VarValues {
        let al = self.alpha();
        let num = q(40, 1) * &self.m - q(14, 1);
        let den = q(170, 1) * &al - q(19, 1) + q(44, 1) * &self.m;
        let pinv = if num.is_zero() { BigRational::zero() } else { den / num };
        VarValues([self.m.clone(), al, self.beta.clone(), self.b_rational(), self.delta_holder.clone(), pinv])
    }
}

/// Closed-form time weight M₀(t).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct M0 {
    /// Scheme.
    pub mode: NoiseMode,
    /// L.
    pub big_l: f64,
}

impl M0 {
    /// ln M₀(t): 4 ln L + 4Lt (additive) or 4Lt + 2L (multiplicative).
    pub fn ln_at(&self, t: f64) -> f64 {
        match self.mode {
            NoiseMode::Additive => 4.0 * self.big_l.ln() + 4.0 * self.big_l * t,
            NoiseMode::Multiplicative => 4.0 * self.big_l * t + 2.0 * self.big_l,
        }
    }

    /// M₀(t).
    pub fn at(&self, t: f64) -> f64 {
        self.ln_at(t).exp()
    }

    /// Formula.
    pub fn describe(&self) -> &'static str {
        match self.mode {
            NoiseMode::Additive => "L^4 exp(4 L t)",
            NoiseMode::Multiplicative => "exp(4 L t + 2 L)",
        }
    }
}

/// Exponents of the jet scales relative to λ_{q+1}, computed two ways.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleExponents {
    /// r_∥ = λ_{q+1}^{(13−20m)/12}.
    pub r_par: String,
    /// r_⊥ = λ_{q+1}^{(1−20m)/24}.
    pub r_perp: String,
    /// μ = λ_{q+1}^{2m−1+(25−20m)/24}.
    pub mu: String,
    /// μ exponent via λ_{q+1}^{2m−1} r_∥ / r_⊥.
    pub mu_via_ratio: String,
    /// a-exponent of λ_{q+1} r_⊥ as (1 + r_⊥ exponent) b^{q+1}.
    pub lambda_r_perp: String,
    /// a-exponent of λ_{q+1} r_⊥ as (25−20m)/24 · b^{q+1}.
    pub lambda_r_perp_direct: String,
    /// Whether both routes agree exactly.
    pub routes_agree: bool,
}

/// Derived parameters of stage q → q+1.
#[derive(Clone, Debug, PartialEq)]
pub struct StageParameters {
    /// Stage index.
    pub q: u32,
    /// λ_q.
    pub lambda_q: LogQuantity,
    /// λ_{q+1}.
    pub lambda_q1: LogQuantity,
    /// δ_{q+1}.
    pub delta_q1: LogQuantity,
    /// δ_{q+2}.
    pub delta_q2: LogQuantity,
    /// l = λ_{q+1}^{−3α/2} λ_q^{−2}.
    pub l: LogQuantity,
    /// r_⊥.
    pub r_perp: LogQuantity,
    /// r_∥.
    pub r_par: LogQuantity,
    /// μ.
    pub mu: LogQuantity,
    /// α.
    pub alpha: BigRational,
    /// p*.
    pub p_star: BigRational,
    /// M₀.
    pub m0: M0,
    /// Exponents relative to λ_{q+1}.
    pub exponents: ScaleExponents,
}

/// Machine-readable [`StageParameters`] (log₁₀-free: exact a-exponents).
#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    /// Stage.
    pub q: u32,
    /// α.
    pub alpha: String,
    /// p*.
    pub p_star: String,
    /// p* as a decimal.
    pub p_star_value: f64,
    /// Named quantities: (name, exact a-exponent, ln prefactor).
    pub quantities: Vec<(String, String, f64)>,
    /// Exponents relative to λ_{q+1}.
    pub exponents: ScaleExponents,
    /// M₀ formula.
    pub m0: String,
}

impl StageParameters {
    /// Machine-readable record.
    pub fn record(&self) -> StageRecord {
        let named = [
            ("lambda_q", &self.lambda_q),
            ("lambda_q1", &self.lambda_q1),
            ("delta_q1", &self.delta_q1),
            ("delta_q2", &self.delta_q2),
            ("l", &self.l),
            ("r_perp", &self.r_perp),
            ("r_par", &self.r_par),
            ("mu", &self.mu),
        ];
        StageRecord {
            q: self.q,
            alpha: self.alpha.to_string(),
            p_star: self.p_star.to_string(),
            p_star_value: ratio_to_f64(&self.p_star),
            quantities: named
                .iter()
                .map(|(n, v)| (n.to_string(), v.coeff_ln_a.to_string(), v.additive_log))
                .collect(),
            exponents: self.exponents.clone(),
            m0: self.m0.describe().to_string(),
        }
    }
}

/// Derive the stage parameters for `ledger.q`.
pub fn derive(ledger: &ParameterLedger) -> Result<StageParameters> {
    let m = &ledger.m;
    if !(m > &q(13, 20) && m < &q(5, 4)) {
        return Err(Error::InvalidArgument(format!("m = {m} outside (13/20, 5/4)")));
    }
    if ledger.b.is_zero() {
        return Err(Error::InvalidArgument("b must be a positive integer".into()));
    }
    let al = alpha(m);
    let ps = p_star(m, &al).ok_or_else(|| Error::Derivation("p* has a vanishing denominator".into()))?;
    if !(ps > q(1, 1) && ps < q(2, 1)) {
        return Err(Error::Derivation(format!("p* = {ps} outside (1, 2)")));
    }
    let qq = ledger.q;
    let bq = ledger.bpow(qq);
    let bq1 = ledger.bpow(qq + 1);
    let bq2 = ledger.bpow(qq + 2);
    let two_beta = q(2, 1) * &ledger.beta;
    let r_par_e = (q(13, 1) - q(20, 1) * m) / q(12, 1);
    let r_perp_e = (q(1, 1) - q(20, 1) * m) / q(24, 1);
    let mu_e = q(2, 1) * m - q(1, 1) + root_exponent(m);
    let mu_ratio = q(2, 1) * m - q(1, 1) + &r_par_e - &r_perp_e;
    let lrp = (q(1, 1) + &r_perp_e) * &bq1;
    let lrp_direct = root_exponent(m) * &bq1;
    let exponents = ScaleExponents {
        r_par: r_par_e.to_string(),
        r_perp: r_perp_e.to_string(),
        mu: mu_e.to_string(),
        mu_via_ratio: mu_ratio.to_string(),
        lambda_r_perp: lrp.to_string(),
        lambda_r_perp_direct: lrp_direct.to_string(),
        routes_agree: lrp == lrp_direct && mu_e == mu_ratio,
    };
    Ok(StageParameters {
        q: qq,
        lambda_q: LogQuantity::power_of_a(bq.clone()),
        lambda_q1: LogQuantity::power_of_a(bq1.clone()),
        delta_q1: LogQuantity::power_of_a(-&two_beta * &bq1),
        delta_q2: LogQuantity::power_of_a(-&two_beta * &bq2),
        l: LogQuantity::power_of_a(-(q(3, 2) * &al) * &bq1 - q(2, 1) * &bq),
        r_perp: LogQuantity::power_of_a(&r_perp_e * &bq1),
        r_par: LogQuantity::power_of_a(&r_par_e * &bq1),
        mu: LogQuantity::power_of_a(&mu_e * &bq1),
        alpha: al,
        p_star: ps,
        m0: ledger.m0(),
        exponents,
    })
}

/// Everything a feasibility check needs besides the ledger itself.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LedgerContext {
    /// Geometric constant M.
    pub geometry_m: f64,
    /// Norm-inflation factor K > 1.
    pub k_target: f64,
    /// Time horizon T > 0.
    pub t_target: f64,
    /// Probability target ι ∈ (0, 1) (used by the noise module, recorded
    /// here).
    pub iota: f64,
    /// Tr(GG*).
    pub trace_gg: f64,
    /// Stages 0..=q_max are checked.
    pub q_max: u32,
    /// Operational meaning of "≪".
    pub epsilon: f64,
}

impl LedgerContext {
    /// Defaults K = 2, T = 1, ι = 1/2, Tr(GG*) = 1, q_max = 2, ε = 10⁻².
    pub fn new(geometry_m: f64) -> Self {
        LedgerContext {
            geometry_m,
            k_target: 2.0,
            t_target: 1.0,
            iota: 0.5,
            trace_gg: 1.0,
            q_max: 2,
            epsilon: LEDGER_MUCH_LESS,
        }
    }

    /// Context with M computed from the direction set.
    pub fn with_geometry() -> Result<Self> {
        Ok(Self::new(geometry_constant()?))
    }

    fn validate(&self) -> Result<()> {
        let ok = self.geometry_m > 0.0
            && self.k_target > 1.0
            && self.t_target > 0.0
            && self.iota > 0.0
            && self.iota < 1.0
            && self.trace_gg >= 0.0
            && self.epsilon > 0.0
            && self.epsilon <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid ledger context {self:?}")))
        }
    }
}

/// M of the geometric lemma, sampled with a fixed seed.
pub fn geometry_constant() -> Result<f64> {
    static M: OnceLock<f64> = OnceLock::new();
    if let Some(m) = M.get() {
        return Ok(*m);
    }
    let set = DirectionSet::build()?;
    let m = set.constant_m(GEOMETRY_M_SAMPLES, 1).m;
    Ok(*M.get_or_init(|| m))
}

/// Pre-parsed catalogue row.
#[derive(Clone, Debug)]
pub(crate) struct Parsed {
    pub spec: ConstraintSpec,
    pub kind: ParsedCheck,
    pub staged: bool,
}

#[derive(Clone, Debug)]
pub(crate) enum ParsedCheck {
    Sign(Poly, bool),
    Compare(Monomial, Rel, Monomial),
    ExistsN(Monomial, Monomial, u32),
    Integral,
}

fn monomial_staged(m: &Monomial) -> bool {
    m.0.iter().any(|f| catalogue::STAGE_SYMBOLS.contains(&f.name.as_str()))
}

pub(crate) fn parsed_catalogue() -> &'static [Parsed] {
    static P: OnceLock<Vec<Parsed>> = OnceLock::new();
    P.get_or_init(|| {
        CATALOGUE
            .iter()
            .map(|spec| {
                let parse = |s: &str| Monomial::parse(s).unwrap_or_else(|e| panic!("catalogue row {}: {e}", spec.name));
                let (kind, staged) = match spec.check {
                    CheckSpec::Sign { poly, strict } => (
                        ParsedCheck::Sign(
                            Poly::parse(poly).unwrap_or_else(|e| panic!("catalogue row {}: {e}", spec.name)),
                            strict,
                        ),
                        false,
                    ),
                    CheckSpec::Compare { lhs, rel, rhs } => {
                        let (l, r) = (parse(lhs), parse(rhs));
                        let st = monomial_staged(&l) || monomial_staged(&r);
                        (ParsedCheck::Compare(l, rel, r), st)
                    }
                    CheckSpec::ExistsN { prefactor, ratio, n_min } => {
                        let (p, r) = (parse(prefactor), parse(ratio));
                        let st = monomial_staged(&p) || monomial_staged(&r);
                        (ParsedCheck::ExistsN(p, r, n_min), st)
                    }
                    CheckSpec::Integral => (ParsedCheck::Integral, true),
                };
                Parsed { spec: *spec, kind, staged }
            })
            .collect()
    })
}

/// Symbol environment for one stage.
struct Env<'a> {
    ledger: &'a ParameterLedger,
    ctx: &'a LedgerContext,
    vals: VarValues,
    q: u32,
}

impl Env<'_> {
    fn stage_coeff(&self, name: &str) -> Option<BigRational> {
        let l = self.ledger;
        let m = &l.m;
        let al = self.vals.get(Var::Alpha);
        let qq = self.q;
        let two_beta = q(2, 1) * &l.beta;
        Some(match name {
            "lam0" => l.bpow(qq),
            "lam1" => l.bpow(qq + 1),
            "lam2" => l.bpow(qq + 2),
            "del1" => -&two_beta * l.bpow(qq + 1),
            "del2" => -&two_beta * l.bpow(qq + 2),
            "l" => -(q(3, 2) * al) * l.bpow(qq + 1) - q(2, 1) * l.bpow(qq),
            "rperp" => (q(1, 1) - q(20, 1) * m) / q(24, 1) * l.bpow(qq + 1),
            "rpar" => (q(13, 1) - q(20, 1) * m) / q(12, 1) * l.bpow(qq + 1),
            "mu" => (q(2, 1) * m - q(1, 1) + root_exponent(m)) * l.bpow(qq + 1),
            "kappa" => root_exponent(m) * l.bpow(qq + 1),
            _ => return None,
        })
    }

    fn sym(&self, name: &str) -> Result<LogQuantity> {
        if let Some(c) = self.stage_coeff(name) {
            return Ok(LogQuantity::power_of_a(c));
        }
        let l = self.ledger;
        let big_l = l.big_l;
        let (kt, tt) = (self.ctx.k_target, self.ctx.t_target);
        let m0 = l.m0();
        let ln = |x: f64| LogQuantity::from_ln(x);
        Ok(match name {
            "a" => LogQuantity::power_of_a(BigRational::one()),
            "b" => ln(ln_biguint(&l.b)),
            "L" => ln(big_l.ln()),
            "cR" => ln(l.c_r.ln()),
            "M" => ln(self.ctx.geometry_m.ln()),
            "K" => ln(kt.ln()),
            "T" => ln(tt.ln()),
            "trace" => ln(self.ctx.trace_gg.ln()),
            "e" => ln(1.0),
            "pi" => ln(PI.ln()),
            "twopi" => ln((2.0 * PI).ln()),
            "sqrt3" => ln(0.5 * 3f64.ln()),
            "M0max" => ln(m0.ln_at(big_l)),
            "M0min" => ln(m0.ln_at(0.0)),
            "mL" => ln(0.5 * 3f64.ln() + 0.25 * big_l.ln() + 0.5 * big_l.powf(0.25)),
            "basecap" => {
                let ln_a = l.ln_a();
                let x = 1.5 * (2.0 * PI).ln() + 4.0 * ln_a;
                let ln_val = if x > 40.0 { x + (-2.0 * (-x).exp()).ln_1p() } else { (x.exp() - 2.0).ln() } - LN_2;
                LogQuantity { coeff_ln_a: q(4, 1), additive_log: ln_val - 4.0 * ln_a }
            }
            "multcap" => ln(l.c_r.ln() + big_l
                - 0.25 * big_l.ln()
                - (2.0 * big_l + 13.0).ln()
                - 0.5 * big_l.powf(0.25)),
            "grow_lhs" => ln((1.5 + 1.0 / big_l).ln()),
            "grow_rhs" => ln((0.5f64.sqrt() - 0.5).ln() + big_l * tt),
            "budget_lhs" => ln((big_l.powf(0.25) * (2.0 * PI).powf(1.5) + kt * (tt * self.ctx.trace_gg).sqrt()).ln()),
            "budget_rhs" => ln(big_l.ln() + big_l * tt),
            "eLT" => ln(big_l * tt),
            "mgrow_lhs" => ln(1.5f64.ln() + 2.0 * big_l.sqrt()),
            "mgrow_rhs" => ln((0.5f64.sqrt() - 0.5).ln() + 2.0 * big_l * tt),
            "KTsq" => ln(2.0 * (kt.ln() + tt / 2.0).abs().ln()),
            _ => return Err(Error::InvalidArgument(format!("unknown ledger symbol '{name}'"))),
        })
    }

    fn monomial(&self, mono: &Monomial) -> Result<LogQuantity> {
        let mut acc = LogQuantity::from_ln(0.0);
        for f in &mono.0 {
            let e = f.exponent.eval(&self.vals);
            let v = if f.name.is_empty() {
                if !f.constant.is_positive() {
                    return Err(Error::InvalidArgument("non-positive constant in monomial".into()));
                }
                LogQuantity::from_ln(ratio_to_f64(&f.constant).ln()).pow(&e)
            } else {
                self.sym(&f.name)?.pow(&e)
            };
            acc = acc.mul(&v);
        }
        Ok(acc)
    }
}

/// Verdict of one catalogue row (aggregated over stages).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintResult {
    /// Row name.
    pub name: String,
    /// Where the constraint comes from.
    pub origin: String,
    /// Search knob.
    pub knob: Knob,
    /// Declared a-behaviour.
    pub declared_trend: Trend,
    /// a-behaviour computed from the exact exponents.
    pub trend: Trend,
    /// Verdict.
    pub pass: bool,
    /// Margin in natural-log units (positive = satisfied); for exact sign
    /// checks, the negated polynomial value.
    pub margin: f64,
    /// Stage with the smallest margin (staged rows only).
    pub worst_stage: Option<u32>,
    /// Extra information (exact value, order N found, ...).
    pub detail: String,
}

/// Result of [`check_feasibility`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintReport {
    /// Scheme.
    pub mode: NoiseMode,
    /// Ledger checked.
    pub ledger: LedgerRecordCompact,
    /// Highest stage checked.
    pub q_max: u32,
    /// "≪" threshold.
    pub epsilon: f64,
    /// Geometric constant M used.
    pub geometry_m: f64,
    /// One entry per applicable row.
    pub results: Vec<ConstraintResult>,
    /// Names of failing rows.
    pub failed: Vec<String>,
    /// All rows pass.
    pub pass: bool,
}

/// Compact ledger description embedded in reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LedgerRecordCompact {
    /// m.
    pub m: String,
    /// a.
    pub a: String,
    /// b.
    pub b: String,
    /// β.
    pub beta: String,
    /// L.
    pub big_l: f64,
    /// c_R.
    pub c_r: f64,
    /// δ.
    pub delta_holder: String,
}

impl ConstraintReport {
    /// Look up a row.
    pub fn get(&self, name: &str) -> Option<&ConstraintResult> {
        self.results.iter().find(|r| r.name == name)
    }

    /// Human-readable table.
    pub fn render_text(&self) -> String {
        let mut s = format!(
            "ledger check ({} scheme, stages 0..={}, eps = {:e}, M = {:.6e})\n",
            self.mode, self.q_max, self.epsilon, self.geometry_m
        );
        s += &format!(
            "  m = {}, a = {}, b = {}, beta = {}, L = {:.6e}, c_R = {:.6e}, delta = {}\n",
            self.ledger.m, self.ledger.a, self.ledger.b, self.ledger.beta, self.ledger.big_l, self.ledger.c_r, self.ledger.delta_holder
        );
        for r in &self.results {
            s += &format!(
                "  {} {:<36} margin {:>+.6e}{}  [{}]{}\n",
                if r.pass { "PASS" } else { "FAIL" },
                r.name,
                r.margin,
                r.worst_stage.map(|q| format!(" (q = {q})")).unwrap_or_default(),
                r.origin,
                if r.detail.is_empty() { String::new() } else { format!(" {}", r.detail) }
            );
        }
        s += &format!("verdict: {}\n", if self.pass { "PASS" } else { "FAIL" });
        if !self.failed.is_empty() {
            s += &format!("failed: {}\n", self.failed.join(", "));
        }
        s
    }

    /// key=value lines.
    pub fn render_kv(&self) -> String {
        let mut s = String::new();
        s += &format!("mode={}\nq_max={}\nepsilon={:e}\ngeometry_m={:.12e}\n", self.mode, self.q_max, self.epsilon, self.geometry_m);
        for r in &self.results {
            s += &format!(
                "constraint.{}={};margin={:.12e};stage={};trend={:?}\n",
                r.name,
                if r.pass { "pass" } else { "fail" },
                r.margin,
                r.worst_stage.map(|q| q.to_string()).unwrap_or_else(|| "-".into()),
                r.trend
            );
        }
        s += &format!("verdict={}\n", if self.pass { "pass" } else { "fail" });
        s
    }
}

fn trend_of(c: &BigRational) -> Trend {
    if c.is_negative() {
        Trend::ALarge
    } else if c.is_positive() {
        Trend::ASmall
    } else {
        Trend::Free
    }
}

struct StageVerdict {
    pass: bool,
    margin: f64,
    trend: Trend,
    detail: String,
}

fn ceil_rational(r: &BigRational) -> BigInt {
    let (d, m) = r.numer().div_mod_floor(r.denom());
    if m.is_zero() {
        d
    } else {
        d + 1
    }
}

fn evaluate_row(p: &Parsed, env: &Env<'_>, ln_a: f64) -> Result<StageVerdict> {
    Ok(match &p.kind {
        ParsedCheck::Sign(poly, strict) => {
            let v = poly.eval(&env.vals);
            let pass = if *strict { v.is_negative() } else { !v.is_positive() };
            StageVerdict { pass, margin: -ratio_to_f64(&v), trend: Trend::Free, detail: format!("value = {v}") }
        }
        ParsedCheck::Compare(lhs, rel, rhs) => {
            let d = env.monomial(lhs)?.div(&env.monomial(rhs)?);
            let thr = if *rel == Rel::MuchLess { env.ctx.epsilon.ln() } else { 0.0 };
            let v = d.ln_value(ln_a);
            let pass = match rel {
                Rel::Lt => v < thr,
                _ => v <= thr,
            };
            StageVerdict { pass, margin: thr - v, trend: trend_of(&d.coeff_ln_a), detail: String::new() }
        }
        ParsedCheck::ExistsN(pref, ratio, n_min) => {
            let p = env.monomial(pref)?;
            let r = env.monomial(ratio)?;
            let trend = trend_of(&r.coeff_ln_a);
            let n_min = *n_min as u64;
            let exact = p.additive_log == 0.0 && r.additive_log == 0.0;
            let (lp, lr) = (p.ln_value(ln_a), r.ln_value(ln_a));
            if exact && r.coeff_ln_a.is_negative() {
                // Purely a-exponents: N* = ⌈−c_p/c_r⌉ exactly.
                let nstar = ceil_rational(&(-&p.coeff_ln_a / &r.coeff_ln_a)).max(BigInt::from(n_min));
                let nf = nstar.to_f64().unwrap_or(f64::INFINITY);
                let pass = nstar <= BigInt::from(MAX_HYPOTHESIS_ORDER);
                StageVerdict { pass, margin: -(lp + nf * lr), trend, detail: format!("N* = {nstar}") }
            } else if lr < 0.0 {
                let nstar = ((-lp / lr).ceil().max(n_min as f64)).max(0.0);
                let pass = nstar <= MAX_HYPOTHESIS_ORDER as f64;
                StageVerdict { pass, margin: -(lp + nstar * lr), trend, detail: format!("N* = {nstar}") }
            } else {
                let v = lp + n_min as f64 * lr;
                StageVerdict { pass: v <= 0.0, margin: -v, trend, detail: format!("N* = {n_min} (ratio ≥ 1)") }
            }
        }
        ParsedCheck::Integral => {
            let l = env.ledger;
            let bq1 = l.bpow(env.q + 1);
            let r_perp_e = (q(1, 1) - q(20, 1) * &l.m) / q(24, 1);
            let e1 = (q(1, 1) + r_perp_e) * &bq1;
            let e2 = root_exponent(&l.m) * &bq1;
            if e1 != e2 {
                return Ok(StageVerdict {
                    pass: false,
                    margin: -1.0,
                    trend: Trend::Free,
                    detail: format!("exponent routes disagree: {e1} vs {e2}"),
                });
            }
            match &l.a {
                AValue::Root { .. } => {
                    // κ = k^{e2/e}; integral iff e2/e = b^{q+1} ∈ ℕ.
                    let power = &e2 / root_exponent(&l.m);
                    let pass = power.is_integer() && power.is_positive();
                    StageVerdict { pass, margin: if pass { 0.0 } else { -1.0 }, trend: Trend::Free, detail: format!("kappa = k^{power}") }
                }
                AValue::Real(a) => {
                    let k = a.powf(ratio_to_f64(&root_exponent(&l.m)));
                    let pass = k.is_finite() && (k - k.round()).abs() <= 1e-9 * k.max(1.0);
                    StageVerdict {
                        pass,
                        margin: if pass { 0.0 } else { -(k - k.round()).abs() },
                        trend: Trend::Free,
                        detail: format!("a^((25-20m)/24) = {k:.12e}"),
                    }
                }
            }
        }
    })
}

/// Evaluate every applicable catalogue row for stages 0..=q_max.
pub fn check_feasibility(ledger: &ParameterLedger, ctx: &LedgerContext) -> ConstraintReport {
    check_rows(ledger, ctx, |_| true)
}

/// Evaluate only the rows selected by `keep`.
pub(crate) fn check_rows(ledger: &ParameterLedger, ctx: &LedgerContext, keep: impl Fn(&ConstraintSpec) -> bool) -> ConstraintReport {
    let compact = LedgerRecordCompact {
        m: ledger.m.to_string(),
        a: ledger.a.describe(),
        b: ledger.b.to_string(),
        beta: ledger.beta.to_string(),
        big_l: ledger.big_l,
        c_r: ledger.c_r,
        delta_holder: ledger.delta_holder.to_string(),
    };
    let mut results = Vec::new();
    let domain_ok = ledger.big_l > 0.0 && ledger.c_r > 0.0 && ledger.sigma > 0.0 && !ledger.b.is_zero();
    let ctx_err = ctx.validate().err();
    if !domain_ok || ctx_err.is_some() {
        results.push(ConstraintResult {
            name: "parameter_domain".into(),
            origin: "positivity of L, c_R, σ, b and a valid context".into(),
            knob: Knob::Structural,
            declared_trend: Trend::Free,
            trend: Trend::Free,
            pass: false,
            margin: -1.0,
            worst_stage: None,
            detail: ctx_err.map(|e| e.to_string()).unwrap_or_default(),
        });
    } else {
        let ln_a = ledger.ln_a();
        let vals = ledger.var_values();
        for p in parsed_catalogue() {
            if !ledger.mode.applies(p.spec.modes) || !keep(&p.spec) {
                continue;
            }
            let stages: Vec<u32> = if p.staged { (0..=ctx.q_max).collect() } else { vec![0] };
            let mut agg: Option<(StageVerdict, u32)> = None;
            let mut all_pass = true;
            for &qq in &stages {
                let env = Env { ledger, ctx, vals: vals.clone(), q: qq };
                let v = evaluate_row(p, &env, ln_a).unwrap_or_else(|e| StageVerdict {
                    pass: false,
                    margin: f64::NEG_INFINITY,
                    trend: Trend::Free,
                    detail: e.to_string(),
                });
                all_pass &= v.pass;
                let worse = match &agg {
                    None => true,
                    Some((a, _)) => v.margin < a.margin || (a.pass && !v.pass),
                };
                if worse {
                    agg = Some((v, qq));
                }
            }
            let (v, qq) = agg.expect("at least one stage");
            results.push(ConstraintResult {
                name: p.spec.name.to_string(),
                origin: p.spec.origin.to_string(),
                knob: p.spec.knob,
                declared_trend: p.spec.trend,
                trend: v.trend,
                pass: all_pass,
                margin: v.margin,
                worst_stage: p.staged.then_some(qq),
                detail: v.detail,
            });
        }
    }
    let failed: Vec<String> = results.iter().filter(|r| !r.pass).map(|r| r.name.clone()).collect();
    ConstraintReport {
        mode: ledger.mode,
        ledger: compact,
        q_max: ctx.q_max,
        epsilon: ctx.epsilon,
        geometry_m: ctx.geometry_m,
        pass: failed.is_empty(),
        failed,
        results,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger_m1() -> ParameterLedger {
        ParameterLedger {
            m: q(1, 1),
            a: AValue::power_of_two_root(10_000),
            b: BigUint::from(8000u32),
            beta: q(1, 1_000_000_000),
            big_l: 20.0,
            c_r: 1e-3,
            sigma: 1.0,
            delta_holder: q(1, 60),
            mode: NoiseMode::Additive,
            q: 0,
        }
    }

    #[test]
    fn derived_exponents_for_m_one() {
        let s = derive(&ledger_m1()).unwrap();
        assert_eq!(s.alpha, q(1, 480));
        assert_eq!(s.p_star, q(1248, 1217));
        assert_eq!(s.exponents.r_par, "-7/12");
        assert_eq!(s.exponents.r_perp, "-19/24");
        assert_eq!(s.exponents.mu, "29/24");
        assert!(s.exponents.routes_agree);
        // l = λ_1^{−3α/2} λ_0^{−2} with b = 8000: −(1/320)·8000 − 2 = −27.
        assert_eq!(s.l.coeff_ln_a, q(-27, 1));
    }

    #[test]
    fn derive_rejects_out_of_range_m() {
        let mut l = ledger_m1();
        l.m = q(13, 20);
        assert!(derive(&l).is_err());
    }

    #[test]
    fn hand_violated_base_lower_fails_by_name() {
        // a^{2βb} ≈ 1 < 9.
        let l = ledger_m1();
        let ctx = LedgerContext::new(100.0);
        let r = check_feasibility(&l, &ctx);
        assert!(!r.pass);
        assert!(!r.get("base_lower").unwrap().pass);
        assert!(r.failed.contains(&"base_lower".to_string()));
    }

    #[test]
    fn a_values_parse() {
        assert_eq!(AValue::parse("k:2^12").unwrap(), AValue::power_of_two_root(12));
        assert_eq!(AValue::parse("k:7").unwrap(), AValue::Root { k: BigUint::from(7u32) });
        assert_eq!(AValue::parse("3.5").unwrap(), AValue::Real(3.5));
        assert!(AValue::parse("0.5").is_err());
        assert_eq!(AValue::power_of_two_root(40).describe(), "k:2^40");
        let m = q(1, 1);
        let ln = AValue::power_of_two_root(5000).ln_a(&m);
        assert!((ln - 5000.0 * LN_2 * 24.0 / 5.0).abs() < 1e-9 * ln);
    }

    #[test]
    fn declared_trends_match_exponents() {
        let l = ledger_m1();
        let ctx = LedgerContext::new(100.0);
        for mode in [NoiseMode::Additive, NoiseMode::Multiplicative] {
            let mut lm = l.clone();
            lm.mode = mode;
            for r in check_feasibility(&lm, &ctx).results {
                assert_eq!(r.trend, r.declared_trend, "{}", r.name);
            }
        }
    }
}
