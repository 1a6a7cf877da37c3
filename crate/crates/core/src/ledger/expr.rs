//! Exact exponent polynomials and log-space monomials.
//!
//! Constraint expressions are written as text so that the catalogue stays
//! data: exponents are polynomials with rational coefficients in the scheme
//! variables (m, α, β, b, δ, 1/p*), and each side of an inequality is a
//! product of named quantities raised to such exponents.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Variables that may appear in an exponent polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    /// Fractional order m.
    M,
    /// α = (5 − 4m)/480.
    Alpha,
    /// β.
    Beta,
    /// b.
    B,
    /// Hölder margin δ.
    Delta,
    /// 1/p*.
    PInv,
}

impl Var {
    const ALL: [Var; 6] = [Var::M, Var::Alpha, Var::Beta, Var::B, Var::Delta, Var::PInv];

    fn index(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            Var::M => "m",
            Var::Alpha => "alpha",
            Var::Beta => "beta",
            Var::B => "b",
            Var::Delta => "delta",
            Var::PInv => "pinv",
        }
    }

    fn parse(s: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == s)
    }
}

/// Exact values of the exponent variables.
#[derive(Clone, Debug)]
pub struct VarValues(pub [BigRational; 6]);

impl VarValues {
    /// Value of one variable.
    pub fn get(&self, v: Var) -> &BigRational {
        &self.0[v.index()]
    }
}

type Powers = [u32; 6];

/// Polynomial with rational coefficients in [`Var`].
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Powers, BigRational>,
}

impl Poly {
    /// The constant polynomial c.
    pub fn constant(c: BigRational) -> Self {
        let mut p = Poly::default();
        if !c.is_zero() {
            p.terms.insert([0; 6], c);
        }
        p
    }

    /// The monomial v.
    pub fn var(v: Var) -> Self {
        let mut pw = [0; 6];
        pw[v.index()] = 1;
        let mut p = Poly::default();
        p.terms.insert(pw, BigRational::one());
        p
    }

    /// Constant value if the polynomial has no variables.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&[0; 6]).cloned(),
            _ => None,
        }
    }

    fn add_term(&mut self, pw: Powers, c: BigRational) {
        let e = self.terms.entry(pw).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&pw);
        }
    }

    /// p + q.
    pub fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (pw, c) in &o.terms {
            r.add_term(*pw, c.clone());
        }
        r
    }

    /// c·p.
    pub fn scale(&self, c: &BigRational) -> Poly {
        let mut r = Poly::default();
        for (pw, v) in &self.terms {
            r.add_term(*pw, v * c);
        }
        r
    }

    /// p · q.
    pub fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::default();
        for (p1, c1) in &self.terms {
            for (p2, c2) in &o.terms {
                let mut pw = [0; 6];
                for i in 0..6 {
                    pw[i] = p1[i] + p2[i];
                }
                r.add_term(pw, c1 * c2);
            }
        }
        r
    }

    /// Exact evaluation.
    pub fn eval(&self, vals: &VarValues) -> BigRational {
        let mut s = BigRational::zero();
        for (pw, c) in &self.terms {
            let mut t = c.clone();
            for v in Var::ALL {
                let e = pw[v.index()];
                if e > 0 {
                    t *= num_traits::pow(vals.get(v).clone(), e as usize);
                }
            }
            s += t;
        }
        s
    }

    /// Parse a polynomial such as `(4*m - 5 - 52*alpha)/24`.
    pub fn parse(src: &str) -> Result<Poly> {
        let toks = tokenize(src)?;
        let mut p = PolyParser { toks: &toks, pos: 0, src };
        let r = p.expr()?;
        if p.pos != toks.len() {
            return Err(p.err("trailing input"));
        }
        Ok(r)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (pw, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            let a = c.abs();
            let vars: Vec<String> = Var::ALL
                .iter()
                .filter(|v| pw[v.index()] > 0)
                .map(|v| match pw[v.index()] {
                    1 => v.name().to_string(),
                    e => format!("{}^{e}", v.name()),
                })
                .collect();
            if vars.is_empty() || !a.is_one() {
                write!(f, "{a}")?;
                if !vars.is_empty() {
                    write!(f, "*")?;
                }
            }
            write!(f, "{}", vars.join("*"))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let cs: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let st = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = cs[st..i].iter().collect();
            out.push(Tok::Num(s.parse().expect("digits")));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let st = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(cs[st..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::InvalidArgument(format!("unexpected '{c}' in expression '{src}'")));
        }
    }
    Ok(out)
}

struct PolyParser<'a> {
    toks: &'a [Tok],
    pos: usize,
    src: &'a str,
}

impl PolyParser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::InvalidArgument(format!("{msg} at token {} in '{}'", self.pos, self.src))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Poly> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.add(&self.term()?.scale(&-BigRational::one()));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Poly> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = acc.mul(&self.unary()?);
            } else if self.eat('/') {
                let d = self.unary()?;
                let c = d.as_constant().ok_or_else(|| self.err("division by a non-constant"))?;
                if c.is_zero() {
                    return Err(self.err("division by zero"));
                }
                acc = acc.scale(&c.recip());
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Poly> {
        if self.eat('-') {
            return Ok(self.unary()?.scale(&-BigRational::one()));
        }
        let base = self.atom()?;
        if self.eat('^') {
            let e = match self.toks.get(self.pos) {
                Some(Tok::Num(n)) => n.to_u32().ok_or_else(|| self.err("exponent too large"))?,
                _ => return Err(self.err("expected integer exponent")),
            };
            self.pos += 1;
            let mut r = Poly::constant(BigRational::one());
            for _ in 0..e {
                r = r.mul(&base);
            }
            return Ok(r);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Poly> {
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Poly::constant(BigRational::from_integer(n)))
            }
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Var::parse(&s).map(Poly::var).ok_or_else(|| self.err(&format!("unknown variable '{s}'")))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let r = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(r)
            }
            _ => Err(self.err("expected number, variable or '('")),
        }
    }
}

/// One factor `name^exponent` of a monomial (constants have `name` empty).
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    /// Symbol name; empty for a numeric constant.
    pub name: String,
    /// Numeric constant (only when `name` is empty).
    pub constant: BigRational,
    /// Exponent polynomial.
    pub exponent: Poly,
}

/// Product of factors, parsed from text like `17 * twopi^(3/2) * a^(2*beta*b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial(pub Vec<Factor>);

impl Monomial {
    /// Parse a `*`-separated product (top-level `*` only).
    pub fn parse(src: &str) -> Result<Monomial> {
        let mut parts = Vec::new();
        let mut depth = 0i32;
        let mut cur = String::new();
        for c in src.chars() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                _ => {}
            }
            if c == '*' && depth == 0 {
                parts.push(std::mem::take(&mut cur));
            } else {
                cur.push(c);
            }
        }
        parts.push(cur);
        let mut factors = Vec::new();
        for part in parts {
            let part = part.trim();
            if part.is_empty() {
                return Err(Error::InvalidArgument(format!("empty factor in '{src}'")));
            }
            let (base, expo) = match part.find('^') {
                Some(i) => (part[..i].trim(), Poly::parse(&part[i + 1..])?),
                None => (part, Poly::constant(BigRational::one())),
            };
            if let Ok(n) = base.parse::<BigInt>() {
                factors.push(Factor {
                    name: String::new(),
                    constant: BigRational::from_integer(n),
                    exponent: expo,
                });
            } else if base.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                factors.push(Factor {
                    name: base.to_string(),
                    constant: BigRational::zero(),
                    exponent: expo,
                });
            } else {
                return Err(Error::InvalidArgument(format!("bad factor '{part}' in '{src}'")));
            }
        }
        Ok(Monomial(factors))
    }
}

/// value = exp(additive_log) · a^{coeff_ln_a}.
#[derive(Clone, Debug, PartialEq)]
pub struct LogQuantity {
    /// Exact exponent of a.
    pub coeff_ln_a: BigRational,
    /// Natural log of the prefactor.
    pub additive_log: f64,
}

impl LogQuantity {
    /// The number exp(x).
    pub fn from_ln(x: f64) -> Self {
        LogQuantity { coeff_ln_a: BigRational::zero(), additive_log: x }
    }

    /// a^c.
    pub fn power_of_a(c: BigRational) -> Self {
        LogQuantity { coeff_ln_a: c, additive_log: 0.0 }
    }

    /// Product.
    pub fn mul(&self, o: &LogQuantity) -> LogQuantity {
        LogQuantity {
            coeff_ln_a: &self.coeff_ln_a + &o.coeff_ln_a,
            additive_log: self.additive_log + o.additive_log,
        }
    }

    /// Quotient.
    pub fn div(&self, o: &LogQuantity) -> LogQuantity {
        LogQuantity {
            coeff_ln_a: &self.coeff_ln_a - &o.coeff_ln_a,
            additive_log: self.additive_log - o.additive_log,
        }
    }

    /// Rational power.
    pub fn pow(&self, e: &BigRational) -> LogQuantity {
        LogQuantity {
            coeff_ln_a: &self.coeff_ln_a * e,
            additive_log: self.additive_log * ratio_to_f64(e),
        }
    }

    /// Natural log of the value for a given ln a.
    pub fn ln_value(&self, ln_a: f64) -> f64 {
        let c = ratio_to_f64(&self.coeff_ln_a);
        if c == 0.0 {
            self.additive_log
        } else {
            c * ln_a + self.additive_log
        }
    }

    /// Exact asymptotic comparison with another quantity as a → ∞: the
    /// sign of the difference of a-exponents, `None` when they agree.
    pub fn asymptotic_cmp(&self, o: &LogQuantity) -> Option<std::cmp::Ordering> {
        match self.coeff_ln_a.cmp(&o.coeff_ln_a) {
            std::cmp::Ordering::Equal => None,
            ord => Some(ord),
        }
    }
}

/// Rational to f64 (±∞ beyond range).
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| if r.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Exact rational from a decimal string (`0.7`, `-1.25`), a fraction
/// (`7/10`) or an integer.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("not a rational number: '{s}'"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let (ip, fp) = body.split_once('.').unwrap_or((body, ""));
    if ip.is_empty() && fp.is_empty() || !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{ip}{fp}");
    let n: BigInt = digits.parse().map_err(|_| bad())?;
    let d = num_traits::pow(BigInt::from(10), fp.len());
    let r = BigRational::new(n, d);
    Ok(if neg { -r } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn vals(m: BigRational) -> VarValues {
        let alpha = (q(5, 1) - q(4, 1) * &m) / q(480, 1);
        VarValues([m, alpha, q(1, 1000), q(7, 1), q(1, 60), q(1, 1)])
    }

    #[test]
    fn polynomial_parse_and_eval() {
        let p = Poly::parse("(4*m - 5 - 52*alpha)/24").unwrap();
        let v = vals(q(1, 1));
        assert_eq!(p.eval(&v), (q(-1, 1) - q(52, 480)) / q(24, 1));
        let p2 = Poly::parse("-alpha*b/2 + 10/3 + 2*beta*b^2").unwrap();
        assert_eq!(p2.eval(&v), -q(1, 480) * q(7, 2) + q(10, 3) + q(98, 1000));
        assert!(Poly::parse("m/alpha").is_err());
        assert!(Poly::parse("m + ").is_err());
    }

    #[test]
    fn monomial_parse() {
        let m = Monomial::parse("17 * twopi^(3/2) * a^(2*beta*b)").unwrap();
        assert_eq!(m.0.len(), 3);
        assert_eq!(m.0[0].constant, q(17, 1));
        assert_eq!(m.0[1].name, "twopi");
        assert_eq!(m.0[2].exponent, Poly::parse("2*beta*b").unwrap());
    }

    #[test]
    fn rational_literals() {
        assert_eq!(parse_rational("0.7").unwrap(), q(7, 10));
        assert_eq!(parse_rational("-1.25").unwrap(), q(-5, 4));
        assert_eq!(parse_rational("13/20").unwrap(), q(13, 20));
        assert_eq!(parse_rational("2").unwrap(), q(2, 1));
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn log_quantity_asymptotics() {
        let x = LogQuantity { coeff_ln_a: q(-1, 24), additive_log: 100.0 };
        let one = LogQuantity::from_ln(0.0);
        assert_eq!(x.asymptotic_cmp(&one), Some(std::cmp::Ordering::Less));
        assert!(x.ln_value(24.0 * 200.0) < 0.0);
        assert!(x.ln_value(24.0) > 0.0);
    }
}
