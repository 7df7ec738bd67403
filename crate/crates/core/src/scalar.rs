//! The coefficient field.
//!
//! Scalars are rational functions of the deformation parameter `q`, extended
//! by the square root `q^(1/2)`. Internally a scalar is a fraction of integer
//! polynomials in the half-power variable `s` with `q = s^2`; the external
//! syntax and display speak `q` throughout, printing odd powers of `s` as
//! `q^(k/2)`.
//!
//! Every scalar is kept in a canonical form (lowest terms, denominator with
//! positive leading coefficient), so `==` is exact semantic equality. The
//! involution of the *-algebra layers fixes the field pointwise: `q` is a
//! real parameter.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;
use thiserror::Error;

/// Dense integer polynomial in the half-power variable `s`.
///
/// Index `i` holds the coefficient of `s^i`; the vector never has trailing
/// zeros, and the zero polynomial is the empty vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct ZPoly(Vec<BigInt>);

impl ZPoly {
    fn zero() -> Self {
        ZPoly(Vec::new())
    }

    fn one() -> Self {
        ZPoly(vec![BigInt::one()])
    }

    fn constant(c: BigInt) -> Self {
        let mut p = ZPoly(vec![c]);
        p.trim();
        p
    }

    fn monomial(c: BigInt, deg: usize) -> Self {
        if c.is_zero() {
            return ZPoly::zero();
        }
        let mut v = vec![BigInt::zero(); deg + 1];
        v[deg] = c;
        ZPoly(v)
    }

    fn trim(&mut self) {
        while self.0.last().map_or(false, Zero::is_zero) {
            self.0.pop();
        }
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn is_one(&self) -> bool {
        self.0.len() == 1 && self.0[0].is_one()
    }

    fn degree(&self) -> Option<usize> {
        if self.0.is_empty() {
            None
        } else {
            Some(self.0.len() - 1)
        }
    }

    fn leading(&self) -> Option<&BigInt> {
        self.0.last()
    }

    fn nonzero_terms(&self) -> usize {
        self.0.iter().filter(|c| !c.is_zero()).count()
    }

    fn add(&self, other: &ZPoly) -> ZPoly {
        let n = self.0.len().max(other.0.len());
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            let a = self.0.get(i).cloned().unwrap_or_else(BigInt::zero);
            let b = other.0.get(i).cloned().unwrap_or_else(BigInt::zero);
            v.push(a + b);
        }
        let mut p = ZPoly(v);
        p.trim();
        p
    }

    fn sub(&self, other: &ZPoly) -> ZPoly {
        self.add(&other.neg())
    }

    fn neg(&self) -> ZPoly {
        ZPoly(self.0.iter().map(|c| -c).collect())
    }

    fn mul(&self, other: &ZPoly) -> ZPoly {
        if self.is_zero() || other.is_zero() {
            return ZPoly::zero();
        }
        let mut v = vec![BigInt::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.0.iter().enumerate() {
                if !b.is_zero() {
                    v[i + j] += a * b;
                }
            }
        }
        let mut p = ZPoly(v);
        p.trim();
        p
    }

    fn mul_bigint(&self, c: &BigInt) -> ZPoly {
        if c.is_zero() {
            return ZPoly::zero();
        }
        ZPoly(self.0.iter().map(|a| a * c).collect())
    }

    /// Multiply by `s^k`.
    fn shl(&self, k: usize) -> ZPoly {
        if self.is_zero() {
            return ZPoly::zero();
        }
        let mut v = vec![BigInt::zero(); k];
        v.extend(self.0.iter().cloned());
        ZPoly(v)
    }

    /// Positive gcd of the coefficients; zero for the zero polynomial.
    fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for c in &self.0 {
            g = g.gcd(c);
        }
        g
    }

    /// Divide out the content; sign of the leading coefficient is kept.
    fn primitive(&self) -> ZPoly {
        let c = self.content();
        if c.is_zero() || c.is_one() {
            return self.clone();
        }
        ZPoly(self.0.iter().map(|a| a / &c).collect())
    }

    /// Pseudo-remainder of `self` by `b` (an associate of the true remainder;
    /// only used inside the gcd, which takes primitive parts anyway).
    fn pseudo_rem(&self, b: &ZPoly) -> ZPoly {
        let db = b.degree().expect("pseudo_rem by zero");
        let lb = b.leading().unwrap().clone();
        let mut r = self.clone();
        while let Some(dr) = r.degree() {
            if dr < db {
                break;
            }
            let lead = r.0[dr].clone();
            r = r.mul_bigint(&lb).sub(&b.shl(dr - db).mul_bigint(&lead));
        }
        r
    }

    /// Primitive gcd with positive leading coefficient.
    fn gcd(&self, other: &ZPoly) -> ZPoly {
        let mut a = self.primitive();
        let mut b = other.primitive();
        if a.is_zero() {
            std::mem::swap(&mut a, &mut b);
        }
        while !b.is_zero() {
            let r = a.pseudo_rem(&b).primitive();
            a = b;
            b = r;
        }
        if a.leading().map_or(false, Signed::is_negative) {
            a = a.neg();
        }
        a
    }

    /// Exact division; panics if `b` does not divide `self`.
    fn div_exact(&self, b: &ZPoly) -> ZPoly {
        if self.is_zero() {
            return ZPoly::zero();
        }
        let db = b.degree().expect("division by zero polynomial");
        let lb = b.leading().unwrap();
        let mut r = self.clone();
        let mut q = vec![BigInt::zero(); self.0.len().saturating_sub(db)];
        while let Some(dr) = r.degree() {
            if dr < db {
                break;
            }
            let (c, rem) = r.0[dr].div_rem(lb);
            assert!(rem.is_zero(), "inexact polynomial division");
            q[dr - db] = c.clone();
            r = r.sub(&b.shl(dr - db).mul_bigint(&c));
        }
        assert!(r.is_zero(), "inexact polynomial division");
        let mut p = ZPoly(q);
        p.trim();
        p
    }

    /// Exact square root with positive leading coefficient, if one exists
    /// in the integer polynomial ring.
    fn sqrt(&self) -> Option<ZPoly> {
        if self.is_zero() {
            return Some(ZPoly::zero());
        }
        let d = self.degree().unwrap();
        if d % 2 != 0 {
            return None;
        }
        let lead = self.leading().unwrap();
        if lead.is_negative() {
            return None;
        }
        let m = d / 2;
        let rl = lead.sqrt();
        if &(&rl * &rl) != lead {
            return None;
        }
        let mut r = vec![BigInt::zero(); m + 1];
        r[m] = rl;
        let two_rm = &r[m] * 2;
        for i in (0..m).rev() {
            // coefficient of s^(m+i) in r^2 must match self
            let mut acc = self.0[m + i].clone();
            for j in (i + 1)..m {
                let k = m + i - j;
                if k > i && k <= m {
                    acc -= &r[j] * &r[k];
                }
            }
            let (c, rem) = acc.div_rem(&two_rm);
            if !rem.is_zero() {
                return None;
            }
            r[i] = c;
        }
        let mut root = ZPoly(r);
        root.trim();
        if root.mul(&root) == *self {
            Some(root)
        } else {
            None
        }
    }

    /// Evaluate the even/odd split `p(s) = E(q) + s * O(q)` at a rational
    /// `q`, returning `(E(q), O(q))`.
    fn eval_even_odd(&self, q: &Ratio<BigInt>) -> (Ratio<BigInt>, Ratio<BigInt>) {
        let mut even = Ratio::zero();
        let mut odd = Ratio::zero();
        let mut pw = Ratio::one();
        let mut k = 0usize;
        while k < self.0.len() {
            if !self.0[k].is_zero() {
                even += Ratio::from(self.0[k].clone()) * &pw;
            }
            if k + 1 < self.0.len() && !self.0[k + 1].is_zero() {
                odd += Ratio::from(self.0[k + 1].clone()) * &pw;
            }
            pw *= q;
            k += 2;
        }
        (even, odd)
    }

    /// Render in the external `q` convention; `s^k` prints as `q^(k/2)` for
    /// odd `k` and as `q^(k/2)` with an integer exponent for even `k`.
    fn fmt_q(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for k in (0..self.0.len()).rev() {
            let c = &self.0[k];
            if c.is_zero() {
                continue;
            }
            if first {
                if c.is_negative() {
                    f.write_str("-")?;
                }
                first = false;
            } else if c.is_negative() {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            let a = c.abs();
            if k == 0 {
                write!(f, "{a}")?;
            } else {
                if !a.is_one() {
                    write!(f, "{a}*")?;
                }
                if k == 2 {
                    f.write_str("q")?;
                } else if k % 2 == 0 {
                    write!(f, "q^{}", k / 2)?;
                } else {
                    write!(f, "q^({k}/2)")?;
                }
            }
        }
        Ok(())
    }
}

/// An element of the coefficient field: a reduced fraction of integer
/// polynomials in `q^(1/2)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Scalar {
    num: ZPoly,
    den: ZPoly,
}

/// Evaluation failures of [`Scalar::eval`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    /// Evaluation is only defined for `q > 0`.
    #[error("scalar evaluation requires q > 0, got {0}")]
    NonPositiveQ(String),
    /// The denominator vanishes at the requested `q`.
    #[error("pole at q = {0}")]
    PoleAtQ(String),
}

/// Exact value of a scalar at a rational point `q0`: the number
/// `a + b * sqrt(q0)`. When `sqrt(q0)` is itself rational the irrational
/// part is folded away and `b` is zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadValue {
    pub q: Ratio<BigInt>,
    pub a: Ratio<BigInt>,
    pub b: Ratio<BigInt>,
}

impl QuadValue {
    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        let a = self.a.to_f64().unwrap_or(f64::NAN);
        let b = self.b.to_f64().unwrap_or(f64::NAN);
        let q = self.q.to_f64().unwrap_or(f64::NAN);
        a + b * q.sqrt()
    }
}

fn rational_sqrt(r: &Ratio<BigInt>) -> Option<Ratio<BigInt>> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
        Some(Ratio::new(n, d))
    } else {
        None
    }
}

impl Scalar {
    fn canonical(num: ZPoly, den: ZPoly) -> Scalar {
        assert!(!den.is_zero(), "scalar with zero denominator");
        if num.is_zero() {
            return Scalar {
                num: ZPoly::zero(),
                den: ZPoly::one(),
            };
        }
        let g = num.gcd(&den);
        let (mut num, mut den) = if g.is_one() {
            (num, den)
        } else {
            (num.div_exact(&g), den.div_exact(&g))
        };
        let c = num.content().gcd(&den.content());
        if !c.is_one() {
            num = ZPoly(num.0.iter().map(|a| a / &c).collect());
            den = ZPoly(den.0.iter().map(|a| a / &c).collect());
        }
        if den.leading().map_or(false, Signed::is_negative) {
            num = num.neg();
            den = den.neg();
        }
        Scalar { num, den }
    }

    pub fn zero() -> Scalar {
        Scalar {
            num: ZPoly::zero(),
            den: ZPoly::one(),
        }
    }

    pub fn one() -> Scalar {
        Scalar {
            num: ZPoly::one(),
            den: ZPoly::one(),
        }
    }

    pub fn int(n: i64) -> Scalar {
        Scalar {
            num: ZPoly::constant(BigInt::from(n)),
            den: ZPoly::one(),
        }
    }

    /// `n / d`; panics when `d == 0`.
    pub fn ratio(n: i64, d: i64) -> Scalar {
        assert!(d != 0, "zero denominator");
        Scalar::canonical(
            ZPoly::constant(BigInt::from(n)),
            ZPoly::constant(BigInt::from(d)),
        )
    }

    /// The deformation parameter `q`.
    pub fn q() -> Scalar {
        Scalar::q_pow(1)
    }

    /// `q^k` for any integer `k`.
    pub fn q_pow(k: i64) -> Scalar {
        Scalar::q_half_pow(2 * k)
    }

    /// `q^(k/2)` for any integer `k`.
    pub fn q_half_pow(k: i64) -> Scalar {
        if k >= 0 {
            Scalar {
                num: ZPoly::monomial(BigInt::one(), k as usize),
                den: ZPoly::one(),
            }
        } else {
            Scalar {
                num: ZPoly::one(),
                den: ZPoly::monomial(BigInt::one(), (-k) as usize),
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self) -> Option<Scalar> {
        if self.is_zero() {
            None
        } else {
            Some(Scalar::canonical(self.den.clone(), self.num.clone()))
        }
    }

    /// The involution of the coefficient field. `q` is a real parameter, so
    /// this is the identity; it exists so *-structure code reads correctly.
    pub fn conj(&self) -> Scalar {
        self.clone()
    }

    /// Exact square root on the positive branch (`sqrt(q) = q^(1/2)`),
    /// when one exists in the field.
    pub fn sqrt(&self) -> Option<Scalar> {
        if self.is_zero() {
            return Some(Scalar::zero());
        }
        let m = self.num.mul(&self.den);
        let c = m.content();
        let p = m.primitive();
        let cr = c.sqrt();
        if &cr * &cr != c {
            return None;
        }
        let pr = p.sqrt()?;
        Some(Scalar::canonical(
            pr.mul_bigint(&cr),
            self.den.clone(),
        ))
    }

    /// Integer power, with negative exponents through the inverse.
    /// Panics on `0^k` for `k < 0`.
    pub fn pow_i(&self, k: i64) -> Scalar {
        if k == 0 {
            return Scalar::one();
        }
        let base = if k < 0 {
            self.inv().expect("zero to a negative power")
        } else {
            self.clone()
        };
        let mut e = k.unsigned_abs();
        let mut acc = Scalar::one();
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &sq;
            }
            e >>= 1;
            if e > 0 {
                sq = &sq * &sq;
            }
        }
        acc
    }

    /// Evaluate at a rational `q0 > 0` as the exact number `a + b*sqrt(q0)`.
    pub fn eval(&self, q0: &Ratio<BigInt>) -> Result<QuadValue, EvalError> {
        if !q0.is_positive() {
            return Err(EvalError::NonPositiveQ(q0.to_string()));
        }
        let (en, on) = self.num.eval_even_odd(q0);
        let (ed, od) = self.den.eval_even_odd(q0);
        if let Some(r) = rational_sqrt(q0) {
            let den = &ed + &r * &od;
            if den.is_zero() {
                return Err(EvalError::PoleAtQ(q0.to_string()));
            }
            let val = (&en + &r * &on) / den;
            Ok(QuadValue {
                q: q0.clone(),
                a: val,
                b: Ratio::zero(),
            })
        } else {
            let d = &ed * &ed - q0 * &od * &od;
            if d.is_zero() {
                return Err(EvalError::PoleAtQ(q0.to_string()));
            }
            let a = (&en * &ed - q0 * &on * &od) / &d;
            let b = (&on * &ed - &en * &od) / &d;
            Ok(QuadValue {
                q: q0.clone(),
                a,
                b,
            })
        }
    }

    /// Parse the external syntax; see the module docs for the grammar.
    pub fn parse(input: &str) -> Result<Scalar, ParseError> {
        let mut p = Parser {
            s: input.as_bytes(),
            i: 0,
        };
        p.skip_ws();
        let v = p.expr()?;
        p.skip_ws();
        if p.i != p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(v)
    }
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::zero()
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return self.num.fmt_q(f);
        }
        if self.num.nonzero_terms() > 1 {
            f.write_str("(")?;
            self.num.fmt_q(f)?;
            f.write_str(")")?;
        } else {
            self.num.fmt_q(f)?;
        }
        f.write_str("/")?;
        // A bare denominator is only safe when it re-parses as one factor:
        // a pure power of q or an integer constant.
        let bare = self.den.degree() == Some(0)
            || (self.den.nonzero_terms() == 1 && self.den.leading().unwrap().is_one());
        if bare {
            self.den.fmt_q(f)
        } else {
            f.write_str("(")?;
            self.den.fmt_q(f)?;
            f.write_str(")")
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({self})")
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Scalar::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl FromStr for Scalar {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scalar::parse(s)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                (&self).$method(rhs)
            }
        }
        impl $trait<Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                self.$method(&rhs)
            }
        }
    };
}

impl Add<&Scalar> for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        Scalar::canonical(
            self.num.mul(&rhs.den).add(&rhs.num.mul(&self.den)),
            self.den.mul(&rhs.den),
        )
    }
}
forward_binop!(Add, add);

impl Sub<&Scalar> for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        Scalar::canonical(
            self.num.mul(&rhs.den).sub(&rhs.num.mul(&self.den)),
            self.den.mul(&rhs.den),
        )
    }
}
forward_binop!(Sub, sub);

impl Mul<&Scalar> for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        Scalar::canonical(self.num.mul(&rhs.num), self.den.mul(&rhs.den))
    }
}
forward_binop!(Mul, mul);

impl Div<&Scalar> for &Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        assert!(!rhs.is_zero(), "scalar division by zero");
        Scalar::canonical(self.num.mul(&rhs.den), self.den.mul(&rhs.num))
    }
}
forward_binop!(Div, div);

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        *self = &*self + rhs;
    }
}

impl AddAssign for Scalar {
    fn add_assign(&mut self, rhs: Scalar) {
        *self += &rhs;
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        *self = &*self - rhs;
    }
}

impl SubAssign for Scalar {
    fn sub_assign(&mut self, rhs: Scalar) {
        *self -= &rhs;
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: &Scalar) {
        *self = &*self * rhs;
    }
}

impl MulAssign for Scalar {
    fn mul_assign(&mut self, rhs: Scalar) {
        *self *= &rhs;
    }
}

impl Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |a, b| a + b)
    }
}

/// Syntax error with a 1-based column.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("column {col}: {msg}")]
pub struct ParseError {
    pub col: usize,
    pub msg: String,
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

const MAX_EXPONENT: i64 = 10_000;

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> ParseError {
        ParseError {
            col: self.i + 1,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.i < self.s.len() && (self.s[self.i] as char).is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Scalar, ParseError> {
        let mut acc = self.term()?;
        loop {
            self.skip_ws();
            if self.eat(b'+') {
                acc = acc + self.term()?;
            } else if self.eat(b'-') {
                acc = acc - self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Scalar, ParseError> {
        let mut acc = self.factor()?;
        loop {
            self.skip_ws();
            if self.eat(b'*') {
                acc = acc * self.factor()?;
            } else if self.eat(b'/') {
                let at = self.i;
                let rhs = self.factor()?;
                if rhs.is_zero() {
                    return Err(ParseError {
                        col: at + 1,
                        msg: "division by zero".to_string(),
                    });
                }
                acc = acc / rhs;
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<Scalar, ParseError> {
        self.skip_ws();
        let mut negate = false;
        while let Some(b) = self.peek() {
            if b == b'-' {
                negate = !negate;
                self.i += 1;
                self.skip_ws();
            } else if b == b'+' {
                self.i += 1;
                self.skip_ws();
            } else {
                break;
            }
        }
        let base = self.atom()?;
        self.skip_ws();
        let v = if self.eat(b'^') {
            let at = self.i;
            let (p, half) = self.exponent()?;
            if half {
                if p % 2 == 0 {
                    base.pow_i(p / 2)
                } else {
                    let root = base.sqrt().ok_or_else(|| ParseError {
                        col: at + 1,
                        msg: format!("{base} has no exact square root"),
                    })?;
                    if root.is_zero() && p < 0 {
                        return Err(ParseError {
                            col: at + 1,
                            msg: "zero to a negative power".to_string(),
                        });
                    }
                    root.pow_i(p)
                }
            } else {
                if base.is_zero() && p < 0 {
                    return Err(ParseError {
                        col: at + 1,
                        msg: "zero to a negative power".to_string(),
                    });
                }
                base.pow_i(p)
            }
        } else {
            base
        };
        Ok(if negate { -v } else { v })
    }

    fn atom(&mut self) -> Result<Scalar, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let v = self.expr()?;
                self.skip_ws();
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(v)
            }
            Some(b'q') => {
                self.i += 1;
                Ok(Scalar::q())
            }
            Some(b) if b.is_ascii_digit() => {
                let start = self.i;
                while self.peek().map_or(false, |b| b.is_ascii_digit()) {
                    self.i += 1;
                }
                let text = std::str::from_utf8(&self.s[start..self.i]).unwrap();
                let n: BigInt = text.parse().unwrap();
                Ok(Scalar {
                    num: ZPoly::constant(n),
                    den: ZPoly::one(),
                })
            }
            Some(_) => Err(self.err("expected a number, 'q', or '('")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    /// Exponent after `^`: a signed integer, or a parenthesized signed
    /// integer or half-integer `(k/2)`. Returns `(numerator, halved)`.
    fn exponent(&mut self) -> Result<(i64, bool), ParseError> {
        self.skip_ws();
        if self.eat(b'(') {
            let p = self.signed_int()?;
            self.skip_ws();
            let half = if self.eat(b'/') {
                self.skip_ws();
                let at = self.i;
                let d = self.signed_int()?;
                if d != 2 {
                    return Err(ParseError {
                        col: at + 1,
                        msg: "only half-integer exponents are supported".to_string(),
                    });
                }
                true
            } else {
                false
            };
            self.skip_ws();
            if !self.eat(b')') {
                return Err(self.err("expected ')'"));
            }
            Ok((p, half))
        } else {
            Ok((self.signed_int()?, false))
        }
    }

    fn signed_int(&mut self) -> Result<i64, ParseError> {
        self.skip_ws();
        let neg = self.eat(b'-');
        self.skip_ws();
        let start = self.i;
        while self.peek().map_or(false, |b| b.is_ascii_digit()) {
            self.i += 1;
        }
        if self.i == start {
            return Err(self.err("expected an integer"));
        }
        let text = std::str::from_utf8(&self.s[start..self.i]).unwrap();
        let mut n: i64 = text
            .parse()
            .map_err(|_| self.err("exponent out of range"))?;
        if n > MAX_EXPONENT {
            return Err(self.err("exponent out of range"));
        }
        if neg {
            n = -n;
        }
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(text: &str) -> Scalar {
        Scalar::parse(text).unwrap()
    }

    #[test]
    fn canonical_zero_and_one() {
        assert!(Scalar::zero().is_zero());
        assert!(Scalar::one().is_one());
        assert_eq!(Scalar::int(0), Scalar::zero());
        assert_eq!(Scalar::ratio(2, 2), Scalar::one());
        assert_eq!(Scalar::ratio(-3, -3), Scalar::one());
    }

    #[test]
    fn fractions_reduce() {
        assert_eq!(Scalar::ratio(4, 6), Scalar::ratio(2, 3));
        assert_eq!(Scalar::ratio(1, -2), Scalar::ratio(-1, 2));
        let x = s("(1 - q^2)/(1 - q)");
        assert_eq!(x, s("1 + q"));
        let y = s("(q - 1)/(1 - q)");
        assert_eq!(y, Scalar::int(-1));
    }

    #[test]
    fn half_powers_multiply() {
        assert_eq!(s("q^(1/2)") * s("q^(1/2)"), Scalar::q());
        assert_eq!(s("q^(1/2)") * s("q^(-1/2)"), Scalar::one());
        assert_eq!(s("q^(3/2)"), Scalar::q() * s("q^(1/2)"));
        assert_eq!(Scalar::q_half_pow(-3), s("q^(-3/2)"));
    }

    #[test]
    fn display_round_trips() {
        let cases = [
            "0",
            "1",
            "-1",
            "q",
            "-q",
            "q^2 + 1",
            "q^(1/2)",
            "2*q - 3",
            "1/q",
            "(q^2 + 1)/q",
            "1/(q^2 + 1)",
            "q^(1/2)/(q + 1)",
            "(q^4 - 2*q^2 + 1)/(q^3 + q)",
            "1/q^(1/2)",
            "-3*q^(5/2) + q - 7",
        ];
        for c in cases {
            let v = s(c);
            let shown = v.to_string();
            assert_eq!(s(&shown), v, "round trip failed for {c} -> {shown}");
        }
    }

    #[test]
    fn display_shapes() {
        assert_eq!(s("q^(-1/2)").to_string(), "1/q^(1/2)");
        assert_eq!(s("q^(-1)").to_string(), "1/q");
        assert_eq!((Scalar::one() + Scalar::q()).to_string(), "q + 1");
        assert_eq!(Scalar::ratio(1, 2).to_string(), "1/2");
        assert_eq!(
            (Scalar::one() / (Scalar::one() + Scalar::q())).to_string(),
            "1/(q + 1)"
        );
        assert_eq!(Scalar::ratio(-1, 2).to_string(), "-1/2");
        assert_eq!((-Scalar::q()).to_string(), "-q");
    }

    #[test]
    fn parse_errors_carry_columns() {
        let e = Scalar::parse("q +").unwrap_err();
        assert_eq!(e.col, 4);
        let e = Scalar::parse("1/(q - q)").unwrap_err();
        assert!(e.msg.contains("division by zero"));
        let e = Scalar::parse("q^(1/3)").unwrap_err();
        assert!(e.msg.contains("half-integer"));
        let e = Scalar::parse("2^(1/2)").unwrap_err();
        assert!(e.msg.contains("square root"));
        assert!(Scalar::parse("").is_err());
        assert!(Scalar::parse("x").is_err());
    }

    #[test]
    fn sqrt_cases() {
        assert_eq!(Scalar::q().sqrt().unwrap(), s("q^(1/2)"));
        assert_eq!(Scalar::q_pow(2).sqrt().unwrap(), Scalar::q());
        assert_eq!(Scalar::int(4).sqrt().unwrap(), Scalar::int(2));
        assert_eq!(Scalar::int(2).sqrt(), None);
        assert_eq!((-Scalar::q()).sqrt(), None);
        let x = s("q/(1 + 2*q + q^2)");
        assert_eq!(x.sqrt().unwrap(), s("q^(1/2)/(1 + q)"));
        assert_eq!(s("q^(1/2)").sqrt(), None);
        let y = s("(1 + q)^2/q^3");
        assert_eq!(y.sqrt().unwrap(), s("(1 + q)/q^(3/2)"));
    }

    #[test]
    fn inverse_and_pow() {
        let x = s("(1 + q)/q^2");
        assert!((x.inv().unwrap() * &x).is_one());
        assert_eq!(Scalar::zero().inv(), None);
        assert_eq!(Scalar::q().pow_i(-2), s("q^(-2)"));
        assert_eq!(s("1 + q").pow_i(2), s("1 + 2*q + q^2"));
        assert_eq!(s("q").pow_i(0), Scalar::one());
    }

    #[test]
    fn eval_rational_point() {
        let q0 = Ratio::new(BigInt::from(1), BigInt::from(2));
        let v = s("(1 + q)/q").eval(&q0).unwrap();
        assert_eq!(v.a, Ratio::from(BigInt::from(3)));
        assert!(v.b.is_zero());

        // sqrt(1/4) = 1/2 is rational, so the value folds into `a`.
        let q1 = Ratio::new(BigInt::from(1), BigInt::from(4));
        let w = s("q^(1/2)").eval(&q1).unwrap();
        assert_eq!(w.a, Ratio::new(BigInt::from(1), BigInt::from(2)));
        assert!(w.b.is_zero());

        // sqrt(1/2) is irrational and stays in the b part.
        let u = s("q^(1/2) + q").eval(&q0).unwrap();
        assert_eq!(u.a, q0);
        assert_eq!(u.b, Ratio::from(BigInt::from(1)));
        assert!((u.to_f64() - (0.5 + 0.5f64.sqrt())).abs() < 1e-12);

        let zero = (s("q^(1/2)") - s("q^(1/2)")).eval(&q0).unwrap();
        assert!(zero.is_zero());
    }

    #[test]
    fn eval_rejects_bad_points() {
        let zero = Ratio::from(BigInt::from(0));
        assert!(matches!(
            Scalar::q().eval(&zero),
            Err(EvalError::NonPositiveQ(_))
        ));
        let q0 = Ratio::from(BigInt::from(1));
        assert!(matches!(
            s("1/(1 - q)").eval(&q0),
            Err(EvalError::PoleAtQ(_))
        ));
        // Pole at an irrational s: denominator q - 2 vanishes at q0 = 2.
        let q2 = Ratio::from(BigInt::from(2));
        assert!(matches!(
            s("1/(q - 2)").eval(&q2),
            Err(EvalError::PoleAtQ(_))
        ));
    }

    #[test]
    fn serde_round_trip() {
        let x = s("(1 + q)/q^(1/2)");
        let text = serde_json::to_string(&x).unwrap();
        let back: Scalar = serde_json::from_str(&text).unwrap();
        assert_eq!(back, x);
    }

    fn arb_scalar() -> impl Strategy<Value = Scalar> {
        let coeff = -3i64..4;
        let poly = prop::collection::vec(coeff, 1..4);
        (poly.clone(), poly).prop_filter_map("nonzero denominator", |(n, d)| {
            let num = ZPoly({
                let mut v: Vec<BigInt> = n.into_iter().map(BigInt::from).collect();
                while v.last().map_or(false, Zero::is_zero) {
                    v.pop();
                }
                v
            });
            let den = ZPoly({
                let mut v: Vec<BigInt> = d.into_iter().map(BigInt::from).collect();
                while v.last().map_or(false, Zero::is_zero) {
                    v.pop();
                }
                v
            });
            if den.is_zero() {
                None
            } else {
                Some(Scalar::canonical(num, den))
            }
        })
    }

    proptest! {
        #[test]
        fn field_axioms(a in arb_scalar(), b in arb_scalar(), c in arb_scalar()) {
            prop_assert_eq!((&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!((&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&a * &(&b + &c), &a * &b + &a * &c);
            prop_assert_eq!(&a - &a, Scalar::zero());
            if !a.is_zero() {
                prop_assert_eq!(&a * &a.inv().unwrap(), Scalar::one());
            }
        }

        #[test]
        fn display_parse_round_trip(a in arb_scalar()) {
            let shown = a.to_string();
            prop_assert_eq!(Scalar::parse(&shown).unwrap(), a);
        }

        #[test]
        fn squares_have_roots(a in arb_scalar()) {
            let sq = &a * &a;
            let r = sq.sqrt().unwrap();
            prop_assert_eq!(&r * &r, sq);
        }
    }
}
