//! Likelihood scalar backends.
//!
//! Every engine operation only adds, multiplies and (for normalization)
//! divides nonnegative values, so one small trait covers doubles,
//! arbitrary-precision decimals, truncated polynomials in a single error
//! parameter and exact rationals.

use std::cmp::Ordering;
use std::fmt::Debug;
use std::str::FromStr;

use dashu_float::DBig;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("invalid decimal number {0:?}")]
    BadDecimal(String),
    #[error("probability {0} outside [0, 1)")]
    BadProbability(String),
}

pub trait Scalar: Clone + Debug + Send + Sync + 'static {
    type Ctx: Clone + Debug + Send + Sync;

    fn zero(ctx: &Self::Ctx) -> Self;
    fn one(ctx: &Self::Ctx) -> Self;
    fn from_ratio(ctx: &Self::Ctx, r: &BigRational) -> Self;
    /// A physical likelihood. Numeric backends store the value; the
    /// polynomial backend turns it into a multiple of the error parameter.
    fn likelihood(ctx: &Self::Ctx, r: &BigRational) -> Self {
        Self::from_ratio(ctx, r)
    }
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    /// Division; the divisor must be nonzero.
    fn div(&self, o: &Self) -> Self;
    fn is_zero(&self) -> bool;
    fn to_f64(&self) -> f64;

    fn add_assign(&mut self, o: &Self) {
        *self = self.add(o);
    }

    /// Decimal text used in reports and documents.
    fn to_decimal(&self) -> String {
        format!("{:e}", self.to_f64())
    }

    fn cmp_value(&self, o: &Self) -> Ordering {
        self.to_f64().total_cmp(&o.to_f64())
    }

    fn max_value(a: &Self, b: &Self) -> Self {
        if b.cmp_value(a) == Ordering::Greater {
            b.clone()
        } else {
            a.clone()
        }
    }
}

impl Scalar for f64 {
    type Ctx = ();

    fn zero(_: &()) -> f64 {
        0.0
    }
    fn one(_: &()) -> f64 {
        1.0
    }
    fn from_ratio(_: &(), r: &BigRational) -> f64 {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }
    #[inline]
    fn add(&self, o: &f64) -> f64 {
        self + o
    }
    #[inline]
    fn mul(&self, o: &f64) -> f64 {
        self * o
    }
    fn div(&self, o: &f64) -> f64 {
        self / o
    }
    #[inline]
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    #[inline]
    fn add_assign(&mut self, o: &f64) {
        *self += o;
    }
}

impl Scalar for BigRational {
    type Ctx = ();

    fn zero(_: &()) -> Self {
        <BigRational as Zero>::zero()
    }
    fn one(_: &()) -> Self {
        <BigRational as One>::one()
    }
    fn from_ratio(_: &(), r: &BigRational) -> Self {
        r.clone()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn add_assign(&mut self, o: &Self) {
        *self += o;
    }
    fn cmp_value(&self, o: &Self) -> Ordering {
        self.cmp(o)
    }
}

pub const DEFAULT_DIGITS: usize = 48;

/// Arbitrary-precision decimal with a fixed significant-digit count.
#[derive(Debug, Clone, PartialEq)]
pub struct BigFloat(pub DBig);

impl BigFloat {
    fn int(digits: usize, v: &BigInt) -> DBig {
        DBig::from_str(&v.to_string()).expect("integer literal").with_precision(digits).value()
    }
}

impl Scalar for BigFloat {
    type Ctx = usize;

    fn zero(digits: &usize) -> Self {
        BigFloat(DBig::ZERO.with_precision(*digits).value())
    }
    fn one(digits: &usize) -> Self {
        BigFloat(DBig::ONE.with_precision(*digits).value())
    }
    fn from_ratio(digits: &usize, r: &BigRational) -> Self {
        let n = BigFloat::int(*digits, r.numer());
        let d = BigFloat::int(*digits, r.denom());
        BigFloat(&n / &d)
    }
    fn add(&self, o: &Self) -> Self {
        BigFloat(&self.0 + &o.0)
    }
    fn mul(&self, o: &Self) -> Self {
        BigFloat(&self.0 * &o.0)
    }
    fn div(&self, o: &Self) -> Self {
        BigFloat(&self.0 / &o.0)
    }
    fn is_zero(&self) -> bool {
        self.0 == DBig::ZERO
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }
    fn to_decimal(&self) -> String {
        self.0.to_string()
    }
    fn cmp_value(&self, o: &Self) -> Ordering {
        self.0.partial_cmp(&o.0).unwrap_or(Ordering::Equal)
    }
}

pub const MAX_DEGREE: usize = 8;
pub const DEFAULT_DEGREE_CAP: usize = 4;
pub const DEFAULT_E_MAX: f64 = 1.0 / 400.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyCtx {
    pub degree_cap: usize,
    pub e_max: f64,
}

impl Default for PolyCtx {
    fn default() -> Self {
        PolyCtx { degree_cap: DEFAULT_DEGREE_CAP, e_max: DEFAULT_E_MAX }
    }
}

/// Truncated power series in the error parameter `e` with a certified
/// remainder bound valid for `0 ≤ e ≤ e_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: [f64; MAX_DEGREE + 1],
    remainder: f64,
    ctx: PolyCtx,
}

impl Poly {
    pub fn new(ctx: PolyCtx, coeffs: &[f64]) -> Poly {
        assert!(ctx.degree_cap <= MAX_DEGREE, "degree cap above {MAX_DEGREE}");
        let mut p = Poly { coeffs: [0.0; MAX_DEGREE + 1], remainder: 0.0, ctx };
        let mut pow = 1.0;
        for (k, &c) in coeffs.iter().enumerate() {
            if k <= ctx.degree_cap {
                p.coeffs[k] = c;
            } else {
                p.remainder += c.abs() * pow;
            }
            pow *= ctx.e_max;
        }
        p
    }

    /// The error parameter `e` itself.
    pub fn param(ctx: PolyCtx) -> Poly {
        Poly::new(ctx, &[0.0, 1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs[..=self.ctx.degree_cap]
    }

    pub fn remainder(&self) -> f64 {
        self.remainder
    }

    pub fn ctx(&self) -> PolyCtx {
        self.ctx
    }

    /// Lowest degree with a nonzero coefficient, if any.
    pub fn min_degree(&self) -> Option<usize> {
        self.coeffs().iter().position(|&c| c != 0.0)
    }

    pub fn eval(&self, e: f64) -> f64 {
        self.coeffs().iter().rev().fold(0.0, |acc, &c| acc * e + c)
    }

    fn abs_eval(&self, e: f64) -> f64 {
        self.coeffs().iter().rev().fold(0.0, |acc, &c| acc * e + c.abs())
    }

    fn merged_ctx(&self, o: &Poly) -> PolyCtx {
        PolyCtx { degree_cap: self.ctx.degree_cap.min(o.ctx.degree_cap), e_max: self.ctx.e_max.max(o.ctx.e_max) }
    }

    /// Drops coefficients above the cap into the remainder.
    fn truncated(full: &[f64], ctx: PolyCtx, mut rem: f64) -> Poly {
        let mut out = Poly { coeffs: [0.0; MAX_DEGREE + 1], remainder: 0.0, ctx };
        let mut pow = 1.0;
        for (k, &c) in full.iter().enumerate() {
            if k <= ctx.degree_cap {
                out.coeffs[k] = c;
            } else {
                rem += c.abs() * pow;
            }
            pow *= ctx.e_max;
        }
        out.remainder = rem;
        out
    }
}

impl Scalar for Poly {
    type Ctx = PolyCtx;

    fn zero(ctx: &PolyCtx) -> Self {
        Poly::new(*ctx, &[])
    }
    fn one(ctx: &PolyCtx) -> Self {
        Poly::new(*ctx, &[1.0])
    }
    fn from_ratio(ctx: &PolyCtx, r: &BigRational) -> Self {
        Poly::new(*ctx, &[ToPrimitive::to_f64(r).unwrap_or(f64::NAN)])
    }
    /// `r` is read as the likelihood at `e = e_max`, so the result is
    /// `(r / e_max)·e`.
    fn likelihood(ctx: &PolyCtx, r: &BigRational) -> Self {
        Poly::new(*ctx, &[0.0, ToPrimitive::to_f64(r).unwrap_or(f64::NAN) / ctx.e_max])
    }
    fn add(&self, o: &Self) -> Self {
        let ctx = self.merged_ctx(o);
        let mut full = [0.0; MAX_DEGREE + 1];
        for (k, f) in full.iter_mut().enumerate() {
            *f = self.coeffs[k] + o.coeffs[k];
        }
        Poly::truncated(&full, ctx, self.remainder + o.remainder)
    }
    fn mul(&self, o: &Self) -> Self {
        let ctx = self.merged_ctx(o);
        let mut full = [0.0; 2 * MAX_DEGREE + 1];
        for i in 0..=self.ctx.degree_cap {
            if self.coeffs[i] == 0.0 {
                continue;
            }
            for j in 0..=o.ctx.degree_cap {
                full[i + j] += self.coeffs[i] * o.coeffs[j];
            }
        }
        let a = self.abs_eval(ctx.e_max);
        let b = o.abs_eval(ctx.e_max);
        let cross = a * o.remainder + self.remainder * b + self.remainder * o.remainder;
        Poly::truncated(&full, ctx, cross)
    }
    fn div(&self, o: &Self) -> Self {
        let ctx = self.merged_ctx(o);
        let cap = ctx.degree_cap;
        let b0 = o.coeffs[0];
        let mut q = [0.0; MAX_DEGREE + 1];
        for k in 0..=cap {
            let mut acc = self.coeffs[k];
            for j in 0..k {
                acc -= q[j] * o.coeffs[k - j];
            }
            q[k] = acc / b0;
        }
        // residual a - q·b has only degrees above the cap
        let mut resid = [0.0; 2 * MAX_DEGREE + 1];
        for (k, r) in resid.iter_mut().enumerate().take(cap + 1) {
            *r = self.coeffs[k];
        }
        for i in 0..=cap {
            for j in 0..=cap {
                resid[i + j] -= q[i] * o.coeffs[j];
            }
        }
        let mut resid_bound = 0.0;
        let mut pow = 1.0;
        for (k, r) in resid.iter().enumerate() {
            if k > cap {
                resid_bound += r.abs() * pow;
            }
            pow *= ctx.e_max;
        }
        let qp = Poly { coeffs: q, remainder: 0.0, ctx };
        // lower bound on the divisor over [0, e_max]
        let mut lower = b0 - o.remainder;
        let mut pow = ctx.e_max;
        for k in 1..=cap {
            if o.coeffs[k] < 0.0 {
                lower += o.coeffs[k] * pow;
            }
            pow *= ctx.e_max;
        }
        let rem = if lower > 0.0 {
            (resid_bound + self.remainder + qp.abs_eval(ctx.e_max) * o.remainder) / lower
        } else {
            f64::INFINITY
        };
        Poly { remainder: rem, ..qp }
    }
    fn is_zero(&self) -> bool {
        self.remainder == 0.0 && self.coeffs.iter().all(|&c| c == 0.0)
    }
    /// Value at `e_max` plus the remainder bound (an upper estimate).
    fn to_f64(&self) -> f64 {
        self.eval(self.ctx.e_max) + self.remainder
    }
}

/// Parses a plain or scientific decimal literal exactly.
pub fn parse_decimal(s: &str) -> Result<BigRational, ScalarError> {
    let bad = || ScalarError::BadDecimal(s.to_string());
    let t = s.trim();
    if t.is_empty() || t.len() > 400 {
        return Err(bad());
    }
    let (mant, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    if !(-340..=340).contains(&exp) {
        return Err(bad());
    }
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = match mant.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mant, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let mut n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
    if neg {
        n = -n;
    }
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let r = if scale >= 0 {
        BigRational::from_integer(n * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(n, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(r)
}

/// Exact conversion of an `f64` through its shortest round-trip decimal.
pub fn ratio_from_f64(v: f64) -> BigRational {
    parse_decimal(&format!("{v:e}")).expect("finite float formats as a decimal")
}

/// Probability to likelihood, `e = p / (1 − p)`.
pub fn likelihood_of(p: &BigRational) -> Result<BigRational, ScalarError> {
    if p.is_negative() || *p >= <BigRational as One>::one() {
        return Err(ScalarError::BadProbability(p.to_string()));
    }
    Ok(p / (<BigRational as One>::one() - p))
}

/// Likelihood to probability, `p = e / (1 + e)`.
pub fn probability_of_ratio(e: &BigRational) -> BigRational {
    e / (<BigRational as One>::one() + e)
}

pub fn probability_of<S: Scalar>(e: &S, ctx: &S::Ctx) -> S {
    e.div(&S::one(ctx).add(e))
}
