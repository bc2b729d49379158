//! Field elements under two interchangeable backends.
//!
//! [`Exact`] wraps an arbitrary-size rational and never rounds. [`Real`]
//! wraps an MPFR float whose precision travels with the value. Every
//! formula in the crate is written against the [`Scalar`] trait, so the
//! same code path runs on either backend.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rug::Float;

use super::NumericsError;

/// A field element. Arithmetic that cannot fail goes through the std
/// operators; division and negative powers are explicit and fallible.
pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
{
    /// Construction context: `()` for exact rationals, the bit precision
    /// for floats.
    type Ctx: Copy + fmt::Debug + PartialEq + Send + Sync + 'static;

    const EXACT: bool;
    const BACKEND: &'static str;

    fn from_ratio(r: &BigRational, ctx: Self::Ctx) -> Self;
    fn ctx(&self) -> Self::Ctx;
    fn is_zero(&self) -> bool;
    fn abs(&self) -> Self;
    fn to_f64(&self) -> f64;
    /// `log10 |x|`, finite even when `|x|` is far outside the f64 range.
    /// Returns `-inf` for zero.
    fn log10_abs(&self) -> f64;
    fn to_sci_string(&self, digits: usize) -> String;
    /// Lossless textual form, used by the on-disk series cache.
    fn to_repr(&self) -> String;
    fn from_repr(s: &str, ctx: Self::Ctx) -> Option<Self>;
    fn ctx_for_digits(digits: u32) -> Self::Ctx;
    /// Working precision in decimal digits, `None` for exact arithmetic.
    fn precision_digits(ctx: Self::Ctx) -> Option<u32>;

    fn from_i64(v: i64, ctx: Self::Ctx) -> Self {
        Self::from_ratio(&BigRational::from_integer(BigInt::from(v)), ctx)
    }

    fn zero(ctx: Self::Ctx) -> Self {
        Self::from_i64(0, ctx)
    }

    fn one(ctx: Self::Ctx) -> Self {
        Self::from_i64(1, ctx)
    }

    fn checked_div(&self, rhs: &Self) -> Result<Self, NumericsError>;

    fn recip(&self) -> Result<Self, NumericsError> {
        Self::one(self.ctx()).checked_div(self)
    }

    fn square(&self) -> Self {
        self.clone() * self
    }

    fn powi(&self, e: i64) -> Result<Self, NumericsError> {
        let base = if e < 0 { self.recip()? } else { self.clone() };
        let mut k = e.unsigned_abs();
        let mut acc = Self::one(self.ctx());
        let mut b = base;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * &b;
            }
            k >>= 1;
            if k > 0 {
                b = b.square();
            }
        }
        Ok(acc)
    }

    /// `|self - other| / |other|`, or `|self|` when `other` is zero.
    fn rel_diff(&self, other: &Self) -> f64 {
        let d = (self.clone() - other).abs();
        if other.is_zero() {
            return d.to_f64();
        }
        10f64.powf(d.log10_abs() - other.log10_abs())
    }
}

// ---------------------------------------------------------------------------
// Exact backend

/// Exact rational arithmetic.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub BigRational);

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Exact({})", self.0)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn big_log10(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.abs().to_f64().unwrap_or(f64::INFINITY).log10();
    }
    let shift = bits - 900;
    let top = (x.abs() >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.log10() + shift as f64 * std::f64::consts::LOG10_2
}

impl Scalar for Exact {
    type Ctx = ();
    const EXACT: bool = true;
    const BACKEND: &'static str = "exact";

    fn from_ratio(r: &BigRational, _ctx: ()) -> Self {
        Exact(r.clone())
    }

    fn ctx(&self) {}

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    fn abs(&self) -> Self {
        Exact(self.0.abs())
    }

    fn to_f64(&self) -> f64 {
        if self.0.is_zero() {
            return 0.0;
        }
        let l = self.log10_abs();
        let sign = if self.0.is_negative() { -1.0 } else { 1.0 };
        sign * 10f64.powf(l)
    }

    fn log10_abs(&self) -> f64 {
        if self.0.is_zero() {
            return f64::NEG_INFINITY;
        }
        big_log10(self.0.numer()) - big_log10(self.0.denom())
    }

    fn to_sci_string(&self, _digits: usize) -> String {
        self.0.to_string()
    }

    fn to_repr(&self) -> String {
        self.0.to_string()
    }

    fn from_repr(s: &str, _ctx: ()) -> Option<Self> {
        s.parse::<BigRational>().ok().map(Exact)
    }

    fn ctx_for_digits(_digits: u32) {}

    fn precision_digits(_ctx: ()) -> Option<u32> {
        None
    }

    fn checked_div(&self, rhs: &Self) -> Result<Self, NumericsError> {
        if rhs.0.is_zero() {
            return Err(NumericsError::DivisionByZero);
        }
        Ok(Exact(&self.0 / &rhs.0))
    }

    fn one(_ctx: ()) -> Self {
        Exact(BigRational::one())
    }

    fn zero(_ctx: ()) -> Self {
        Exact(BigRational::zero())
    }
}

impl Add for Exact {
    type Output = Exact;
    fn add(self, rhs: Exact) -> Exact {
        Exact(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Exact> for Exact {
    type Output = Exact;
    fn add(self, rhs: &'a Exact) -> Exact {
        Exact(self.0 + &rhs.0)
    }
}

impl Sub for Exact {
    type Output = Exact;
    fn sub(self, rhs: Exact) -> Exact {
        Exact(self.0 - rhs.0)
    }
}

impl<'a> Sub<&'a Exact> for Exact {
    type Output = Exact;
    fn sub(self, rhs: &'a Exact) -> Exact {
        Exact(self.0 - &rhs.0)
    }
}

impl Mul for Exact {
    type Output = Exact;
    fn mul(self, rhs: Exact) -> Exact {
        Exact(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a Exact> for Exact {
    type Output = Exact;
    fn mul(self, rhs: &'a Exact) -> Exact {
        Exact(self.0 * &rhs.0)
    }
}

impl Neg for Exact {
    type Output = Exact;
    fn neg(self) -> Exact {
        Exact(-self.0)
    }
}

// ---------------------------------------------------------------------------
// Float backend

/// Working precision in bits for [`Real`] values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Precision(pub u32);

impl Precision {
    pub fn from_digits(digits: u32) -> Self {
        Precision(((digits as f64) / std::f64::consts::LOG10_2).ceil() as u32 + 8)
    }

    pub fn digits(self) -> u32 {
        ((self.0.saturating_sub(8)) as f64 * std::f64::consts::LOG10_2).floor() as u32
    }
}

/// Arbitrary-precision real arithmetic.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct Real(pub Float);

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Real({})", self.to_sci_string(20))
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sci_string(20))
    }
}

impl Real {
    pub fn precision(&self) -> Precision {
        Precision(self.0.prec())
    }
}

impl Scalar for Real {
    type Ctx = Precision;
    const EXACT: bool = false;
    const BACKEND: &'static str = "float";

    fn from_ratio(r: &BigRational, ctx: Precision) -> Self {
        let num = rug::Integer::from_str_radix(&r.numer().to_str_radix(16), 16)
            .expect("hex digits from BigInt always parse");
        let den = rug::Integer::from_str_radix(&r.denom().to_str_radix(16), 16)
            .expect("hex digits from BigInt always parse");
        let rat = rug::Rational::from((num, den));
        Real(Float::with_val(ctx.0, rat))
    }

    fn from_i64(v: i64, ctx: Precision) -> Self {
        Real(Float::with_val(ctx.0, v))
    }

    fn ctx(&self) -> Precision {
        Precision(self.0.prec())
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    fn abs(&self) -> Self {
        Real(self.0.clone().abs())
    }

    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    fn log10_abs(&self) -> f64 {
        if self.0.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.0.clone().abs().log10().to_f64()
    }

    fn to_sci_string(&self, digits: usize) -> String {
        if self.0.is_zero() {
            return "0".to_string();
        }
        let l = self.log10_abs();
        if l.abs() < 250.0 {
            return format!("{:.*e}", digits.min(16).saturating_sub(1), self.0.to_f64());
        }
        let e = l.floor();
        let mant = 10f64.powf(l - e) * if self.0.is_sign_negative() { -1.0 } else { 1.0 };
        format!("{:.*}e{}", digits.min(16).saturating_sub(1), mant, e as i64)
    }

    fn to_repr(&self) -> String {
        format!("{}:{}", self.0.prec(), self.0.to_string_radix(16, None))
    }

    fn from_repr(s: &str, ctx: Precision) -> Option<Self> {
        let (prec, body) = s.split_once(':')?;
        let prec: u32 = prec.parse().ok()?;
        if prec != ctx.0 {
            return None;
        }
        let parsed = Float::parse_radix(body, 16).ok()?;
        Some(Real(Float::with_val(prec, parsed)))
    }

    fn ctx_for_digits(digits: u32) -> Precision {
        Precision::from_digits(digits)
    }

    fn precision_digits(ctx: Precision) -> Option<u32> {
        Some(ctx.digits())
    }

    fn checked_div(&self, rhs: &Self) -> Result<Self, NumericsError> {
        if rhs.0.is_zero() {
            return Err(NumericsError::DivisionByZero);
        }
        let q = Float::with_val(self.0.prec(), &self.0 / &rhs.0);
        if !q.is_finite() {
            return Err(NumericsError::NonFinite);
        }
        Ok(Real(q))
    }
}

impl Add for Real {
    type Output = Real;
    fn add(self, rhs: Real) -> Real {
        Real(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Real> for Real {
    type Output = Real;
    fn add(self, rhs: &'a Real) -> Real {
        Real(self.0 + &rhs.0)
    }
}

impl Sub for Real {
    type Output = Real;
    fn sub(self, rhs: Real) -> Real {
        Real(self.0 - rhs.0)
    }
}

impl<'a> Sub<&'a Real> for Real {
    type Output = Real;
    fn sub(self, rhs: &'a Real) -> Real {
        Real(self.0 - &rhs.0)
    }
}

impl Mul for Real {
    type Output = Real;
    fn mul(self, rhs: Real) -> Real {
        Real(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a Real> for Real {
    type Output = Real;
    fn mul(self, rhs: &'a Real) -> Real {
        Real(self.0 * &rhs.0)
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real(-self.0)
    }
}

/// Total order on magnitudes, for picking row maxima and the like.
pub fn cmp_abs<S: Scalar>(a: &S, b: &S) -> Ordering {
    a.log10_abs()
        .partial_cmp(&b.log10_abs())
        .unwrap_or(Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn exact_division_by_zero_is_an_error() {
        let one = Exact::one(());
        assert_eq!(
            one.checked_div(&Exact::zero(())),
            Err(NumericsError::DivisionByZero)
        );
    }

    #[test]
    fn real_division_by_zero_is_an_error() {
        let p = Precision::from_digits(50);
        let one = Real::one(p);
        assert_eq!(
            one.checked_div(&Real::zero(p)),
            Err(NumericsError::DivisionByZero)
        );
    }

    #[test]
    fn powi_negative_and_positive() {
        let x = Exact::from_ratio(&rat(2, 3), ());
        assert_eq!(x.powi(3).unwrap(), Exact::from_ratio(&rat(8, 27), ()));
        assert_eq!(x.powi(-2).unwrap(), Exact::from_ratio(&rat(9, 4), ()));
        assert_eq!(x.powi(0).unwrap(), Exact::one(()));
        assert!(Exact::zero(()).powi(-1).is_err());
    }

    #[test]
    fn log10_of_huge_rational() {
        let big = Exact(BigRational::from_integer(BigInt::from(10).pow(500)));
        assert!((big.log10_abs() - 500.0).abs() < 1e-9);
        let tiny = big.recip().unwrap();
        assert!((tiny.log10_abs() + 500.0).abs() < 1e-9);
    }

    #[test]
    fn float_chain_relative_error() {
        // 100-operation product/quotient chain at p digits stays within 10^(5-p).
        let digits = 60;
        let p = Precision::from_digits(digits);
        let mut xr = Real::one(p);
        let mut xe = Exact::one(());
        for k in 1..=50i64 {
            let f = rat(3 * k + 1, 7 * k + 2);
            let g = rat(11 * k + 5, 2 * k + 9);
            xr = xr * Real::from_ratio(&f, p);
            xr = xr.checked_div(&Real::from_ratio(&g, p)).unwrap();
            xe = xe * Exact::from_ratio(&f, ());
            xe = xe.checked_div(&Exact::from_ratio(&g, ())).unwrap();
        }
        let back = Real::from_ratio(&xe.0, p);
        assert!(xr.rel_diff(&back) <= 10f64.powi(5 - digits as i32));
    }

    proptest! {
        #[test]
        fn exact_add_sub_roundtrip(a in -10_000i64..10_000, b in 1i64..500, c in -10_000i64..10_000, d in 1i64..500) {
            let x = Exact::from_ratio(&rat(a, b), ());
            let y = Exact::from_ratio(&rat(c, d), ());
            prop_assert_eq!((x.clone() + &y) - &y, x);
        }
    }
}
