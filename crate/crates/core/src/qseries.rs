//! Truncated q-products, Pochhammer symbols of either sign, theta functions
//! and their multiset extensions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::WeightMultiset;
use crate::numerics::{GenVar, ParamSet, Scalar};

/// A monomial in the square-root generators, stored as an exponent vector
/// in the layout `[q, hbar, u_1..u_n, zeta_1..zeta_n]`.
///
/// A character `x` such as `u_2/u_1` is stored with even exponents; its
/// square root is then obtained by halving.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SqrtMonomial {
    exps: Vec<i32>,
}

impl SqrtMonomial {
    pub fn identity(n: usize) -> Self {
        SqrtMonomial {
            exps: vec![0; 2 + 2 * n],
        }
    }

    pub fn from_exponents(exps: Vec<i32>) -> Self {
        assert!(exps.len() >= 6 && exps.len().is_multiple_of(2), "bad exponent layout");
        SqrtMonomial { exps }
    }

    /// A single square-root generator.
    pub fn generator(n: usize, v: GenVar) -> Self {
        let mut m = Self::identity(n);
        m.exps[v.index(n)] = 1;
        m
    }

    pub fn q(n: usize) -> Self {
        Self::generator(n, GenVar::SqrtQ).pow(2)
    }

    pub fn hbar(n: usize) -> Self {
        Self::generator(n, GenVar::SqrtHbar).pow(2)
    }

    /// `u_i`, 0-based.
    pub fn u(n: usize, i: usize) -> Self {
        Self::generator(n, GenVar::SqrtU(i)).pow(2)
    }

    /// `zeta_i`, 0-based.
    pub fn zeta(n: usize, i: usize) -> Self {
        Self::generator(n, GenVar::SqrtZeta(i)).pow(2)
    }

    /// `a_i = u_i/u_{i+1}`, 0-based.
    pub fn a(n: usize, i: usize) -> Self {
        Self::u(n, i).div(&Self::u(n, i + 1))
    }

    /// `z_i = (q/hbar) zeta_i/zeta_{i+1}`, 0-based.
    pub fn z(n: usize, i: usize) -> Self {
        Self::q(n)
            .div(&Self::hbar(n))
            .mul(&Self::zeta(n, i))
            .div(&Self::zeta(n, i + 1))
    }

    pub fn n(&self) -> usize {
        (self.exps.len() - 2) / 2
    }

    pub fn exponents(&self) -> &[i32] {
        &self.exps
    }

    pub fn exponent(&self, v: GenVar) -> i32 {
        self.exps[v.index(self.n())]
    }

    pub fn is_identity(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Self) -> Self {
        SqrtMonomial {
            exps: self.exps.iter().zip(&other.exps).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn div(&self, other: &Self) -> Self {
        SqrtMonomial {
            exps: self.exps.iter().zip(&other.exps).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn inv(&self) -> Self {
        SqrtMonomial {
            exps: self.exps.iter().map(|a| -a).collect(),
        }
    }

    pub fn pow(&self, k: i32) -> Self {
        SqrtMonomial {
            exps: self.exps.iter().map(|a| a * k).collect(),
        }
    }

    /// Halve every exponent; `None` unless all exponents are even.
    pub fn sqrt(&self) -> Option<Self> {
        if self.exps.iter().all(|e| e % 2 == 0) {
            Some(SqrtMonomial {
                exps: self.exps.iter().map(|e| e / 2).collect(),
            })
        } else {
            None
        }
    }

    pub fn value<S: Scalar>(&self, p: &ParamSet<S>) -> Result<S> {
        p.monomial_value(&self.exps)
    }

    /// Value of the square root of this character.
    pub fn sqrt_value<S: Scalar>(&self, p: &ParamSet<S>) -> Result<S> {
        let s = self
            .sqrt()
            .ok_or_else(|| Error::InvalidParameters(format!("{self} is not a character")))?;
        s.value(p)
    }

    /// Exponents of the `u`-part rewritten in `a_i = u_i/u_{i+1}` as full
    /// characters; `None` if the `u`-part has nonzero total degree.
    pub fn a_exponents(&self) -> Option<Vec<i32>> {
        let n = self.n();
        let m: Vec<i32> = (0..n).map(|i| self.exps[2 + i]).collect();
        if m.iter().sum::<i32>() != 0 || m.iter().any(|e| e % 2 != 0) {
            return None;
        }
        let mut acc = 0;
        Some(
            m[..n - 1]
                .iter()
                .map(|e| {
                    acc += e / 2;
                    acc
                })
                .collect(),
        )
    }
}

impl fmt::Display for SqrtMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.n();
        let even = self.exps.iter().all(|e| e % 2 == 0);
        let mut parts = Vec::new();
        for v in GenVar::all(n) {
            let e = self.exps[v.index(n)];
            if e == 0 {
                continue;
            }
            let (name, e) = if even {
                (v.name(), e / 2)
            } else {
                (format!("sqrt({})", v.name()), e)
            };
            parts.push(if e == 1 { name } else { format!("{name}^{e}") });
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

impl fmt::Debug for SqrtMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SqrtMonomial({self})")
    }
}

/// `prod_{i=0}^{N-1} (1 - x q^i)`.
pub fn phi_trunc<S: Scalar>(x: &S, q: &S, terms: usize) -> S {
    let mut acc = S::one(x.ctx());
    let mut xq = x.clone();
    for _ in 0..terms {
        acc = acc * (S::one(x.ctx()) - &xq);
        xq = xq * q;
    }
    acc
}

/// Number of factors that keeps the dropped tail of `phi(x)` below `|q|^N`
/// relative to one: `N` plus however many factors have `|x q^i| > 1`.
fn adaptive_terms<S: Scalar>(x: &S, q: &S, terms: usize) -> usize {
    let lx = x.log10_abs();
    if !lx.is_finite() || lx <= 0.0 {
        return terms;
    }
    let lq = -q.log10_abs();
    terms + (lx / lq).ceil() as usize
}

/// `phi(x)` with the truncation order raised for large `|x|` so that the
/// relative truncation error is uniformly of order `|q|^N`.
pub fn phi<S: Scalar>(x: &S, q: &S, terms: usize) -> S {
    phi_trunc(x, q, adaptive_terms(x, q, terms))
}

/// `(x)_d = phi(x)/phi(x q^d)` as a finite product.
pub fn pochhammer<S: Scalar>(x: &S, q: &S, d: i64) -> Result<S> {
    let one = S::one(x.ctx());
    let mut acc = one.clone();
    if d >= 0 {
        let mut xq = x.clone();
        for _ in 0..d {
            acc = acc * (one.clone() - &xq);
            xq = xq * q;
        }
        Ok(acc)
    } else {
        let qinv = q.recip()?;
        let mut xq = x.clone() * &qinv;
        for i in 1..=(-d) {
            let f = one.clone() - &xq;
            if f.is_zero() {
                return Err(Error::PochhammerPole { exponent: -i });
            }
            acc = acc.checked_div(&f)?;
            xq = xq * &qinv;
        }
        Ok(acc)
    }
}

/// `(a)_m / (b)_m` as a single finite product. A vanishing numerator is a
/// legitimate zero; only a vanishing denominator factor is an error.
pub fn poch_ratio<S: Scalar>(a: &S, b: &S, q: &S, m: i64) -> Result<S> {
    let one = S::one(a.ctx());
    let mut num = one.clone();
    let mut den = one.clone();
    // A vanishing numerator factor makes the ratio identically zero in the
    // parameters, so it wins over a simultaneous vanishing denominator.
    let mut pole = None;
    let (step, mut aq, mut bq, range) = if m >= 0 {
        (q.clone(), a.clone(), b.clone(), 0..m)
    } else {
        let qinv = q.recip()?;
        let (x, y) = (b.clone() * &qinv, a.clone() * &qinv);
        (qinv, x, y, 1..(-m + 1))
    };
    for i in range {
        let fnum = one.clone() - &aq;
        let fden = one.clone() - &bq;
        if fnum.is_zero() {
            return Ok(S::zero(a.ctx()));
        }
        if fden.is_zero() && pole.is_none() {
            pole = Some(if m >= 0 { i } else { -i });
        }
        num = num * fnum;
        den = den * fden;
        aq = aq * &step;
        bq = bq * &step;
    }
    if let Some(exponent) = pole {
        return Err(Error::PochhammerPole { exponent });
    }
    Ok(num.checked_div(&den)?)
}

fn theta_with<S: Scalar>(s: &S, q: &S, terms: usize, adaptive: bool) -> Result<S> {
    if s.is_zero() {
        return Err(Error::ZeroArgument);
    }
    let x = s.square();
    let xinv = x.recip()?;
    let qx = q.clone() * &x;
    let qox = q.clone() * &xinv;
    let (a, b) = if adaptive {
        (phi(&qx, q, terms), phi(&qox, q, terms))
    } else {
        (phi_trunc(&qx, q, terms), phi_trunc(&qox, q, terms))
    };
    Ok((s.clone() - s.recip()?) * a * b)
}

/// `(s - 1/s) phi(q s^2) phi(q/s^2)` with exactly `N` factors in each
/// product. Odd under `s -> 1/s` at every `N`.
pub fn theta_trunc<S: Scalar>(s: &S, q: &S, terms: usize) -> Result<S> {
    theta_with(s, q, terms, false)
}

/// Theta with the argument-adaptive truncation of [`phi`]. This is the
/// evaluation used by every higher-level formula; it is still exactly odd.
pub fn theta<S: Scalar>(s: &S, q: &S, terms: usize) -> Result<S> {
    theta_with(s, q, terms, true)
}

/// Theta of a character given as a monomial.
pub fn theta_monomial<S: Scalar>(x: &SqrtMonomial, p: &ParamSet<S>) -> Result<S> {
    theta(&x.sqrt_value(p)?, &p.q, p.theta_terms())
}

/// Exact quasi-period: `theta(q^k x) / theta(x) = (-1)^k q^{-k^2/2} x^{-k}`,
/// returned as a sign and a monomial in the generators.
pub fn theta_shift_monomial(x: &SqrtMonomial, k: i32) -> (i32, SqrtMonomial) {
    let n = x.n();
    let sign = if k % 2 == 0 { 1 } else { -1 };
    let m = SqrtMonomial::generator(n, GenVar::SqrtQ)
        .pow(-k * k)
        .mul(&x.pow(-k));
    (sign, m)
}

/// Same quasi-period factor for a numeric square root `s` of `x`.
pub fn theta_shift_factor<S: Scalar>(s: &S, sqrt_q: &S, k: i64) -> Result<S> {
    let sign = if k % 2 == 0 { 1 } else { -1 };
    let v = sqrt_q.powi(-k * k)? * s.powi(-2 * k)?;
    Ok(if sign < 0 { -v } else { v })
}

/// `Theta(V) = prod theta(w)^{m_w}`.
pub fn theta_multiset<S: Scalar>(v: &WeightMultiset, p: &ParamSet<S>) -> Result<S> {
    let mut num = p.one();
    let mut den = p.one();
    for (w, &m) in v.iter() {
        let t = theta_monomial(w, p)?;
        if m > 0 {
            num = num * t.powi(m)?;
        } else if m < 0 {
            if t.is_zero() {
                return Err(Error::DivisionByZeroTheta {
                    context: format!("theta({w})"),
                });
            }
            den = den * t.powi(-m)?;
        }
    }
    Ok(num.checked_div(&den)?)
}

/// `Phi(V) = prod phi(w)^{m_w}`.
pub fn phi_multiset<S: Scalar>(v: &WeightMultiset, p: &ParamSet<S>) -> Result<S> {
    let mut acc = p.one();
    for (w, &m) in v.iter() {
        let f = phi(&w.value(p)?, &p.q, p.theta_terms());
        acc = acc * f.powi(m)?;
    }
    Ok(acc)
}

/// `Phi((q - hbar) V) = prod (phi(q w)/phi(hbar w))^{m_w}`.
pub fn phi_diff<S: Scalar>(v: &WeightMultiset, p: &ParamSet<S>) -> Result<S> {
    let mut acc = p.one();
    for (w, &m) in v.iter() {
        let wv = w.value(p)?;
        let num = phi(&(p.q.clone() * &wv), &p.q, p.theta_terms());
        let den = phi(&(p.hbar.clone() * &wv), &p.q, p.theta_terms());
        acc = acc * num.checked_div(&den)?.powi(m)?;
    }
    Ok(acc)
}

/// `phi(q q^k w)/phi(hbar q^k w)` divided by the same at `k = 0`, i.e.
/// `(hbar w)_k / (q w)_k`. Finite and exact.
pub fn phi_diff_shift_ratio<S: Scalar>(w: &S, q: &S, hbar: &S, k: i64) -> Result<S> {
    poch_ratio(&(hbar.clone() * w), &(q.clone() * w), q, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Exact, Precision, Real};
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn ex(n: i64, d: i64) -> Exact {
        Exact(BigRational::new(n.into(), d.into()))
    }

    fn re(n: i64, d: i64, digits: u32) -> Real {
        Real::from_ratio(
            &BigRational::new(n.into(), d.into()),
            Precision::from_digits(digits),
        )
    }

    #[test]
    fn phi_single_factor_and_zero() {
        let q = ex(1, 100);
        let x = ex(3, 7);
        assert_eq!(phi_trunc(&x, &q, 1), ex(4, 7));
        assert_eq!(phi_trunc(&Exact::zero(()), &q, 25), Exact::one(()));
    }

    #[test]
    fn phi_tail_bound() {
        let q = re(1, 3, 60);
        for (xn, xd) in [(1, 1), (1, 2), (7, 9), (1, 50)] {
            let x = re(xn, xd, 60);
            for n in [5usize, 10, 20] {
                let a = phi_trunc(&x, &q, n);
                let b = phi_trunc(&x, &q, n + 10);
                let c = phi_trunc(&x, &q, n + 50);
                let bound = 2.0 * x.abs().to_f64() * q.to_f64().powi(n as i32);
                assert!((a.clone() - &b).abs().to_f64() <= bound);
                assert!((a - &c).abs().to_f64() <= bound);
            }
        }
        // For negative x the partial product itself exceeds one and the
        // constant 2 is not enough.
        let x = re(-1, 2, 60);
        let n = 5;
        let diff = (phi_trunc(&x, &q, n) - &phi_trunc(&x, &q, n + 10)).abs().to_f64();
        assert!(diff > 2.0 * 0.5 * q.to_f64().powi(n as i32));
    }

    #[test]
    fn pochhammer_examples() {
        let q = ex(1, 100);
        let x = ex(2, 3);
        assert_eq!(pochhammer(&x, &q, 0).unwrap(), Exact::one(()));
        let expect = (Exact::one(()) - &x) * (Exact::one(()) - q.clone() * &x);
        assert_eq!(pochhammer(&x, &q, 2).unwrap(), expect);
        let expect = Exact::one(())
            .checked_div(&(Exact::one(()) - x.clone() * &q.recip().unwrap()))
            .unwrap();
        assert_eq!(pochhammer(&x, &q, -1).unwrap(), expect);
    }

    #[test]
    fn pochhammer_pole_detected() {
        let q = ex(1, 100);
        let x = ex(1, 10000); // x q^{-2} = 1
        assert!(matches!(
            pochhammer(&x, &q, -3),
            Err(Error::PochhammerPole { exponent: -2 })
        ));
    }

    #[test]
    fn poch_ratio_zero_numerator_is_fine() {
        let q = ex(1, 100);
        // (hbar)_{-1}/(q)_{-1} with hbar = q: numerator 1 - q/q = 0
        assert!(poch_ratio(&ex(1, 3), &q, &q, -1).unwrap().is_zero());
    }

    #[test]
    fn theta_at_one_vanishes() {
        let q = ex(1, 100);
        assert!(theta_trunc(&Exact::one(()), &q, 10).unwrap().is_zero());
        assert!(matches!(
            theta_trunc(&Exact::zero(()), &q, 10),
            Err(Error::ZeroArgument)
        ));
    }

    #[test]
    fn theta_quasi_period_within_truncation() {
        let digits = 80;
        let q = re(1, 100, digits);
        let sq = re(1, 10, digits);
        let n = 12;
        for (a, b) in [(3, 7), (11, 5), (1, 3)] {
            let s = re(a, b, digits);
            let x = s.square();
            let lhs = theta_trunc(&(s.clone() * &sq), &q, n).unwrap();
            let rhs = theta_trunc(&s, &q, n).unwrap().checked_div(&(sq.clone() * &x)).unwrap();
            let res = (lhs + &rhs).abs().to_f64() / theta_trunc(&s, &q, n).unwrap().abs().to_f64();
            assert!(res <= 10.0 * q.to_f64().powi(n as i32 - 1), "{res}");
        }
    }

    #[test]
    fn theta_quasi_period_residual_scales_with_terms() {
        let digits = 200;
        let q = re(1, 100, digits);
        let sq = re(1, 10, digits);
        let s = re(5, 3, digits);
        let res = |n: usize| {
            let lhs = theta_trunc(&(s.clone() * &sq), &q, n).unwrap();
            let rhs = theta_trunc(&s, &q, n)
                .unwrap()
                .checked_div(&(sq.clone() * &s.square()))
                .unwrap();
            ((lhs + &rhs).checked_div(&theta_trunc(&s, &q, n).unwrap()).unwrap()).log10_abs()
        };
        let (r8, r16) = (res(8), res(16));
        assert!(r16 <= 2.0 * r8, "{r8} {r16}");
    }

    #[test]
    fn shift_monomial_matches_numeric_factor() {
        let spec = crate::numerics::sample_params(2, 4, 30, 3).unwrap();
        let p = ParamSet::<Real>::from_spec(&spec).unwrap();
        let x = SqrtMonomial::u(2, 1).div(&SqrtMonomial::u(2, 0));
        for k in [-2, -1, 1, 3] {
            let (sign, m) = theta_shift_monomial(&x, k);
            let a = m.value(&p).unwrap() * &p.int(sign as i64);
            let b = theta_shift_factor(&x.sqrt_value(&p).unwrap(), &p.sqrt_q, k as i64).unwrap();
            assert!(a.rel_diff(&b) < 1e-100);
            let shifted = x.mul(&SqrtMonomial::q(2).pow(k));
            let ratio = theta_monomial(&shifted, &p)
                .unwrap()
                .checked_div(&theta_monomial(&x, &p).unwrap())
                .unwrap();
            assert!(ratio.rel_diff(&a) < p.tolerance());
        }
    }

    #[test]
    fn adaptive_theta_is_accurate_for_large_arguments() {
        let digits = 200;
        let q = re(1, 100, digits);
        let s = re(1_000_000, 7, digits);
        let a = theta(&s, &q, 30).unwrap();
        let b = theta_trunc(&s, &q, 90).unwrap();
        assert!(a.rel_diff(&b) < 100.0 * 1e-58);
    }

    #[test]
    fn multiset_extensions() {
        let spec = crate::numerics::sample_params(2, 4, 30, 3).unwrap();
        let p = ParamSet::<Real>::from_spec(&spec).unwrap();
        let empty = WeightMultiset::new(2);
        assert_eq!(phi_multiset(&empty, &p).unwrap(), p.one());
        assert_eq!(phi_diff(&empty, &p).unwrap(), p.one());
        let w = SqrtMonomial::u(2, 0)
            .div(&SqrtMonomial::u(2, 1))
            .div(&SqrtMonomial::hbar(2));
        let v = WeightMultiset::from_weights(2, [w.clone()]);
        let diff = v.sub(&v);
        assert_eq!(phi_multiset(&diff, &p).unwrap(), p.one());
        assert_eq!(theta_multiset(&v, &p).unwrap(), theta_monomial(&w, &p).unwrap());
        // expanding (q - hbar) V by hand
        let mut expanded = WeightMultiset::new(2);
        expanded.add_weight(w.mul(&SqrtMonomial::q(2)), 1);
        expanded.add_weight(w.mul(&SqrtMonomial::hbar(2)), -1);
        assert!(phi_diff(&v, &p).unwrap().rel_diff(&phi_multiset(&expanded, &p).unwrap()) < 1e-100);
    }

    #[test]
    fn phi_diff_trivial_at_hbar_equal_q() {
        let spec = crate::numerics::ParamSpec::new_unchecked(
            2,
            BigRational::new(1.into(), 10.into()),
            BigRational::new(1.into(), 10.into()),
            vec![BigRational::new(1.into(), 3.into()), BigRational::new(2.into(), 1.into())],
            vec![BigRational::new(1.into(), 5.into()), BigRational::new(7.into(), 3.into())],
            8,
            2,
        )
        .unwrap();
        let p = ParamSet::<Exact>::from_spec(&spec).unwrap();
        let v = WeightMultiset::from_weights(2, [SqrtMonomial::a(2, 0)]);
        assert_eq!(phi_diff(&v, &p).unwrap(), Exact::one(()));
    }

    #[test]
    fn phi_diff_shift_ratio_matches() {
        let spec = crate::numerics::sample_params(2, 9, 30, 3).unwrap();
        let p = ParamSet::<Real>::from_spec(&spec).unwrap();
        let w = p.u[1].clone().checked_div(&p.u[0]).unwrap();
        let f = |w: &Real| {
            phi(&(p.q.clone() * w), &p.q, 40)
                .checked_div(&phi(&(p.hbar.clone() * w), &p.q, 40))
                .unwrap()
        };
        for k in [-2i64, -1, 1, 2] {
            let shifted = w.clone() * &p.q.powi(k).unwrap();
            let ratio = f(&shifted).checked_div(&f(&w)).unwrap();
            let exact = phi_diff_shift_ratio(&w, &p.q, &p.hbar, k).unwrap();
            assert!(ratio.rel_diff(&exact) < 1e-70);
        }
    }

    proptest! {
        #[test]
        fn theta_odd_exactly(a in 1i64..5000, b in 1i64..5000, n in 1usize..12) {
            let q = ex(1, 100);
            let s = ex(a, b);
            let t = theta_trunc(&s, &q, n).unwrap();
            let u = theta_trunc(&s.recip().unwrap(), &q, n).unwrap();
            prop_assert_eq!(t.clone(), -u);
            let t = theta(&s, &q, n).unwrap();
            let u = theta(&s.recip().unwrap(), &q, n).unwrap();
            prop_assert_eq!(t, -u);
        }

        #[test]
        fn pochhammer_composes(d in -5i64..=5, e in -5i64..=5, a in 1i64..4000) {
            let q = ex(1, 97);
            let x = ex(a, 1009);
            let xqd = x.clone() * &q.powi(d).unwrap();
            let lhs = pochhammer(&x, &q, d).unwrap() * pochhammer(&xqd, &q, e).unwrap();
            prop_assert_eq!(lhs, pochhammer(&x, &q, d + e).unwrap());
        }
    }
}
