//! The parameter record: square-root generators, truncation orders and the
//! derived multiplicative parameters.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::genericity::check_genericity;
use super::scalar::Scalar;
use crate::error::{Error, Result};

pub const DEFAULT_THETA_TERMS: usize = 40;
pub const DEFAULT_PRECISION: u32 = 120;

/// A square-root generator, 0-based for `u` and `zeta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GenVar {
    SqrtQ,
    SqrtHbar,
    SqrtU(usize),
    SqrtZeta(usize),
}

impl GenVar {
    /// Position of the generator in the exponent layout
    /// `[q, hbar, u_1..u_n, zeta_1..zeta_n]`.
    pub fn index(self, n: usize) -> usize {
        match self {
            GenVar::SqrtQ => 0,
            GenVar::SqrtHbar => 1,
            GenVar::SqrtU(i) => 2 + i,
            GenVar::SqrtZeta(i) => 2 + n + i,
        }
    }

    pub fn name(self) -> String {
        match self {
            GenVar::SqrtQ => "q".into(),
            GenVar::SqrtHbar => "hbar".into(),
            GenVar::SqrtU(i) => format!("u{}", i + 1),
            GenVar::SqrtZeta(i) => format!("zeta{}", i + 1),
        }
    }

    pub fn all(n: usize) -> Vec<GenVar> {
        let mut v = vec![GenVar::SqrtQ, GenVar::SqrtHbar];
        v.extend((0..n).map(GenVar::SqrtU));
        v.extend((0..n).map(GenVar::SqrtZeta));
        v
    }
}

mod ratio_str {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn format(r: &BigRational) -> String {
        format!("{}/{}", r.numer(), r.denom())
    }

    pub fn parse(s: &str) -> Result<BigRational, String> {
        let s = s.trim();
        let r = match s.split_once('/') {
            Some((a, b)) => {
                let a = a.trim().parse().map_err(|e| format!("{s}: {e}"))?;
                let b: num_bigint::BigInt = b.trim().parse().map_err(|e| format!("{s}: {e}"))?;
                if b == 0.into() {
                    return Err(format!("{s}: zero denominator"));
                }
                BigRational::new(a, b)
            }
            None => BigRational::from_integer(s.parse().map_err(|e| format!("{s}: {e}"))?),
        };
        Ok(r)
    }

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[BigRational], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for r in v {
                seq.serialize_element(&format(r))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigRational>, D::Error> {
            let v = Vec::<String>::deserialize(d)?;
            v.iter()
                .map(|s| parse(s).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

pub use ratio_str::{format as format_ratio, parse as parse_ratio};

/// Backend-independent description of a parameter point. This is what gets
/// serialized, hashed and sampled.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamSpec {
    pub n: usize,
    #[serde(with = "ratio_str")]
    pub sqrt_q: BigRational,
    #[serde(with = "ratio_str")]
    pub sqrt_hbar: BigRational,
    #[serde(with = "ratio_str::vec")]
    pub sqrt_u: Vec<BigRational>,
    #[serde(with = "ratio_str::vec")]
    pub sqrt_zeta: Vec<BigRational>,
    pub theta_terms: usize,
    pub max_degree: usize,
    #[serde(default = "default_precision")]
    pub precision: u32,
}

fn default_precision() -> u32 {
    DEFAULT_PRECISION
}

fn ratio_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl ParamSpec {
    /// Validate and run the genericity check.
    pub fn new(
        n: usize,
        sqrt_q: BigRational,
        sqrt_hbar: BigRational,
        sqrt_u: Vec<BigRational>,
        sqrt_zeta: Vec<BigRational>,
        theta_terms: usize,
        max_degree: usize,
    ) -> Result<Self> {
        let spec = Self::new_unchecked(
            n,
            sqrt_q,
            sqrt_hbar,
            sqrt_u,
            sqrt_zeta,
            theta_terms,
            max_degree,
        )?;
        spec.check_generic()?;
        Ok(spec)
    }

    /// Validate shape, nonvanishing and `|q| < 1`, but skip genericity.
    /// Needed for degenerate points such as `hbar = q`.
    pub fn new_unchecked(
        n: usize,
        sqrt_q: BigRational,
        sqrt_hbar: BigRational,
        sqrt_u: Vec<BigRational>,
        sqrt_zeta: Vec<BigRational>,
        theta_terms: usize,
        max_degree: usize,
    ) -> Result<Self> {
        let spec = ParamSpec {
            n,
            sqrt_q,
            sqrt_hbar,
            sqrt_u,
            sqrt_zeta,
            theta_terms,
            max_degree,
            precision: DEFAULT_PRECISION,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameters(format!("n = {} < 2", self.n)));
        }
        if self.sqrt_u.len() != self.n || self.sqrt_zeta.len() != self.n {
            return Err(Error::InvalidParameters(format!(
                "expected {} values of sqrt_u and sqrt_zeta, got {} and {}",
                self.n,
                self.sqrt_u.len(),
                self.sqrt_zeta.len()
            )));
        }
        if self.theta_terms < 1 {
            return Err(Error::InvalidParameters("theta_terms must be >= 1".into()));
        }
        if self.generators().iter().any(|g| g.is_zero()) {
            return Err(Error::InvalidParameters(
                "square-root generators must be nonzero".into(),
            ));
        }
        let q = self.q();
        if q.abs() >= BigRational::one() {
            return Err(Error::DegenerateModulus {
                abs_q: ratio_f64(&q.abs()),
            });
        }
        Ok(())
    }

    /// Exponent window of the genericity check.
    pub fn genericity_window(&self) -> i64 {
        2 * self.max_degree as i64 + 2 * self.n as i64
    }

    pub fn check_generic(&self) -> Result<()> {
        let verdict = check_genericity(&self.generators(), self.genericity_window());
        match verdict.witness {
            None => Ok(()),
            Some(w) => Err(Error::NonGenericParameters {
                monomial: self.describe_monomial(&w),
            }),
        }
    }

    fn describe_monomial(&self, exps: &[i64]) -> String {
        let parts: Vec<String> = GenVar::all(self.n)
            .into_iter()
            .zip(exps)
            .filter(|(_, e)| **e != 0)
            .map(|(v, e)| format!("{}^{}", v.name(), e))
            .collect();
        parts.join(" ")
    }

    /// Generators in the exponent layout of [`GenVar::index`].
    pub fn generators(&self) -> Vec<BigRational> {
        let mut g = vec![self.sqrt_q.clone(), self.sqrt_hbar.clone()];
        g.extend(self.sqrt_u.iter().cloned());
        g.extend(self.sqrt_zeta.iter().cloned());
        g
    }

    pub fn generator(&self, v: GenVar) -> &BigRational {
        match v {
            GenVar::SqrtQ => &self.sqrt_q,
            GenVar::SqrtHbar => &self.sqrt_hbar,
            GenVar::SqrtU(i) => &self.sqrt_u[i],
            GenVar::SqrtZeta(i) => &self.sqrt_zeta[i],
        }
    }

    pub fn generator_mut(&mut self, v: GenVar) -> &mut BigRational {
        match v {
            GenVar::SqrtQ => &mut self.sqrt_q,
            GenVar::SqrtHbar => &mut self.sqrt_hbar,
            GenVar::SqrtU(i) => &mut self.sqrt_u[i],
            GenVar::SqrtZeta(i) => &mut self.sqrt_zeta[i],
        }
    }

    pub fn q(&self) -> BigRational {
        &self.sqrt_q * &self.sqrt_q
    }

    pub fn hbar(&self) -> BigRational {
        &self.sqrt_hbar * &self.sqrt_hbar
    }

    pub fn u(&self, i: usize) -> BigRational {
        &self.sqrt_u[i] * &self.sqrt_u[i]
    }

    pub fn zeta(&self, i: usize) -> BigRational {
        &self.sqrt_zeta[i] * &self.sqrt_zeta[i]
    }

    /// `a_i = u_i / u_{i+1}`, 0-based.
    pub fn a(&self, i: usize) -> BigRational {
        self.u(i) / self.u(i + 1)
    }

    /// `sqrt(z_i) = (sqrt q / sqrt hbar) sqrt(zeta_i) / sqrt(zeta_{i+1})`.
    pub fn sqrt_z(&self, i: usize) -> BigRational {
        &self.sqrt_q / &self.sqrt_hbar * &self.sqrt_zeta[i] / &self.sqrt_zeta[i + 1]
    }

    /// `z_i = (q / hbar) zeta_i / zeta_{i+1}`, 0-based.
    pub fn z(&self, i: usize) -> BigRational {
        self.q() / self.hbar() * self.zeta(i) / self.zeta(i + 1)
    }

    pub fn abs_q(&self) -> f64 {
        ratio_f64(&self.q().abs())
    }

    /// Multiply one generator by `sqrt(q)^k`, so the full character moves by
    /// `q^k`. Genericity is unaffected because `q` is already a generator.
    pub fn shift(&self, v: GenVar, k: i64) -> ParamSpec {
        assert!(v != GenVar::SqrtQ, "q cannot be shifted by itself");
        let mut out = self.clone();
        let f = pow_ratio(&self.sqrt_q, k);
        *out.generator_mut(v) = out.generator(v) * f;
        out
    }

    pub fn with_truncation(&self, theta_terms: usize, max_degree: usize) -> ParamSpec {
        let mut out = self.clone();
        out.theta_terms = theta_terms;
        out.max_degree = max_degree;
        out
    }

    pub fn with_precision(&self, digits: u32) -> ParamSpec {
        let mut out = self.clone();
        out.precision = digits;
        out
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("ParamSpec always serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let spec: ParamSpec = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

pub fn pow_ratio(r: &BigRational, k: i64) -> BigRational {
    let base = if k < 0 { r.recip() } else { r.clone() };
    let mut acc = BigRational::one();
    for _ in 0..k.unsigned_abs() {
        acc *= &base;
    }
    acc
}

/// A [`ParamSpec`] converted into a concrete backend, with every derived
/// parameter precomputed. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ParamSet<S: Scalar> {
    spec: ParamSpec,
    ctx: S::Ctx,
    gens: Vec<S>,
    pub sqrt_q: S,
    pub q: S,
    pub sqrt_hbar: S,
    pub hbar: S,
    pub sqrt_u: Vec<S>,
    pub u: Vec<S>,
    pub sqrt_zeta: Vec<S>,
    pub zeta: Vec<S>,
    /// `a_i = u_i/u_{i+1}`, length `n-1`.
    pub a: Vec<S>,
    pub sqrt_z: Vec<S>,
    /// `z_i = (q/hbar) zeta_i/zeta_{i+1}`, length `n-1`.
    pub z: Vec<S>,
}

impl<S: Scalar> ParamSet<S> {
    /// Convert using the precision recorded in the spec.
    pub fn from_spec(spec: &ParamSpec) -> Result<Self> {
        Self::with_ctx(spec, S::ctx_for_digits(spec.precision))
    }

    pub fn with_ctx(spec: &ParamSpec, ctx: S::Ctx) -> Result<Self> {
        spec.validate()?;
        let n = spec.n;
        let conv = |r: &BigRational| S::from_ratio(r, ctx);
        let gens: Vec<S> = spec.generators().iter().map(conv).collect();
        let sqrt_q = gens[0].clone();
        let sqrt_hbar = gens[1].clone();
        let sqrt_u: Vec<S> = gens[2..2 + n].to_vec();
        let sqrt_zeta: Vec<S> = gens[2 + n..2 + 2 * n].to_vec();
        let sqrt_z: Vec<S> = (0..n - 1).map(|i| conv(&spec.sqrt_z(i))).collect();
        Ok(ParamSet {
            q: sqrt_q.square(),
            hbar: sqrt_hbar.square(),
            u: sqrt_u.iter().map(|x| x.square()).collect(),
            zeta: sqrt_zeta.iter().map(|x| x.square()).collect(),
            a: (0..n - 1).map(|i| conv(&spec.a(i))).collect(),
            z: sqrt_z.iter().map(|x| x.square()).collect(),
            sqrt_q,
            sqrt_hbar,
            sqrt_u,
            sqrt_zeta,
            sqrt_z,
            gens,
            ctx,
            spec: spec.clone(),
        })
    }

    pub fn spec(&self) -> &ParamSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn ctx(&self) -> S::Ctx {
        self.ctx
    }

    pub fn theta_terms(&self) -> usize {
        self.spec.theta_terms
    }

    pub fn max_degree(&self) -> usize {
        self.spec.max_degree
    }

    pub fn generator(&self, idx: usize) -> &S {
        &self.gens[idx]
    }

    pub fn num_generators(&self) -> usize {
        self.gens.len()
    }

    pub fn scalar(&self, r: &BigRational) -> S {
        S::from_ratio(r, self.ctx)
    }

    pub fn int(&self, v: i64) -> S {
        S::from_i64(v, self.ctx)
    }

    pub fn one(&self) -> S {
        S::one(self.ctx)
    }

    pub fn zero(&self) -> S {
        S::zero(self.ctx)
    }

    /// `prod_i gen_i^{e_i}` over the generator layout.
    pub fn monomial_value(&self, exps: &[i32]) -> Result<S> {
        let mut acc = self.one();
        for (g, &e) in self.gens.iter().zip(exps) {
            if e != 0 {
                acc = acc * g.powi(e as i64)?;
            }
        }
        Ok(acc)
    }

    /// Relative tolerance `max(100 |q|^(N-1), precision floor)`.
    pub fn tolerance(&self) -> f64 {
        super::tolerance(
            self.spec.abs_q(),
            self.spec.theta_terms,
            S::precision_digits(self.ctx),
        )
    }

    pub fn precision_digits(&self) -> Option<u32> {
        S::precision_digits(self.ctx)
    }

    /// Same point with one generator shifted by `sqrt(q)^k`.
    pub fn shifted(&self, v: GenVar, k: i64) -> Result<Self> {
        Self::with_ctx(&self.spec.shift(v, k), self.ctx)
    }
}

/// Build and genericity-check a parameter set.
#[allow(clippy::too_many_arguments)]
pub fn build_params<S: Scalar>(
    n: usize,
    sqrt_q: BigRational,
    sqrt_hbar: BigRational,
    sqrt_u: Vec<BigRational>,
    sqrt_zeta: Vec<BigRational>,
    theta_terms: usize,
    max_degree: usize,
    ctx: S::Ctx,
) -> Result<ParamSet<S>> {
    let spec = ParamSpec::new(
        n,
        sqrt_q,
        sqrt_hbar,
        sqrt_u,
        sqrt_zeta,
        theta_terms,
        max_degree,
    )?;
    ParamSet::with_ctx(&spec, ctx)
}

const SAMPLER_ATTEMPTS: usize = 64;

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn random_prime(rng: &mut ChaCha8Rng, used: &mut Vec<u64>) -> u64 {
    loop {
        let p = rng.gen_range(20_000u64..200_000);
        if is_prime(p) && !used.contains(&p) {
            used.push(p);
            return p;
        }
    }
}

/// Rational close to `target > 0` whose numerator is the private prime `p`.
fn rationalize(target: f64, p: u64) -> BigRational {
    let den = (p as f64 / target).round().max(1.0) as u64;
    BigRational::new(BigInt::from(p), BigInt::from(den))
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Deterministic pseudo-random generic parameters with `|q| ~ 1e-2` and
/// `a_i, z_i` in `[1e-3, 1e-1]`.
pub fn sample_params(n: usize, seed: u64, theta_terms: usize, max_degree: usize) -> Result<ParamSpec> {
    if n < 2 {
        return Err(Error::InvalidParameters(format!("n = {n} < 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SAMPLER_ATTEMPTS {
        let mut used = Vec::new();
        let sq = 0.1 * rng.gen_range(0.9..1.1);
        // hbar = c q with c kept away from 1 so that hbar/q is not close to a root of unity.
        let c: f64 = if rng.gen_bool(0.5) {
            rng.gen_range(0.6..0.85)
        } else {
            rng.gen_range(1.15..1.6)
        };
        let mut su = vec![0.0; n];
        let mut sz = vec![0.0; n];
        su[n - 1] = rng.gen_range(0.5..2.0);
        sz[n - 1] = rng.gen_range(0.5..2.0);
        for i in (0..n - 1).rev() {
            let a = log_uniform(&mut rng, 1.5e-3, 7e-2);
            let z = log_uniform(&mut rng, 1.5e-3, 7e-2);
            su[i] = su[i + 1] * a.sqrt();
            sz[i] = sz[i + 1] * (c * z).sqrt();
        }
        let sqrt_q = rationalize(sq, random_prime(&mut rng, &mut used));
        let sqrt_hbar = rationalize(sq * c.sqrt(), random_prime(&mut rng, &mut used));
        let sqrt_u: Vec<_> = su
            .iter()
            .map(|&t| rationalize(t, random_prime(&mut rng, &mut used)))
            .collect();
        let sqrt_zeta: Vec<_> = sz
            .iter()
            .map(|&t| rationalize(t, random_prime(&mut rng, &mut used)))
            .collect();
        let Ok(spec) = ParamSpec::new(
            n,
            sqrt_q,
            sqrt_hbar,
            sqrt_u,
            sqrt_zeta,
            theta_terms,
            max_degree,
        ) else {
            continue;
        };
        let in_range = |x: BigRational| {
            let v = ratio_f64(&x.abs());
            (1e-3..=1e-1).contains(&v)
        };
        if (0..n - 1).all(|i| in_range(spec.a(i)) && in_range(spec.z(i))) {
            return Ok(spec);
        }
    }
    Err(Error::GenericityExhausted {
        attempts: SAMPLER_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Exact, Precision, Real};

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn sqrt_q_squares() {
        let spec = ParamSpec::new_unchecked(
            2,
            r(1, 10),
            r(3, 29),
            vec![r(1, 7), r(5, 3)],
            vec![r(2, 11), r(13, 5)],
            10,
            3,
        )
        .unwrap();
        let p = ParamSet::<Exact>::from_spec(&spec).unwrap();
        assert_eq!(p.q, Exact(r(1, 100)));
    }

    #[test]
    fn unit_zeta_and_hbar_equal_q_gives_unit_z() {
        let spec = ParamSpec::new_unchecked(
            3,
            r(1, 10),
            r(1, 10),
            vec![r(1, 7), r(5, 3), r(2, 9)],
            vec![r(1, 1); 3],
            10,
            3,
        )
        .unwrap();
        let p = ParamSet::<Exact>::from_spec(&spec).unwrap();
        assert!(p.z.iter().all(|z| *z == Exact::one(())));
        // and the checked constructor refuses it
        assert!(matches!(spec.check_generic(), Err(Error::NonGenericParameters { .. })));
    }

    #[test]
    fn equal_u_is_not_generic() {
        let err = ParamSpec::new(
            2,
            r(1, 10),
            r(3, 29),
            vec![r(5, 3), r(5, 3)],
            vec![r(2, 11), r(13, 5)],
            10,
            3,
        )
        .unwrap_err();
        match err {
            Error::NonGenericParameters { monomial } => {
                assert!(monomial.contains("u1") && monomial.contains("u2"), "{monomial}")
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn large_q_is_degenerate() {
        let err = ParamSpec::new_unchecked(2, r(1, 1), r(3, 29), vec![r(1, 3), r(2, 3)], vec![r(1, 5), r(2, 5)], 10, 3)
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateModulus { .. }));
    }

    #[test]
    fn sampler_is_deterministic_and_in_range() {
        let a = sample_params(2, 0, 40, 8).unwrap();
        let b = sample_params(2, 0, 40, 8).unwrap();
        assert_eq!(a, b);
        let s = sample_params(3, 1, 40, 5).unwrap();
        for i in 0..2 {
            assert!(s.a(i).abs() < BigRational::one());
            assert!(s.z(i).abs() < BigRational::one());
        }
        let q = s.abs_q();
        assert!((0.005..0.02).contains(&q), "{q}");
    }

    #[test]
    fn z_roundtrip_is_exact() {
        let spec = sample_params(3, 5, 40, 4).unwrap();
        let p = ParamSet::<Exact>::from_spec(&spec).unwrap();
        for i in 0..2 {
            let recomputed = p.q.clone() * &p.zeta[i]
                * &p.hbar.recip().unwrap()
                * &p.zeta[i + 1].recip().unwrap();
            assert_eq!(recomputed, p.z[i]);
        }
    }

    #[test]
    fn toml_roundtrip() {
        let spec = sample_params(3, 11, 30, 4).unwrap();
        let text = spec.to_toml();
        assert!(text.contains('/'));
        assert_eq!(ParamSpec::from_toml(&text).unwrap(), spec);
    }

    #[test]
    fn float_and_exact_agree() {
        let spec = sample_params(2, 3, 30, 4).unwrap();
        let e = ParamSet::<Exact>::from_spec(&spec).unwrap();
        let f = ParamSet::<Real>::with_ctx(&spec, Precision::from_digits(60)).unwrap();
        let back = Real::from_ratio(&e.z[0].0, f.ctx());
        assert!(back.rel_diff(&f.z[0]) < 1e-55);
    }
}
