//! Macdonald difference operators in the Kähler variables `zeta` and in
//! the equivariant variables `u`, acting on vertex-type series.

use std::sync::Arc;

use rayon::prelude::*;

use crate::combinatorics::Perm;
use crate::error::{Error, Result};
use crate::numerics::{GenVar, ParamSet, Scalar};
use crate::qseries::SqrtMonomial;
use crate::series::TruncatedSeries;
use crate::vertex::{normalized_prefactor, vertex_series, Prefactor};

/// All `r`-subsets of `0..n`, lexicographic.
pub fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

/// `prod_{i in J, j not in J} (t x_i - x_j)/(x_i - x_j)`; `J` is 0-based.
pub fn macdonald_coefficient<S: Scalar>(subset: &[usize], x: &[S], t: &S) -> Result<S> {
    let mut num = S::one(t.ctx());
    let mut den = S::one(t.ctx());
    for &i in subset {
        for j in (0..x.len()).filter(|j| !subset.contains(j)) {
            let d = x[i].clone() - &x[j];
            if d.is_zero() {
                return Err(Error::CoincidentCoordinates { i: i + 1, j: j + 1 });
            }
            num = num * (t.clone() * &x[i] - &x[j]);
            den = den * d;
        }
    }
    Ok(num.checked_div(&den)?)
}

/// `t^{r(r+1)/2 - r n}`.
pub fn operator_prefactor<S: Scalar>(t: &S, n: usize, r: usize) -> Result<S> {
    let e = (r * (r + 1) / 2) as i64 - (r * n) as i64;
    Ok(t.powi(e)?)
}

/// Elementary symmetric polynomial `e_r`.
pub fn elementary_symmetric<S: Scalar>(x: &[S], r: usize) -> S {
    let ctx = x.first().map(|v| v.ctx()).expect("nonempty");
    subsets(x.len(), r)
        .iter()
        .map(|k| k.iter().fold(S::one(ctx), |acc, &i| acc * &x[i]))
        .fold(S::zero(ctx), |a, b| a + b)
}

/// Elementary symmetric polynomials from the coefficients of
/// `prod_i (1 + s x_i)`.
pub fn elementary_symmetric_vieta<S: Scalar>(x: &[S]) -> Vec<S> {
    let ctx = x[0].ctx();
    let mut c = vec![S::one(ctx)];
    for xi in x {
        let mut next = c.clone();
        next.push(S::zero(ctx));
        for k in 0..c.len() {
            next[k + 1] = next[k + 1].clone() + &(c[k].clone() * xi);
        }
        c = next;
    }
    c
}

/// A `zeta`-monomial written as `C zeta_n^{e_n} z^{c}` using
/// `zeta_k/zeta_{k+1} = (hbar/q) z_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZetaSplit {
    /// Everything outside the `zeta` variables, with the `(hbar/q)` powers
    /// absorbed.
    pub rest: SqrtMonomial,
    pub z_exponents: Vec<i32>,
    pub zeta_n_exponent: i32,
}

pub fn split_zeta(m: &SqrtMonomial) -> Result<ZetaSplit> {
    let n = m.n();
    let mut rest = m.clone();
    let mut full = Vec::with_capacity(n);
    for k in 0..n {
        let e = m.exponent(GenVar::SqrtZeta(k));
        if e % 2 != 0 {
            return Err(Error::InvalidParameters(format!("{m} has a half-integer power of zeta")));
        }
        full.push(e / 2);
        rest = rest.div(&SqrtMonomial::zeta(n, k).pow(e / 2));
    }
    let mut c = Vec::with_capacity(n - 1);
    let mut acc = 0;
    for &e in full.iter().take(n - 1) {
        acc += e;
        c.push(acc);
    }
    let total: i32 = c.iter().sum();
    let hq = SqrtMonomial::hbar(n).div(&SqrtMonomial::q(n));
    rest = rest.mul(&hq.pow(total));
    Ok(ZetaSplit {
        rest,
        z_exponents: c,
        zeta_n_exponent: full.iter().sum(),
    })
}

/// `(a0 - a1 m)/(1 - m)` for `m = c z_range`, expanded to the box.
fn ratio_series<S: Scalar>(
    nvars: usize,
    bound: usize,
    range: std::ops::Range<usize>,
    c: &S,
    a0: &S,
    a1: &S,
) -> TruncatedSeries<S> {
    let ctx = c.ctx();
    let mut s = TruncatedSeries::constant(nvars, bound, a0.clone());
    let diff = a0.clone() - a1;
    let mut ck = S::one(ctx);
    for k in 1..=bound {
        ck = ck * c;
        let mut deg = vec![0u32; nvars];
        for v in range.clone() {
            deg[v] = k as u32;
        }
        s.set(&deg, diff.clone() * &ck);
    }
    s
}

type Recipe<S> = Arc<dyn Fn(&ParamSet<S>) -> Result<TruncatedSeries<S>> + Send + Sync>;

/// `prefactor(params) * series(z)` together with a recipe that recomputes
/// the series at other parameters.
#[derive(Clone)]
pub struct ShiftableFunction<S: Scalar> {
    pub prefactor: Prefactor,
    pub series: TruncatedSeries<S>,
    recipe: Option<Recipe<S>>,
}

impl<S: Scalar> std::fmt::Debug for ShiftableFunction<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShiftableFunction")
            .field("prefactor", &self.prefactor)
            .field("series", &self.series)
            .field("has_recipe", &self.recipe.is_some())
            .finish()
    }
}

impl<S: Scalar> ShiftableFunction<S> {
    pub fn new(prefactor: Prefactor, series: TruncatedSeries<S>, recipe: Option<Recipe<S>>) -> Self {
        ShiftableFunction {
            prefactor,
            series,
            recipe,
        }
    }

    /// `V~_I = alpha_I Phi((q - hbar) T^{1/2}_I) V_I`.
    pub fn normalized_vertex(i: &Perm, p: &ParamSet<S>) -> Result<Self> {
        let perm = i.clone();
        let recipe: Recipe<S> = Arc::new(move |q: &ParamSet<S>| vertex_series(&perm, q));
        Ok(ShiftableFunction {
            prefactor: normalized_prefactor(i, p.n()),
            series: recipe(p)?,
            recipe: Some(recipe),
        })
    }

    /// The constant function `1`.
    pub fn constant(p: &ParamSet<S>) -> Self {
        let series = TruncatedSeries::one(p.n() - 1, p.max_degree(), p.ctx());
        let s2 = series.clone();
        ShiftableFunction {
            prefactor: Prefactor { atoms: vec![] },
            series,
            recipe: Some(Arc::new(move |_| Ok(s2.clone()))),
        }
    }

    /// The series at other parameters.
    pub fn reevaluate(&self, p: &ParamSet<S>) -> Result<TruncatedSeries<S>> {
        match &self.recipe {
            Some(f) => f(p),
            None => Err(Error::InvalidParameters("function cannot be re-evaluated".into())),
        }
    }

    pub fn with_series(&self, series: TruncatedSeries<S>) -> Self {
        ShiftableFunction {
            prefactor: self.prefactor.clone(),
            series,
            recipe: None,
        }
    }
}

/// `D_r(zeta; q, hbar) F` divided by the prefactor of `F`. The result has
/// the same prefactor, so it is returned as a function again.
pub fn apply_d_zeta<S: Scalar>(f: &ShiftableFunction<S>, r: usize, p: &ParamSet<S>) -> Result<ShiftableFunction<S>> {
    let n = p.n();
    if r == 0 || r > n {
        return Err(Error::InvalidParameters(format!("r = {r} outside 1..={n}")));
    }
    let bound = f.series.bound();
    let t = &p.hbar;
    let hq = p.hbar.checked_div(&p.q)?;
    let one = p.one();
    let terms = subsets(n, r)
        .into_par_iter()
        .map(|set| -> Result<TruncatedSeries<S>> {
            let shifts: Vec<(GenVar, i32)> = set.iter().map(|&i| (GenVar::SqrtZeta(i), 1)).collect();
            let sr = f.prefactor.shift_ratio_multi(&shifts, p)?;
            let split = split_zeta(&sr.monomial)?;
            if split.zeta_n_exponent != 0 || split.z_exponents.iter().any(|&e| e != 0) {
                return Err(Error::InvalidParameters(
                    "prefactor shift in zeta depends on zeta".into(),
                ));
            }
            let c = sr.value(p)?;
            // z^d -> q^{deg_i - deg_{i-1}} z^d for each shifted zeta_i
            let shifted = f.series.map_degrees(|d, a| {
                let mut e = 0i64;
                for &i in &set {
                    if i < n - 1 {
                        e += d[i] as i64;
                    }
                    if i > 0 {
                        e -= d[i - 1] as i64;
                    }
                }
                Ok(a.clone() * &p.q.powi(e)?)
            })?;
            let mut acc = shifted.scale(&c);
            for &i in &set {
                for j in (0..n).filter(|j| !set.contains(j)) {
                    let (lo, hi) = (i.min(j), i.max(j));
                    let m = hq.powi((hi - lo) as i64)?;
                    let factor = if i < j {
                        ratio_series(n - 1, bound, lo..hi, &m, &one, t)
                    } else {
                        ratio_series(n - 1, bound, lo..hi, &m, t, &one)
                    };
                    acc = acc.mul(&factor);
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = TruncatedSeries::zero(n - 1, bound, p.ctx());
    for s in terms {
        total = total.add(&s);
    }
    Ok(f.with_series(total.scale(&operator_prefactor(t, n, r)?)))
}

/// Options for [`apply_d_u`].
pub struct DuOptions<'a, S: Scalar> {
    /// Include the `(q/hbar)^{r(n-1)}` normalization.
    pub scaled: bool,
    /// Extra scalar per shifted subset (0-based `u` indices), e.g. the ratio
    /// of a coefficient at shifted and unshifted `u`.
    pub extra: Option<&'a (dyn Fn(&[usize]) -> Result<S> + Sync)>,
}

impl<S: Scalar> Default for DuOptions<'_, S> {
    fn default() -> Self {
        DuOptions {
            scaled: true,
            extra: None,
        }
    }
}

/// Result of a `u`-operator application. Both sides are multiplied by
/// `zeta_n^r prod_l z_l^r` so that the `zeta^{-1}` monomials produced by the
/// shifts become ordinary z-monomials.
#[derive(Clone, Debug)]
pub struct DuOutcome<S: Scalar> {
    pub lhs: TruncatedSeries<S>,
    /// `e_r(zeta^{-1}) F`, normalized the same way.
    pub eigen_rhs: TruncatedSeries<S>,
}

impl<S: Scalar> DuOutcome<S> {
    pub fn residual(&self) -> f64 {
        self.lhs.max_rel_diff(&self.eigen_rhs)
    }
}

fn zeta_monomial_series<S: Scalar>(
    m: &SqrtMonomial,
    r: usize,
    series: &TruncatedSeries<S>,
    c: &S,
    p: &ParamSet<S>,
) -> Result<TruncatedSeries<S>> {
    let split = split_zeta(m)?;
    if split.zeta_n_exponent != -(r as i32) {
        return Err(Error::InvalidParameters(format!("unexpected zeta_n power in {m}")));
    }
    let shift: Vec<u32> = split
        .z_exponents
        .iter()
        .map(|&e| u32::try_from(e + r as i32).expect("exponent within range"))
        .collect();
    let k = split.rest.value(p)? * c;
    Ok(series.shift(&shift, &k))
}

/// `(q/hbar)^{r(n-1)} D_r(u; q, q/hbar) F`, with `F` re-evaluated at the
/// shifted `u` and its prefactor shifted analytically.
pub fn apply_d_u<S: Scalar>(
    f: &ShiftableFunction<S>,
    r: usize,
    p: &ParamSet<S>,
    opts: &DuOptions<'_, S>,
) -> Result<DuOutcome<S>> {
    let n = p.n();
    if r == 0 || r > n {
        return Err(Error::InvalidParameters(format!("r = {r} outside 1..={n}")));
    }
    let t = p.q.checked_div(&p.hbar)?;
    let terms = subsets(n, r)
        .into_par_iter()
        .map(|set| -> Result<TruncatedSeries<S>> {
            let coef = macdonald_coefficient(&set, &p.u, &t)?;
            let shifts: Vec<(GenVar, i32)> = set.iter().map(|&i| (GenVar::SqrtU(i), 1)).collect();
            let sr = f.prefactor.shift_ratio_multi(&shifts, p)?;
            let mut shifted_p = p.clone();
            for &(v, k) in &shifts {
                shifted_p = shifted_p.shifted(v, k as i64)?;
            }
            let series = f.reevaluate(&shifted_p)?;
            let mut c = coef * &sr.rational;
            if sr.sign < 0 {
                c = -c;
            }
            if let Some(extra) = opts.extra {
                c = c * extra(&set)?;
            }
            zeta_monomial_series(&sr.monomial, r, &series, &c, p)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut lhs = TruncatedSeries::zero(n - 1, f.series.bound(), p.ctx());
    for s in terms {
        lhs = lhs.add(&s);
    }
    let mut scale = operator_prefactor(&t, n, r)?;
    if opts.scaled {
        scale = scale * t.powi((r * (n - 1)) as i64)?;
    }
    lhs = lhs.scale(&scale);
    let mut rhs = TruncatedSeries::zero(n - 1, f.series.bound(), p.ctx());
    for set in subsets(n, r) {
        let m = set
            .iter()
            .fold(SqrtMonomial::identity(n), |acc, &k| acc.div(&SqrtMonomial::zeta(n, k)));
        rhs = rhs.add(&zeta_monomial_series(&m, r, &f.series, &p.one(), p)?);
    }
    Ok(DuOutcome { lhs, eigen_rhs: rhs })
}

/// `e_r(u^{-1})`.
pub fn zeta_eigenvalue<S: Scalar>(r: usize, p: &ParamSet<S>) -> Result<S> {
    let inv = p.u.iter().map(|x| x.recip()).collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(elementary_symmetric(&inv, r))
}

/// `e_r(zeta^{-1})`.
pub fn u_eigenvalue<S: Scalar>(r: usize, p: &ParamSet<S>) -> Result<S> {
    let inv = p.zeta.iter().map(|x| x.recip()).collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(elementary_symmetric(&inv, r))
}

/// Per-coefficient residual of `D_r(zeta) V~_I = e_r(u^{-1}) V~_I`.
pub fn eigencheck_zeta<S: Scalar>(i: &Perm, r: usize, p: &ParamSet<S>) -> Result<f64> {
    let f = ShiftableFunction::normalized_vertex(i, p)?;
    let out = apply_d_zeta(&f, r, p)?;
    let expect = f.series.scale(&zeta_eigenvalue(r, p)?);
    Ok(out.series.max_rel_diff(&expect))
}

/// Per-coefficient residual of `(q/hbar)^{r(n-1)} D_r(u) V~_I = e_r(zeta^{-1}) V~_I`.
pub fn eigencheck_u<S: Scalar>(i: &Perm, r: usize, p: &ParamSet<S>) -> Result<f64> {
    let f = ShiftableFunction::normalized_vertex(i, p)?;
    Ok(apply_d_u(&f, r, p, &DuOptions::default())?.residual())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sample_params, Exact, Real};

    fn exact(n: usize, seed: u64, d: usize) -> ParamSet<Exact> {
        ParamSet::from_spec(&sample_params(n, seed, 30, d).unwrap()).unwrap()
    }

    #[test]
    fn coefficient_basics() {
        let p = exact(3, 1, 1);
        let one = p.one();
        for set in subsets(3, 2) {
            assert_eq!(macdonald_coefficient(&set, &p.u, &one).unwrap(), one);
        }
        let x = vec![p.int(2), p.int(2), p.int(5)];
        assert!(matches!(
            macdonald_coefficient(&[0], &x, &p.hbar),
            Err(Error::CoincidentCoordinates { .. })
        ));
        assert_eq!(macdonald_coefficient(&[0], &[p.int(3)], &p.hbar).unwrap(), one);
    }

    #[test]
    fn operator_on_constant_is_constant() {
        // sum_J t^{..} coeff(J; x, t) does not depend on x
        let p = exact(3, 2, 1);
        let t = &p.hbar;
        let xs = [
            vec![p.int(2), p.int(7), p.int(-3)],
            vec![p.int(11), p.int(5), p.scalar(&"1/3".parse().unwrap())],
        ];
        for r in 1..=3 {
            let vals: Vec<Exact> = xs
                .iter()
                .map(|x| {
                    subsets(3, r)
                        .iter()
                        .map(|s| macdonald_coefficient(s, x, t).unwrap())
                        .fold(p.zero(), |a, b| a + b)
                        * operator_prefactor(t, 3, r).unwrap()
                })
                .collect();
            assert_eq!(vals[0], vals[1]);
        }
    }

    #[test]
    fn vieta_matches_definition() {
        let p = exact(4, 3, 1);
        let v = elementary_symmetric_vieta(&p.u);
        for r in 0..=4 {
            let direct = if r == 0 { p.one() } else { elementary_symmetric(&p.u, r) };
            assert_eq!(v[r], direct);
        }
    }

    #[test]
    fn split_zeta_rules() {
        let n = 3;
        // zeta_1/zeta_3 = (hbar/q)^2 z_1 z_2
        let m = SqrtMonomial::zeta(n, 0).div(&SqrtMonomial::zeta(n, 2));
        let s = split_zeta(&m).unwrap();
        assert_eq!(s.z_exponents, vec![1, 1]);
        assert_eq!(s.zeta_n_exponent, 0);
        assert_eq!(s.rest, SqrtMonomial::hbar(n).div(&SqrtMonomial::q(n)).pow(2));
        let p = exact(3, 4, 1);
        let lhs = m.value(&p).unwrap();
        let rhs = s.rest.value(&p).unwrap() * &p.z[0] * &p.z[1];
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn zeta_eigen_exact_n2() {
        let p = exact(2, 7, 5);
        for i in Perm::all(2) {
            for r in 1..=2 {
                assert_eq!(eigencheck_zeta(&i, r, &p).unwrap(), 0.0, "{i} r={r}");
            }
        }
    }

    #[test]
    fn top_operator_by_hand_n2() {
        // D_2 multiplies by hbar^{1} (u_1 u_2)^{-1} t^{3-4}: the monomial
        // scalar telescopes to one and the eigenvalue is (u_1 u_2)^{-1}.
        let p = exact(2, 5, 3);
        let f = ShiftableFunction::normalized_vertex(&Perm::identity(2), &p).unwrap();
        let out = apply_d_zeta(&f, 2, &p).unwrap();
        let e2 = (p.u[0].clone() * &p.u[1]).recip().unwrap();
        assert_eq!(out.series, f.series.scale(&e2));
    }

    #[test]
    fn zeta_operators_commute() {
        let p = exact(3, 8, 2);
        let f = ShiftableFunction::normalized_vertex(&"2 1 3".parse().unwrap(), &p).unwrap();
        let ab = apply_d_zeta(&apply_d_zeta(&f, 1, &p).unwrap(), 2, &p).unwrap();
        let ba = apply_d_zeta(&apply_d_zeta(&f, 2, &p).unwrap(), 1, &p).unwrap();
        assert_eq!(ab.series, ba.series);
    }

    #[test]
    fn zeta_shift_twice_is_q_squared() {
        let p = exact(3, 9, 2);
        let f = ShiftableFunction::normalized_vertex(&Perm::identity(3), &p).unwrap();
        let once = f.prefactor.shift_ratio(GenVar::SqrtZeta(1), 1, &p).unwrap();
        let p1 = p.shifted(GenVar::SqrtZeta(1), 1).unwrap();
        let twice = f.prefactor.shift_ratio(GenVar::SqrtZeta(1), 1, &p1).unwrap();
        let direct = f.prefactor.shift_ratio(GenVar::SqrtZeta(1), 2, &p).unwrap();
        assert_eq!(
            once.value(&p).unwrap() * twice.value(&p1).unwrap(),
            direct.value(&p).unwrap()
        );
    }

    #[test]
    fn u_eigen_n2() {
        let spec = sample_params(2, 3, 40, 4).unwrap();
        let p = ParamSet::<Real>::from_spec(&spec).unwrap();
        for i in Perm::all(2) {
            for r in 1..=2 {
                let res = eigencheck_u(&i, r, &p).unwrap();
                assert!(res < p.tolerance(), "{i} r={r}: {res}");
            }
        }
    }

    #[test]
    fn u_eigen_exact_n2() {
        let p = exact(2, 3, 3);
        for i in Perm::all(2) {
            assert_eq!(eigencheck_u(&i, 1, &p).unwrap(), 0.0);
        }
    }
}
