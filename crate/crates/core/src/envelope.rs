//! Elliptic weight functions, their restrictions to fixed points, the
//! stable envelope matrix and its normalizations.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{j_index, total_order, Perm};
use crate::error::{Error, Result};
use crate::geometry::{half_tangent, index_bundle, line_restriction, n_plus};
use crate::numerics::{ParamSet, Scalar};
use crate::qseries::{theta, theta_monomial, theta_multiset, SqrtMonomial};
use crate::vertex::alpha_factor;

/// Numeric inputs of the weight function, all given by square roots.
#[derive(Clone, Debug)]
pub struct WeightFnParams<S: Scalar> {
    n: usize,
    q: S,
    sqrt_hbar: S,
    /// `st[k-1][a-1]` is a square root of `t^{(k)}_a`; the last level is `w`.
    st: Vec<Vec<S>>,
    /// Square roots of `mu_1..mu_n`, gauge `mu_n = 1`.
    smu: Vec<S>,
    theta_terms: usize,
}

impl<S: Scalar> WeightFnParams<S> {
    /// `t` levels `1..n-1`, then `w`, then `mu`.
    pub fn new(
        sqrt_q: S,
        sqrt_hbar: S,
        t: Vec<Vec<S>>,
        sqrt_w: Vec<S>,
        sqrt_mu: Vec<S>,
        theta_terms: usize,
    ) -> Result<Self> {
        let n = sqrt_w.len();
        if n < 2 || t.len() != n - 1 || sqrt_mu.len() != n {
            return Err(Error::InvalidParameters("weight function shape".into()));
        }
        for (k, level) in t.iter().enumerate() {
            if level.len() != k + 1 {
                return Err(Error::InvalidParameters(format!("t level {} has wrong size", k + 1)));
            }
        }
        let mut st = t;
        st.push(sqrt_w);
        Ok(WeightFnParams {
            n,
            q: sqrt_q.square(),
            sqrt_hbar,
            st,
            smu: sqrt_mu,
            theta_terms,
        })
    }

    /// The identification `t = 1/x`, `w = 1/u`, `mu_j/mu_{j+1} = hbar z_j`,
    /// with Chern-root square roots `sx` (levels `1..n-1`) and independent
    /// square roots `sz` of `z`.
    pub fn from_chern_roots(
        sqrt_q: &S,
        sqrt_hbar: &S,
        sx: &[Vec<S>],
        sqrt_u: &[S],
        sqrt_z: &[S],
        theta_terms: usize,
    ) -> Result<Self> {
        let inv = |v: &[S]| v.iter().map(|x| x.recip()).collect::<std::result::Result<Vec<S>, _>>();
        let t = sx.iter().map(|l| inv(l)).collect::<std::result::Result<Vec<_>, _>>()?;
        let n = sqrt_u.len();
        let mut smu = vec![S::one(sqrt_q.ctx()); n];
        for j in (0..n - 1).rev() {
            smu[j] = smu[j + 1].clone() * sqrt_hbar * &sqrt_z[j];
        }
        Self::new(sqrt_q.clone(), sqrt_hbar.clone(), t, inv(sqrt_u)?, smu, theta_terms)
    }

    /// Restriction point `x^{(k)}_a = u_{j^{(k)}_a}` of the fixed point `J`.
    pub fn at_fixed_point(p: &ParamSet<S>, j: &Perm) -> Result<Self> {
        let n = p.n();
        let sx: Vec<Vec<S>> = (1..n)
            .map(|k| j.ordered(k).iter().map(|&v| p.sqrt_u[v - 1].clone()).collect())
            .collect();
        Self::from_chern_roots(&p.sqrt_q, &p.sqrt_hbar, &sx, &p.sqrt_u, &p.sqrt_z, p.theta_terms())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Square root of `t^{(k)}_a`, both 1-based.
    pub fn sqrt_t(&self, k: usize, a: usize) -> &S {
        &self.st[k - 1][a - 1]
    }

    fn th(&self, s: &S) -> Result<S> {
        theta(s, &self.q, self.theta_terms)
    }

    /// Same parameters with `t^{(k)}` reordered by `perm` (0-based sources).
    pub fn permute_level(&self, k: usize, perm: &[usize]) -> Self {
        let mut out = self.clone();
        out.st[k - 1] = perm.iter().map(|&s| self.st[k - 1][s].clone()).collect();
        out
    }
}

/// `psi_{I,k,a,c}` at a point whose square root is `sx`.
pub fn psi<S: Scalar>(i: &Perm, k: usize, a: usize, c: usize, sx: &S, wp: &WeightFnParams<S>) -> Result<S> {
    let ia = i.ordered(k)[a - 1];
    let ic = i.ordered(k + 1)[c - 1];
    match ic.cmp(&ia) {
        std::cmp::Ordering::Less => wp.th(sx),
        std::cmp::Ordering::Greater => wp.th(&sx.checked_div(&wp.sqrt_hbar)?),
        std::cmp::Ordering::Equal => {
            let j = j_index(i, k, a);
            let mut s0 = wp.smu[j - 1].checked_div(&wp.smu[k])?;
            if i.at(k + 1) < ia {
                s0 = s0.checked_div(&wp.sqrt_hbar)?;
            }
            let den = wp.th(&s0)?;
            if den.is_zero() {
                return Err(Error::DivisionByZeroTheta {
                    context: format!("psi denominator at I={i}, k={k}, a={a}"),
                });
            }
            Ok(wp.th(&(sx.clone() * &s0))?.checked_div(&den)?)
        }
    }
}

/// `U_I` at the given (unsymmetrized) point.
pub fn weight_u<S: Scalar>(i: &Perm, wp: &WeightFnParams<S>) -> Result<S> {
    let n = wp.n;
    let mut acc = S::one(wp.q.ctx());
    for k in 1..n {
        for a in 1..=k {
            for c in 1..=k + 1 {
                let sx = wp.sqrt_t(k + 1, c).checked_div(wp.sqrt_t(k, a))?;
                acc = acc * psi(i, k, a, c, &sx, wp)?;
            }
            for b in a + 1..=k {
                let r = wp.sqrt_t(k, b).checked_div(wp.sqrt_t(k, a))?;
                let den = wp.th(&r)?;
                if den.is_zero() {
                    return Err(Error::SymmetrizationPole { level: k });
                }
                acc = acc * wp.th(&(r.clone() * &wp.sqrt_hbar))?.checked_div(&den)?;
            }
        }
    }
    Ok(acc)
}

/// `E(t, hbar) = prod_k prod_{a,b} theta(hbar t_b/t_a)`, including `a = b`.
pub fn e_denominator<S: Scalar>(wp: &WeightFnParams<S>) -> Result<S> {
    let mut acc = S::one(wp.q.ctx());
    for k in 1..wp.n {
        for a in 1..=k {
            for b in 1..=k {
                let r = wp.sqrt_t(k, b).checked_div(wp.sqrt_t(k, a))?;
                acc = acc * wp.th(&(r * &wp.sqrt_hbar))?;
            }
        }
    }
    Ok(acc)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    Perm::all(k)
        .iter()
        .map(|p| p.values().iter().map(|v| v - 1).collect())
        .collect()
}

/// `Sym_{t^{(1)}} ... Sym_{t^{(n-1)}} U_I`, from memoized factor tables.
fn symmetrized_u<S: Scalar>(i: &Perm, wp: &WeightFnParams<S>) -> Result<S> {
    let n = wp.n;
    let one = S::one(wp.q.ctx());
    // psi_tab[k-1][a][c][sa][sc], pair_tab[k-1][sa][sb]
    let mut psi_tab = Vec::with_capacity(n - 1);
    let mut pair_tab = Vec::with_capacity(n - 1);
    for k in 1..n {
        let mut t = vec![vec![vec![vec![one.clone(); k + 1]; k]; k + 1]; k];
        for a in 0..k {
            for c in 0..=k {
                for sa in 0..k {
                    for sc in 0..=k {
                        let sx = wp.st[k][sc].checked_div(&wp.st[k - 1][sa])?;
                        t[a][c][sa][sc] = psi(i, k, a + 1, c + 1, &sx, wp)?;
                    }
                }
            }
        }
        psi_tab.push(t);
        let mut pt = vec![vec![one.clone(); k]; k];
        for sa in 0..k {
            for sb in 0..k {
                if sa == sb {
                    continue;
                }
                let r = wp.st[k - 1][sb].checked_div(&wp.st[k - 1][sa])?;
                let den = wp.th(&r)?;
                if den.is_zero() {
                    return Err(Error::SymmetrizationPole { level: k });
                }
                pt[sa][sb] = wp.th(&(r * &wp.sqrt_hbar))?.checked_div(&den)?;
            }
        }
        pair_tab.push(pt);
    }
    let perms: Vec<Vec<Vec<usize>>> = (1..n).map(permutations).collect();
    let ident: Vec<usize> = (0..n).collect();
    let mut total = S::zero(wp.q.ctx());
    let mut choice = vec![0usize; n - 1];
    loop {
        let mut term = one.clone();
        for k in 1..n {
            let tk = &perms[k - 1][choice[k - 1]];
            let tk1 = if k + 1 == n { &ident } else { &perms[k][choice[k]] };
            for a in 0..k {
                for c in 0..=k {
                    term = term * &psi_tab[k - 1][a][c][tk[a]][tk1[c]];
                }
                for b in a + 1..k {
                    term = term * &pair_tab[k - 1][tk[a]][tk[b]];
                }
            }
            if term.is_zero() {
                break;
            }
        }
        total = total + term;
        // odometer over the per-level permutation choices
        let mut lvl = 0;
        loop {
            if lvl == n - 1 {
                return Ok(total);
            }
            choice[lvl] += 1;
            if choice[lvl] < perms[lvl].len() {
                break;
            }
            choice[lvl] = 0;
            lvl += 1;
        }
    }
}

fn theta_hbar_inv_power<S: Scalar>(wp: &WeightFnParams<S>) -> Result<S> {
    let th = wp.th(&wp.sqrt_hbar.recip()?)?;
    Ok(th.powi((wp.n * (wp.n - 1) / 2) as i64)?)
}

/// The elliptic weight function `W_I`.
pub fn weight_w<S: Scalar>(i: &Perm, wp: &WeightFnParams<S>) -> Result<S> {
    Ok(theta_hbar_inv_power(wp)? * symmetrized_u(i, wp)?)
}

/// The normalized weight function `W_I / E`.
pub fn weight_wtilde<S: Scalar>(i: &Perm, wp: &WeightFnParams<S>) -> Result<S> {
    let e = e_denominator(wp)?;
    if e.is_zero() {
        return Err(Error::DivisionByZeroTheta {
            context: "E(t, hbar)".into(),
        });
    }
    Ok(weight_w(i, wp)?.checked_div(&e)?)
}

/// `W~_I` restricted to the fixed point `J`.
pub fn restrict<S: Scalar>(i: &Perm, j: &Perm, p: &ParamSet<S>) -> Result<S> {
    weight_wtilde(i, &WeightFnParams::at_fixed_point(p, j)?)
}

/// `P_I(w, hbar)` with `w = 1/u`, as a list of theta arguments.
pub fn diagonal_atoms(i: &Perm) -> Vec<SqrtMonomial> {
    let n = i.n();
    let w = |v: usize| SqrtMonomial::u(n, v - 1).inv();
    let h = SqrtMonomial::hbar(n);
    let mut out = Vec::new();
    for k in 1..=n {
        for l in k + 1..=n {
            let r = w(i.at(k)).div(&w(i.at(l)));
            if i.at(l) < i.at(k) {
                out.push(r);
            } else {
                out.push(r.mul(&h));
            }
        }
    }
    out
}

pub fn diagonal_value<S: Scalar>(i: &Perm, p: &ParamSet<S>) -> Result<S> {
    let mut acc = p.one();
    for x in diagonal_atoms(i) {
        acc = acc * theta_monomial(&x, p)?;
    }
    Ok(acc)
}

/// `(-1)^{n(n-1)/2} (-1)^I`.
pub fn expected_row_sign(i: &Perm) -> i32 {
    let n = i.n();
    let s = if (n * (n - 1) / 2).is_multiple_of(2) { 1 } else { -1 };
    s * i.sign()
}

/// The sign stated alongside the identification theorem, `(-1)^n (-1)^I`.
pub fn theorem_row_sign(i: &Perm) -> i32 {
    let s = if i.n().is_multiple_of(2) { 1 } else { -1 };
    s * i.sign()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Plain restrictions `W~_I(x_J)`.
    Raw,
    Stab,
    S,
    Bold,
    A,
    Overline,
}

impl std::str::FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "raw" => Normalization::Raw,
            "stab" => Normalization::Stab,
            "s" => Normalization::S,
            "bold" => Normalization::Bold,
            "a" => Normalization::A,
            "overline" => Normalization::Overline,
            _ => return Err(Error::Parse(format!("unknown normalization {s}"))),
        })
    }
}

/// An `n! x n!` matrix indexed by fixed points in [`total_order`].
#[derive(Clone, Debug)]
pub struct StabMatrix<S: Scalar> {
    pub normalization: Normalization,
    pub order: Vec<Perm>,
    pub entries: Vec<Vec<S>>,
    index: HashMap<Perm, usize>,
}

impl<S: Scalar> StabMatrix<S> {
    pub fn new(normalization: Normalization, order: Vec<Perm>, entries: Vec<Vec<S>>) -> Self {
        let index = order.iter().enumerate().map(|(k, p)| (p.clone(), k)).collect();
        StabMatrix {
            normalization,
            order,
            entries,
            index,
        }
    }

    pub fn size(&self) -> usize {
        self.order.len()
    }

    pub fn position(&self, i: &Perm) -> usize {
        self.index[i]
    }

    pub fn get(&self, i: &Perm, j: &Perm) -> &S {
        &self.entries[self.index[i]][self.index[j]]
    }

    fn map_entries(&self, normalization: Normalization, f: impl Fn(usize, usize, &S) -> Result<S> + Sync) -> Result<Self> {
        let m = self.size();
        let entries = (0..m)
            .into_par_iter()
            .map(|a| (0..m).map(|b| f(a, b, &self.entries[a][b])).collect::<Result<Vec<S>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(StabMatrix::new(normalization, self.order.clone(), entries))
    }
}

/// All restrictions `W~_I(x_J)`.
pub fn restriction_matrix<S: Scalar>(p: &ParamSet<S>) -> Result<StabMatrix<S>> {
    let order = total_order(p.n());
    let points = order
        .iter()
        .map(|j| WeightFnParams::at_fixed_point(p, j))
        .collect::<Result<Vec<_>>>()?;
    let entries = order
        .par_iter()
        .map(|i| points.iter().map(|wp| weight_wtilde(i, wp)).collect::<Result<Vec<S>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(StabMatrix::new(Normalization::Raw, order, entries))
}

/// The stable envelope with its diagonal forced to `Theta(N_I^+)`, plus the
/// observed row constants `W~_I(x_I)/Theta(N_I^+)`.
#[derive(Clone, Debug)]
pub struct StabData<S: Scalar> {
    pub raw: StabMatrix<S>,
    pub stab: StabMatrix<S>,
    pub row_constants: Vec<S>,
}

pub fn stab_matrix<S: Scalar>(p: &ParamSet<S>) -> Result<StabData<S>> {
    let raw = restriction_matrix(p)?;
    stab_from_raw(raw, p)
}

pub fn stab_from_raw<S: Scalar>(raw: StabMatrix<S>, p: &ParamSet<S>) -> Result<StabData<S>> {
    let tol = p.tolerance();
    let mut scale = Vec::new();
    let mut row_constants = Vec::new();
    for (a, i) in raw.order.iter().enumerate() {
        let diag = &raw.entries[a][a];
        let row_max = raw.entries[a].iter().map(|x| x.log10_abs()).fold(f64::NEG_INFINITY, f64::max);
        if diag.is_zero() || diag.log10_abs() < row_max + tol.log10() {
            return Err(Error::ZeroDiagonal { perm: i.to_string() });
        }
        let th = theta_multiset(&n_plus(i), p)?;
        scale.push(th.checked_div(diag)?);
        row_constants.push(diag.checked_div(&th)?);
    }
    let stab = raw.map_entries(Normalization::Stab, |a, _, x| Ok(x.clone() * &scale[a]))?;
    Ok(StabData {
        raw,
        stab,
        row_constants,
    })
}

/// `e(x_I, z) = prod_i theta(L_i|_I) theta(z_i) / theta(L_i|_I z_i)`.
pub fn e_factor<S: Scalar>(i: &Perm, p: &ParamSet<S>) -> Result<S> {
    let n = p.n();
    let mut acc = p.one();
    for k in 1..n {
        let l = line_restriction(k, i);
        let z = SqrtMonomial::z(n, k - 1);
        let den = theta_monomial(&l.mul(&z), p)?;
        if den.is_zero() {
            return Err(Error::DivisionByZeroTheta {
                context: format!("e factor at {i}"),
            });
        }
        acc = acc * theta_monomial(&l, p)? * theta_monomial(&z, p)?.checked_div(&den)?;
    }
    Ok(acc)
}

/// `e` at arbitrary Chern roots (square roots `sx`) and `z` (square roots).
pub fn e_factor_general<S: Scalar>(sx: &[Vec<S>], sqrt_z: &[S], q: &S, terms: usize) -> Result<S> {
    let mut acc = S::one(q.ctx());
    for (level, sz) in sx.iter().zip(sqrt_z) {
        let sl = level.iter().fold(S::one(q.ctx()), |a, b| a * b);
        let th = |s: &S| theta(s, q, terms);
        acc = acc * th(&sl)? * th(sz)?.checked_div(&th(&(sl.clone() * sz))?)?;
    }
    Ok(acc)
}

fn sqrt_det_value<S: Scalar>(m: &crate::geometry::WeightMultiset, p: &ParamSet<S>) -> Result<S> {
    m.sqrt_det()
        .ok_or_else(|| Error::InvalidParameters("determinant has no square root".into()))?
        .value(p)
}

/// Per-fixed-point scalars entering the normalized matrices.
struct Side<S: Scalar> {
    /// `sqrt(det T^{1/2}_I / det N_I^+)`
    det_ratio: Vec<S>,
    theta_np: Vec<S>,
    theta_half: Vec<S>,
    alpha: Vec<S>,
    e: Vec<S>,
}

fn side<S: Scalar>(order: &[Perm], p: &ParamSet<S>) -> Result<Side<S>> {
    let mut s = Side {
        det_ratio: vec![],
        theta_np: vec![],
        theta_half: vec![],
        alpha: vec![],
        e: vec![],
    };
    for i in order {
        s.det_ratio.push(sqrt_det_value(&half_tangent(i).sub(&n_plus(i)), p)?);
        s.theta_np.push(theta_multiset(&n_plus(i), p)?);
        s.theta_half.push(theta_multiset(&half_tangent(i), p)?);
        s.alpha.push(alpha_factor(i, p)?);
        s.e.push(e_factor(i, p)?);
    }
    Ok(s)
}

/// The normalizations built from the stable envelope on `p` and the dual
/// parameters `dual`.
#[derive(Clone, Debug)]
pub struct NormalizedMatrices<S: Scalar> {
    pub s: StabMatrix<S>,
    pub bold: StabMatrix<S>,
    pub a: StabMatrix<S>,
    pub overline: StabMatrix<S>,
}

pub fn normalized_matrices<S: Scalar>(
    stab: &StabMatrix<S>,
    p: &ParamSet<S>,
    dual: &ParamSet<S>,
) -> Result<NormalizedMatrices<S>> {
    let order = &stab.order;
    let x = side(order, p)?;
    let dual_order: Vec<Perm> = order.iter().map(|i| i.inverse()).collect();
    let y = side(&dual_order, dual)?;
    let s = stab.map_entries(Normalization::S, |a, b, v| {
        Ok((v.clone() * &x.e[b]).checked_div(&(x.e[a].clone() * &x.theta_np[a]))?)
    })?;
    let a_mat = stab.map_entries(Normalization::A, |a, b, v| {
        let num = x.det_ratio[a].clone() * &y.alpha[a] * v;
        Ok(num.checked_div(&(x.alpha[b].clone() * &x.theta_half[b]))?)
    })?;
    let bold = stab.map_entries(Normalization::Bold, |a, b, v| {
        // sqrt(det T_I det N^!_{I^!} / (det N_I det T^!_{I^!}))
        let det = x.det_ratio[a].checked_div(&y.det_ratio[a])?;
        let num = det * &y.alpha[a] * &y.theta_half[a] * v;
        let den = y.theta_np[a].clone() * &x.alpha[b] * &x.theta_half[b];
        Ok(num.checked_div(&den)?)
    })?;
    let overline = stab.map_entries(Normalization::Overline, |a, b, v| {
        Ok(x.det_ratio[a].checked_div(&x.det_ratio[b])? * v)
    })?;
    Ok(NormalizedMatrices {
        s,
        bold,
        a: a_mat,
        overline,
    })
}

/// Variables of the weight function in the Chern-root chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuasiVar {
    /// `x^{(k)}_a`, 1-based.
    XRoot { k: usize, a: usize },
    /// `u_i`, 1-based.
    U(usize),
    /// `z_i`, 1-based.
    Z(usize),
    Hbar,
}

impl std::fmt::Display for QuasiVar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QuasiVar::XRoot { k, a } => write!(f, "x{k}_{a}"),
            QuasiVar::U(i) => write!(f, "u{i}"),
            QuasiVar::Z(i) => write!(f, "z{i}"),
            QuasiVar::Hbar => write!(f, "hbar"),
        }
    }
}

/// A generic point `(x, u, z, hbar)`, stored by square roots.
#[derive(Clone, Debug)]
pub struct ChernPoint<S: Scalar> {
    pub n: usize,
    pub sqrt_q: S,
    pub sqrt_hbar: S,
    pub sx: Vec<Vec<S>>,
    pub sqrt_u: Vec<S>,
    pub sqrt_z: Vec<S>,
    pub theta_terms: usize,
}

impl<S: Scalar> ChernPoint<S> {
    /// Variable layout: `[hbar, x^{(1)}_1, ..., x^{(n-1)}_{n-1}, u_1..u_n, z_1..z_{n-1}]`.
    fn slot(&self, v: QuasiVar) -> usize {
        let n = self.n;
        let nx = n * (n - 1) / 2;
        match v {
            QuasiVar::Hbar => 0,
            QuasiVar::XRoot { k, a } => 1 + (k - 1) * k / 2 + (a - 1),
            QuasiVar::U(i) => 1 + nx + i - 1,
            QuasiVar::Z(i) => 1 + nx + n + i - 1,
        }
    }

    fn nslots(&self) -> usize {
        1 + self.n * (self.n - 1) / 2 + 2 * self.n - 1
    }

    fn value(&self, v: QuasiVar) -> &S {
        match v {
            QuasiVar::Hbar => &self.sqrt_hbar,
            QuasiVar::XRoot { k, a } => &self.sx[k - 1][a - 1],
            QuasiVar::U(i) => &self.sqrt_u[i - 1],
            QuasiVar::Z(i) => &self.sqrt_z[i - 1],
        }
    }

    fn value_mut(&mut self, v: QuasiVar) -> &mut S {
        match v {
            QuasiVar::Hbar => &mut self.sqrt_hbar,
            QuasiVar::XRoot { k, a } => &mut self.sx[k - 1][a - 1],
            QuasiVar::U(i) => &mut self.sqrt_u[i - 1],
            QuasiVar::Z(i) => &mut self.sqrt_z[i - 1],
        }
    }

    pub fn variables(&self) -> Vec<QuasiVar> {
        let n = self.n;
        let mut out = vec![QuasiVar::Hbar];
        for k in 1..n {
            for a in 1..=k {
                out.push(QuasiVar::XRoot { k, a });
            }
        }
        out.extend((1..=n).map(QuasiVar::U));
        out.extend((1..n).map(QuasiVar::Z));
        out
    }

    /// Multiply the variable `v` by `q` (its square root by `sqrt q`).
    pub fn shifted(&self, v: QuasiVar) -> Self {
        let mut out = self.clone();
        let x = out.value(v).clone() * &self.sqrt_q;
        *out.value_mut(v) = x;
        out
    }

    pub fn weight_params(&self) -> Result<WeightFnParams<S>> {
        WeightFnParams::from_chern_roots(
            &self.sqrt_q,
            &self.sqrt_hbar,
            &self.sx,
            &self.sqrt_u,
            &self.sqrt_z,
            self.theta_terms,
        )
    }

    pub fn wtilde(&self, i: &Perm) -> Result<S> {
        weight_wtilde(i, &self.weight_params()?)
    }

    fn eval(&self, exps: &[i32]) -> Result<S> {
        let mut acc = S::one(self.sqrt_q.ctx());
        for v in self.variables() {
            let e = exps[self.slot(v)];
            if e != 0 {
                acc = acc * self.value(v).powi(e as i64)?;
            }
        }
        Ok(acc)
    }
}

/// `theta(s)^power` where `s = prod var^{exps}` is the square root of the
/// argument, in the [`ChernPoint`] variable layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChernAtom {
    pub exps: Vec<i32>,
    pub power: i32,
}

/// The theta atoms of the bundle expression whose quasi-periods `W~_I`
/// shares:
/// `Theta(hbar)^{rk ind} Theta(T^{1/2}) theta(1/hbar) theta(det ind)/theta(det ind/hbar)
///  prod_k theta(z_k L_k)/(theta(z_k) theta(L_k)) prod_k theta(L_k|_I) theta(z_k)/theta(L_k|_I z_k)`.
pub fn quasi_period_atoms<S: Scalar>(i: &Perm, pt: &ChernPoint<S>) -> Vec<ChernAtom> {
    let n = pt.n;
    let len = pt.nslots();
    let var = |v: QuasiVar| {
        let mut e = vec![0; len];
        e[pt.slot(v)] = 1;
        e
    };
    let add = |a: &[i32], b: &[i32]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<i32>>();
    let sub = |a: &[i32], b: &[i32]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<i32>>();
    let x_at = |k: usize, a: usize| {
        if k == n {
            var(QuasiVar::U(a))
        } else {
            var(QuasiVar::XRoot { k, a })
        }
    };
    let h = var(QuasiVar::Hbar);
    let mut atoms = Vec::new();
    let mut push = |exps: Vec<i32>, power: i32| atoms.push(ChernAtom { exps, power });

    // Theta(T^{1/2}X) in Chern roots
    for k in 1..n {
        for j in 1..=k {
            for c in 1..=k + 1 {
                push(sub(&x_at(k + 1, c), &x_at(k, j)), 1);
            }
            for c in 1..=k {
                if c != j {
                    push(sub(&x_at(k, c), &x_at(k, j)), -1);
                }
            }
        }
    }
    // index bundle terms
    let ind = index_bundle(i, -1);
    push(h.clone(), ind.rank() as i32);
    push(h.iter().map(|e| -e).collect(), 1);
    let mut det = vec![0; len];
    for (w, &m) in ind.iter() {
        for u in 1..=n {
            let e = w.exponent(crate::numerics::GenVar::SqrtU(u - 1)) / 2;
            det[pt.slot(QuasiVar::U(u))] += e * m as i32;
        }
    }
    push(det.clone(), 1);
    push(sub(&det, &h), -1);
    // line bundle terms
    for k in 1..n {
        let z = var(QuasiVar::Z(k));
        let l = (1..=k).fold(vec![0; len], |acc, a| add(&acc, &x_at(k, a)));
        let li = (1..=k).fold(vec![0; len], |acc, a| add(&acc, &var(QuasiVar::U(i.at(a)))));
        push(add(&z, &l), 1);
        push(z.clone(), -1);
        push(l, -1);
        push(li.clone(), 1);
        push(z.clone(), 1);
        push(add(&li, &z), -1);
    }
    atoms
}

/// Predicted `F(v -> q v)/F` for the atom product `F`, using the exact
/// theta quasi-period.
pub fn predicted_shift_ratio<S: Scalar>(i: &Perm, pt: &ChernPoint<S>, v: QuasiVar) -> Result<S> {
    let slot = pt.slot(v);
    let mut acc = S::one(pt.sqrt_q.ctx());
    for atom in quasi_period_atoms(i, pt) {
        let j = atom.exps[slot] as i64;
        if j == 0 || atom.power == 0 {
            continue;
        }
        let s = pt.eval(&atom.exps)?;
        let f = crate::qseries::theta_shift_factor(&s, &pt.sqrt_q, j)?;
        acc = acc * f.powi(atom.power as i64)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::preceq;
    use crate::numerics::{sample_params, Real};

    fn real(n: usize, seed: u64) -> ParamSet<Real> {
        ParamSet::from_spec(&sample_params(n, seed, 40, 2).unwrap()).unwrap()
    }

    #[test]
    fn psi_cases_n2() {
        let p = real(2, 3);
        let i = Perm::identity(2);
        let wp = WeightFnParams::at_fixed_point(&p, &i).unwrap();
        let one = p.one();
        assert!(psi(&i, 1, 1, 1, &one, &wp).unwrap().rel_diff(&one) < 1e-100);
        let sx = p.int(3).checked_div(&p.int(7)).unwrap();
        let expect = theta(&sx.checked_div(&p.sqrt_hbar).unwrap(), &p.q, 40).unwrap();
        assert!(psi(&i, 1, 1, 2, &sx, &wp).unwrap().rel_diff(&expect) < 1e-100);
    }

    #[test]
    fn n2_closed_form() {
        // W~_{12}(t) = -theta(w_1/t mu_1/mu_2)/theta(mu_1/mu_2) theta(w_2/(t hbar))
        let p = real(2, 5);
        let st = p.int(3).checked_div(&p.int(11)).unwrap();
        let sw: Vec<Real> = p.sqrt_u.iter().map(|x| x.recip().unwrap()).collect();
        let smu = vec![p.sqrt_hbar.clone() * &p.sqrt_z[0], p.one()];
        let wp = WeightFnParams::new(p.sqrt_q.clone(), p.sqrt_hbar.clone(), vec![vec![st.clone()]], sw.clone(), smu.clone(), 40).unwrap();
        let th = |s: &Real| theta(s, &p.q, 40).unwrap();
        let m = smu[0].clone();
        let expect = -(th(&(sw[0].clone() * &m).checked_div(&st).unwrap()).checked_div(&th(&m)).unwrap()
            * th(&sw[1].checked_div(&(st.clone() * &p.sqrt_hbar)).unwrap()));
        let got = weight_wtilde(&Perm::identity(2), &wp).unwrap();
        assert!(got.rel_diff(&expect) < 1e-60, "{got} {expect}");
    }

    #[test]
    fn symmetrization_matches_explicit_orbit_sum() {
        let p = real(3, 2);
        let sx = vec![vec![p.int(2).checked_div(&p.int(3)).unwrap()], vec![p.int(5).checked_div(&p.int(4)).unwrap(), p.int(7).checked_div(&p.int(9)).unwrap()]];
        let pt = ChernPoint {
            n: 3,
            sqrt_q: p.sqrt_q.clone(),
            sqrt_hbar: p.sqrt_hbar.clone(),
            sx,
            sqrt_u: p.sqrt_u.clone(),
            sqrt_z: p.sqrt_z.clone(),
            theta_terms: 40,
        };
        let wp = pt.weight_params().unwrap();
        for i in Perm::all(3) {
            let fast = weight_w(&i, &wp).unwrap();
            let mut slow = p.zero();
            for perm in permutations(2) {
                slow = slow + weight_u(&i, &wp.permute_level(2, &perm)).unwrap();
            }
            slow = slow * theta_hbar_inv_power(&wp).unwrap();
            assert!(fast.rel_diff(&slow) < 1e-100);
            // invariance under reordering a block
            let swapped = weight_wtilde(&i, &wp.permute_level(2, &[1, 0])).unwrap();
            assert!(swapped.rel_diff(&weight_wtilde(&i, &wp).unwrap()) < 1e-100);
        }
    }

    #[test]
    fn triangular_and_diagonal_n3() {
        let p = real(3, 4);
        let raw = restriction_matrix(&p).unwrap();
        let tol = p.tolerance();
        for i in &raw.order {
            for j in &raw.order {
                let v = raw.get(i, j);
                if !preceq(i, j) {
                    assert!(v.log10_abs() < raw.get(i, i).log10_abs() + tol.log10(), "{i} {j}");
                }
            }
            assert!(raw.get(i, i).rel_diff(&diagonal_value(i, &p).unwrap()) < tol);
        }
    }

    #[test]
    fn row_constants_are_signs() {
        for n in [2, 3] {
            let p = real(n, 9);
            let data = stab_matrix(&p).unwrap();
            for (i, c) in data.raw.order.iter().zip(&data.row_constants) {
                let s = p.int(expected_row_sign(i) as i64);
                assert!(c.rel_diff(&s) < p.tolerance(), "{i}: {c}");
            }
        }
    }

    #[test]
    fn e_factor_shifts() {
        let p = real(3, 6);
        let n = 3;
        for i in Perm::all(n) {
            let e = e_factor(&i, &p).unwrap();
            for k in 1..n {
                // z_k -> q z_k  is  zeta_k -> q zeta_k composed with nothing else
                let mut sz = p.sqrt_z.clone();
                sz[k - 1] = sz[k - 1].clone() * &p.sqrt_q;
                let lk: Vec<Vec<Real>> = (1..n).map(|l| (1..=l).map(|a| p.sqrt_u[i.at(a) - 1].clone()).collect()).collect();
                let base = e_factor_general(&lk, &p.sqrt_z, &p.q, 40).unwrap();
                assert!(base.rel_diff(&e) < 1e-60);
                let shifted = e_factor_general(&lk, &sz, &p.q, 40).unwrap();
                let expect = line_restriction(k, &i).value(&p).unwrap();
                assert!(shifted.checked_div(&e).unwrap().rel_diff(&expect) < p.tolerance());
                // one Chern root at level k times q multiplies by z_k
                let mut lk2 = lk.clone();
                lk2[k - 1][0] = lk2[k - 1][0].clone() * &p.sqrt_q;
                let shifted = e_factor_general(&lk2, &p.sqrt_z, &p.q, 40).unwrap();
                assert!(shifted.checked_div(&e).unwrap().rel_diff(&p.z[k - 1]) < p.tolerance());
            }
        }
    }

    #[test]
    fn quasi_periods_n2() {
        let p = real(2, 12);
        let pt = ChernPoint {
            n: 2,
            sqrt_q: p.sqrt_q.clone(),
            sqrt_hbar: p.sqrt_hbar.clone(),
            sx: vec![vec![p.int(4).checked_div(&p.int(7)).unwrap()]],
            sqrt_u: p.sqrt_u.clone(),
            sqrt_z: p.sqrt_z.clone(),
            theta_terms: 40,
        };
        for i in Perm::all(2) {
            let w0 = pt.wtilde(&i).unwrap();
            for v in pt.variables() {
                let ratio = pt.shifted(v).wtilde(&i).unwrap().checked_div(&w0).unwrap();
                let expect = predicted_shift_ratio(&i, &pt, v).unwrap();
                assert!(ratio.rel_diff(&expect) < p.tolerance(), "{i} {v}: {ratio} vs {expect}");
            }
        }
    }
}
