//! Vertex functions as truncated z-series, their normalization and the
//! closed-form limit at `a -> 0`.

use rayon::prelude::*;

use crate::combinatorics::{enumerate_degrees, DegreeMatrix, Perm};
use crate::error::{Error, Result};
use crate::geometry::half_tangent;
use crate::numerics::{GenVar, ParamSet, Scalar};
use crate::qseries::{phi_diff_shift_ratio, poch_ratio, theta_monomial, theta_shift_monomial, SqrtMonomial};
use crate::series::TruncatedSeries;

fn u_of<S: Scalar>(p: &ParamSet<S>, i: usize) -> &S {
    &p.u[i - 1]
}

/// The coefficient `c_d(a)` of `z^d` for one degree matrix.
pub fn vertex_coefficient<S: Scalar>(i: &Perm, d: &DegreeMatrix, p: &ParamSet<S>) -> Result<S> {
    let n = p.n();
    let (q, h) = (&p.q, &p.hbar);
    let uu = |k: usize| u_of(p, i.at(k));
    let ratio = |num: &S, den: &S| num.checked_div(den);
    let mut acc = p.one();
    let di = |a: usize, b: usize| d.get(a, b) as i64;
    for r in 1..n.saturating_sub(1) {
        for j in 1..=r {
            for k in 1..=r + 1 {
                let m = di(r, j) - di(r + 1, k);
                if m == 0 {
                    continue;
                }
                let w = ratio(uu(k), uu(j))?;
                acc = acc * poch_ratio(&(h.clone() * &w), &(q.clone() * &w), q, m)?;
            }
        }
    }
    for r in 1..n {
        for j in 1..=r {
            for k in 1..=r {
                let m = di(r, j) - di(r, k);
                if m == 0 {
                    continue;
                }
                let w = ratio(uu(k), uu(j))?;
                acc = acc * poch_ratio(&(q.clone() * &w), &(h.clone() * &w), q, m)?;
            }
        }
    }
    for r in 1..=n {
        for j in 1..n {
            let m = di(n - 1, j);
            if m == 0 {
                continue;
            }
            let w = ratio(u_of(p, r), uu(j))?;
            acc = acc * poch_ratio(&(h.clone() * &w), &(q.clone() * &w), q, m)?;
        }
        if acc.is_zero() {
            break;
        }
    }
    Ok(acc)
}

/// `V_I(a, z)` truncated to `deg_i <= D`, summing over the degree cone.
pub fn vertex_series<S: Scalar>(i: &Perm, p: &ParamSet<S>) -> Result<TruncatedSeries<S>> {
    vertex_series_to(i, p, p.max_degree())
}

pub fn vertex_series_to<S: Scalar>(i: &Perm, p: &ParamSet<S>, bound: usize) -> Result<TruncatedSeries<S>> {
    let n = p.n();
    let degrees = enumerate_degrees(n, bound as u32);
    let terms: Vec<(Vec<u32>, S)> = degrees
        .par_iter()
        .map(|d| Ok((d.degree(), vertex_coefficient(i, d, p)?)))
        .collect::<Result<_>>()?;
    let mut s = TruncatedSeries::zero(n - 1, bound, p.ctx());
    for (deg, c) in &terms {
        s.add_at(deg, c);
    }
    Ok(s)
}

/// A transcendental factor kept by parts so that q-shifts of a generator
/// can be applied analytically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Atom {
    /// `theta(arg)^power`.
    Theta { arg: SqrtMonomial, power: i32 },
    /// `(phi(q w)/phi(hbar w))^power`.
    PhiDiff { weight: SqrtMonomial, power: i32 },
}

/// Result of shifting one generator in a [`Prefactor`]: a signed monomial
/// times a rational number.
#[derive(Clone, Debug)]
pub struct ShiftRatio<S: Scalar> {
    pub sign: i32,
    pub monomial: SqrtMonomial,
    pub rational: S,
}

impl<S: Scalar> ShiftRatio<S> {
    pub fn value(&self, p: &ParamSet<S>) -> Result<S> {
        let v = self.monomial.value(p)? * &self.rational;
        Ok(if self.sign < 0 { -v } else { v })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prefactor {
    pub atoms: Vec<Atom>,
}

impl Prefactor {
    pub fn value<S: Scalar>(&self, p: &ParamSet<S>) -> Result<S> {
        let mut num = p.one();
        let mut den = p.one();
        for atom in &self.atoms {
            let (v, power) = match atom {
                Atom::Theta { arg, power } => (theta_monomial(arg, p)?, *power),
                Atom::PhiDiff { weight, power } => {
                    let w = weight.value(p)?;
                    let a = crate::qseries::phi(&(p.q.clone() * &w), &p.q, p.theta_terms());
                    let b = crate::qseries::phi(&(p.hbar.clone() * &w), &p.q, p.theta_terms());
                    (a.checked_div(&b)?, *power)
                }
            };
            if power >= 0 {
                num = num * v.powi(power as i64)?;
            } else {
                if v.is_zero() {
                    return Err(Error::DivisionByZeroTheta {
                        context: format!("{atom:?}"),
                    });
                }
                den = den * v.powi(-power as i64)?;
            }
        }
        Ok(num.checked_div(&den)?)
    }

    /// Ratio `F(v -> q^k v) / F` when the full character of generator `v`
    /// is multiplied by `q^k`.
    pub fn shift_ratio<S: Scalar>(&self, v: GenVar, k: i32, p: &ParamSet<S>) -> Result<ShiftRatio<S>> {
        self.shift_ratio_multi(&[(v, k)], p)
    }

    /// Same for several generators shifted at once.
    pub fn shift_ratio_multi<S: Scalar>(&self, shifts: &[(GenVar, i32)], p: &ParamSet<S>) -> Result<ShiftRatio<S>> {
        let n = p.n();
        let mut sign = 1;
        let mut monomial = SqrtMonomial::identity(n);
        let mut rational = p.one();
        let total = |arg: &SqrtMonomial| -> i32 {
            shifts
                .iter()
                .map(|&(v, k)| {
                    let e = arg.exponent(v);
                    debug_assert!(e % 2 == 0);
                    k * e / 2
                })
                .sum()
        };
        for atom in &self.atoms {
            match atom {
                Atom::Theta { arg, power } => {
                    let j = total(arg);
                    if j == 0 {
                        continue;
                    }
                    let (s, m) = theta_shift_monomial(arg, j);
                    if s < 0 && power % 2 != 0 {
                        sign = -sign;
                    }
                    monomial = monomial.mul(&m.pow(*power));
                }
                Atom::PhiDiff { weight, power } => {
                    let j = total(weight);
                    if j == 0 {
                        continue;
                    }
                    let w = weight.value(p)?;
                    let r = phi_diff_shift_ratio(&w, &p.q, &p.hbar, j as i64)?;
                    rational = rational * r.powi(*power as i64)?;
                }
            }
        }
        Ok(ShiftRatio {
            sign,
            monomial,
            rational,
        })
    }
}

/// `alpha_I(u, zeta, hbar) = prod_i theta(zeta_i hbar^{i-n}) theta(u_{I_i} (q/hbar)^{n-i}) / theta(zeta_i/u_{I_i})`
/// as atoms.
pub fn alpha_atoms(i: &Perm, n: usize) -> Vec<Atom> {
    let h = SqrtMonomial::hbar(n);
    let qh = SqrtMonomial::q(n).div(&h);
    let mut atoms = Vec::new();
    for k in 1..=n {
        let zeta = SqrtMonomial::zeta(n, k - 1);
        let u = SqrtMonomial::u(n, i.at(k) - 1);
        atoms.push(Atom::Theta {
            arg: zeta.mul(&h.pow(k as i32 - n as i32)),
            power: 1,
        });
        atoms.push(Atom::Theta {
            arg: u.mul(&qh.pow((n - k) as i32)),
            power: 1,
        });
        atoms.push(Atom::Theta {
            arg: zeta.div(&u),
            power: -1,
        });
    }
    atoms
}

pub fn alpha_factor<S: Scalar>(i: &Perm, p: &ParamSet<S>) -> Result<S> {
    Prefactor {
        atoms: alpha_atoms(i, p.n()),
    }
    .value(p)
}

/// `Phi((q - hbar) T^{1/2}_I X)` as atoms.
pub fn polarization_atoms(i: &Perm) -> Vec<Atom> {
    half_tangent(i)
        .iter()
        .map(|(w, &m)| Atom::PhiDiff {
            weight: w.clone(),
            power: m as i32,
        })
        .collect()
}

/// `alpha_I Phi((q - hbar) T^{1/2}_I) V_I`, with the prefactor kept by parts.
#[derive(Clone, Debug)]
pub struct NormalizedVertex<S: Scalar> {
    pub perm: Perm,
    pub prefactor: Prefactor,
    pub series: TruncatedSeries<S>,
}

impl<S: Scalar> NormalizedVertex<S> {
    pub fn prefactor_value(&self, p: &ParamSet<S>) -> Result<S> {
        self.prefactor.value(p)
    }

    /// The full normalized series, prefactor multiplied in.
    pub fn full_series(&self, p: &ParamSet<S>) -> Result<TruncatedSeries<S>> {
        Ok(self.series.scale(&self.prefactor_value(p)?))
    }
}

pub fn normalized_prefactor(i: &Perm, n: usize) -> Prefactor {
    let mut atoms = alpha_atoms(i, n);
    atoms.extend(polarization_atoms(i));
    Prefactor { atoms }
}

pub fn normalized_vertex<S: Scalar>(i: &Perm, p: &ParamSet<S>) -> Result<NormalizedVertex<S>> {
    Ok(NormalizedVertex {
        perm: i.clone(),
        prefactor: normalized_prefactor(i, p.n()),
        series: vertex_series(i, p)?,
    })
}

/// `sum_m (hbar)_m/(q)_m (c Z)^m` for the monomial `Z = z_j ... z_{k-1}`
/// (0-based `j..k`), i.e. `phi(hbar c Z)/phi(c Z)` by the q-binomial theorem.
pub fn q_binomial_series<S: Scalar>(
    nvars: usize,
    bound: usize,
    range: std::ops::Range<usize>,
    c: &S,
    p: &ParamSet<S>,
) -> Result<TruncatedSeries<S>> {
    let mut s = TruncatedSeries::zero(nvars, bound, p.ctx());
    let mut coef = p.one();
    let one = p.one();
    let mut qm = p.one();
    let mut hm = p.one();
    for m in 0..=bound {
        let mut deg = vec![0u32; nvars];
        for v in range.clone() {
            deg[v] = m as u32;
        }
        s.set(&deg, coef.clone());
        // (hbar)_{m+1}/(q)_{m+1} c^{m+1}
        let f = (one.clone() - hm.clone() * &p.hbar).checked_div(&(one.clone() - qm.clone() * &p.q))?;
        coef = coef * f * c;
        qm = qm * &p.q;
        hm = hm * &p.q;
    }
    Ok(s)
}

/// Closed form of `V_I(0, z)`:
/// `prod_{j<k} phi(hbar B Z)/phi(B Z)` with `B = (hbar/q)^{k-j-1+[I_j<I_k]}`
/// and `Z = z_j ... z_{k-1}`.
pub fn vertex_limit<S: Scalar>(i: &Perm, p: &ParamSet<S>) -> Result<TruncatedSeries<S>> {
    let n = p.n();
    let bound = p.max_degree();
    let hq = p.hbar.checked_div(&p.q)?;
    let mut acc = TruncatedSeries::one(n - 1, bound, p.ctx());
    for j in 1..=n {
        for k in (j + 1)..=n {
            let delta = i64::from(i.at(j) < i.at(k));
            let b = hq.powi(k as i64 - j as i64 - 1 + delta)?;
            let f = q_binomial_series(n - 1, bound, (j - 1)..(k - 1), &b, p)?;
            acc = acc.mul(&f);
        }
    }
    Ok(acc)
}
