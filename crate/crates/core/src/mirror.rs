//! The mirror map on parameters, dual fixed points and the checks relating
//! the two sides.

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{precedes, Perm};
use crate::envelope::{normalized_matrices, stab_matrix, NormalizedMatrices, StabData};
use crate::error::{Error, Result};
use crate::geometry::{half_tangent, n_plus};
use crate::macdonald::split_zeta;
use crate::numerics::{GenVar, ParamSet, ParamSpec, Scalar};
use crate::qseries::{phi_diff, pochhammer, theta_multiset, SqrtMonomial};
use crate::series::TruncatedSeries;
use crate::vertex::{normalized_prefactor, vertex_limit, vertex_series};

/// `kappa`: `u^! = zeta`, `zeta^! = u`, `hbar^! = q/hbar`, `q` fixed.
/// No genericity check.
pub fn kappa_spec_unchecked(spec: &ParamSpec) -> ParamSpec {
    let mut out = spec.clone();
    out.sqrt_hbar = spec.sqrt_q.clone() / spec.sqrt_hbar.clone();
    out.sqrt_u = spec.sqrt_zeta.clone();
    out.sqrt_zeta = spec.sqrt_u.clone();
    out
}

pub fn kappa_spec(spec: &ParamSpec) -> Result<ParamSpec> {
    let out = kappa_spec_unchecked(spec);
    out.validate()?;
    out.check_generic()?;
    Ok(out)
}

/// The dual parameter set in the same backend and precision.
pub fn kappa<S: Scalar>(p: &ParamSet<S>) -> Result<ParamSet<S>> {
    ParamSet::with_ctx(&kappa_spec(p.spec())?, p.ctx())
}

pub fn kappa_unchecked<S: Scalar>(p: &ParamSet<S>) -> Result<ParamSet<S>> {
    ParamSet::with_ctx(&kappa_spec_unchecked(p.spec()), p.ctx())
}

/// `I^! = I^{-1}`.
pub fn dual_fixed_point(i: &Perm) -> Perm {
    i.inverse()
}

/// The generator of the dual side corresponding to an original one.
pub fn dual_generator(v: GenVar) -> GenVar {
    match v {
        GenVar::SqrtU(i) => GenVar::SqrtZeta(i),
        GenVar::SqrtZeta(i) => GenVar::SqrtU(i),
        other => other,
    }
}

/// The exchange of the elliptic classes under the mirror map is not
/// computed here.
pub fn kappa_stab_exchange() -> Result<()> {
    Err(Error::OutOfScope("exchange of elliptic stable envelopes under kappa".into()))
}

/// Rewrite a monomial of the dual generator layout in the original one.
pub fn dual_monomial_to_original(m: &SqrtMonomial) -> SqrtMonomial {
    let n = m.n();
    let e = m.exponents();
    let mut out = vec![0; e.len()];
    // sqrt(hbar^!) = sqrt(q)/sqrt(hbar)
    out[0] = e[0] + e[1];
    out[1] = -e[1];
    for i in 0..n {
        out[2 + n + i] = e[2 + i];
        out[2 + i] = e[2 + n + i];
    }
    SqrtMonomial::from_exponents(out)
}

/// `Phi((q - hbar^!) N^{!+}_{I^!})` as a z-series: each dual attracting
/// weight becomes `C z^c` in the original Kähler variables and
/// `phi(q w)/phi(hbar^! w) = sum_m (hbar)_m/(q)_m (hbar^! w)^m`.
pub fn kappa_image_series<S: Scalar>(i: &Perm, p: &ParamSet<S>) -> Result<TruncatedSeries<S>> {
    let n = p.n();
    let bound = p.max_degree();
    let hbar_dual = p.q.checked_div(&p.hbar)?;
    let mut acc = TruncatedSeries::one(n - 1, bound, p.ctx());
    for (w, &mult) in n_plus(&dual_fixed_point(i)).iter() {
        let orig = dual_monomial_to_original(w);
        let split = split_zeta(&orig)?;
        if split.zeta_n_exponent != 0
            || split.z_exponents.iter().any(|&c| c < 0)
            || split.z_exponents.iter().all(|&c| c == 0)
        {
            return Err(Error::InvalidParameters(format!(
                "dual weight {orig:?} is not a power series in z"
            )));
        }
        if split.rest.exponents()[2..2 + n].iter().any(|&e| e != 0) {
            return Err(Error::InvalidParameters(format!("dual weight {orig:?} depends on u")));
        }
        let x = hbar_dual.clone() * &split.rest.value(p)?;
        let mut f = TruncatedSeries::zero(n - 1, bound, p.ctx());
        let mut xm = p.one();
        for m in 0..=bound as i64 {
            let deg: Vec<i64> = split.z_exponents.iter().map(|&c| c as i64 * m).collect();
            if deg.iter().any(|&d| d > bound as i64) {
                break;
            }
            let coef = pochhammer(&p.hbar, &p.q, m)?.checked_div(&pochhammer(&p.q, &p.q, m)?)? * &xm;
            let deg: Vec<u32> = deg.iter().map(|&d| d as u32).collect();
            f.set(&deg, coef);
            xm = xm * &x;
        }
        for _ in 0..mult {
            acc = acc.mul(&f);
        }
    }
    Ok(acc)
}

/// Both sides of the limit proposition, exact in the parameters.
pub fn limver_check<S: Scalar>(i: &Perm, p: &ParamSet<S>) -> Result<(TruncatedSeries<S>, TruncatedSeries<S>)> {
    Ok((vertex_limit(i, p)?, kappa_image_series(i, p)?))
}

/// Relative residual of
/// `Theta(N^+) Phi((q - hbar) T^{1/2}) / Theta(T^{1/2}) = sqrt(det N^+ / det T^{1/2}) Phi((q - hbar) N^+)`.
pub fn lemma_lem_residual<S: Scalar>(i: &Perm, p: &ParamSet<S>) -> Result<f64> {
    let t = half_tangent(i);
    let np = n_plus(i);
    let lhs = theta_multiset(&np, p)? * phi_diff(&t, p)?.checked_div(&theta_multiset(&t, p)?)?;
    let det = np
        .sub(&t)
        .sqrt_det()
        .ok_or_else(|| Error::InvalidParameters("det has no square root".into()))?;
    let rhs = det.value(p)? * phi_diff(&np, p)?;
    Ok(lhs.rel_diff(&rhs))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoremForm {
    Overline,
    Bold,
}

impl std::str::FromStr for TheoremForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overline" => Ok(TheoremForm::Overline),
            "bold" => Ok(TheoremForm::Bold),
            _ => Err(Error::Parse(format!("unknown form {s}"))),
        }
    }
}

/// Everything the mirror checks need at one parameter point: stable
/// envelopes and vertex series on both sides.
pub struct MirrorContext<S: Scalar> {
    pub params: ParamSet<S>,
    pub dual: ParamSet<S>,
    pub stab: StabData<S>,
    pub matrices: NormalizedMatrices<S>,
    /// `V_J` in the order of `stab.stab.order`.
    pub vertex: Vec<TruncatedSeries<S>>,
    /// `V^!_{J^!}` on the dual parameters, same order.
    pub dual_vertex: Vec<TruncatedSeries<S>>,
}

impl<S: Scalar> MirrorContext<S> {
    pub fn new(p: &ParamSet<S>) -> Result<Self> {
        let dual = kappa(p)?;
        Self::with_dual(p, dual)
    }

    pub fn with_dual(p: &ParamSet<S>, dual: ParamSet<S>) -> Result<Self> {
        let stab = stab_matrix(p)?;
        let matrices = normalized_matrices(&stab.stab, p, &dual)?;
        let order = stab.stab.order.clone();
        let vertex = order
            .par_iter()
            .map(|j| vertex_series(j, p))
            .collect::<Result<Vec<_>>>()?;
        let dual_vertex = order
            .par_iter()
            .map(|j| vertex_series(&dual_fixed_point(j), &dual))
            .collect::<Result<Vec<_>>>()?;
        Ok(MirrorContext {
            params: p.clone(),
            dual,
            stab,
            matrices,
            vertex,
            dual_vertex,
        })
    }

    pub fn order(&self) -> &[Perm] {
        &self.stab.stab.order
    }
}

/// Outcome of one main-theorem comparison.
#[derive(Clone, Debug, Serialize)]
pub struct MainTheoremOutcome {
    pub perm: Perm,
    pub form: TheoremForm,
    pub max_degree: usize,
    pub lhs: String,
    pub rhs: String,
    pub residual: f64,
    /// Relative truncation-tail estimate, the larger of the two sides.
    pub tail: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Budget above which a tail estimate makes the comparison meaningless.
pub const TAIL_BUDGET: f64 = 1e-2;

/// Compare both sides of the main theorem for the fixed point `I`.
pub fn verify_main_theorem<S: Scalar>(
    ctx: &MirrorContext<S>,
    i: &Perm,
    form: TheoremForm,
) -> Result<MainTheoremOutcome> {
    let p = &ctx.params;
    let dual = &ctx.dual;
    let order = ctx.order();
    let a = ctx.stab.stab.position(i);
    let idual = dual_fixed_point(i);
    let vd = &ctx.dual_vertex[a];
    let (lhs_pre, rhs_pre): (S, Vec<S>) = match form {
        TheoremForm::Overline => {
            let l = phi_diff(&n_plus(&idual), dual)?;
            let r = order
                .iter()
                .enumerate()
                .map(|(b, j)| {
                    let o = ctx.matrices.overline.entries[a][b].clone();
                    Ok(o.checked_div(&theta_multiset(&n_plus(j), p)?)? * phi_diff(&n_plus(j), p)?)
                })
                .collect::<Result<Vec<_>>>()?;
            (l, r)
        }
        TheoremForm::Bold => {
            let l = normalized_prefactor(&idual, dual.n()).value(dual)?;
            let r = order
                .iter()
                .enumerate()
                .map(|(b, j)| {
                    Ok(ctx.matrices.bold.entries[a][b].clone() * normalized_prefactor(j, p.n()).value(p)?)
                })
                .collect::<Result<Vec<_>>>()?;
            (l, r)
        }
    };
    let lhs = lhs_pre.clone() * vd.eval(&dual.z)?;
    let lhs_tail = (lhs_pre * vd.tail_estimate(&dual.z)?).abs();
    let mut rhs = p.zero();
    let mut rhs_tail = p.zero();
    for (b, c) in rhs_pre.iter().enumerate() {
        rhs = rhs + (c.clone() * ctx.vertex[b].eval(&p.z)?);
        rhs_tail = rhs_tail + (c.clone() * ctx.vertex[b].tail_estimate(&p.z)?).abs();
    }
    let rel = |t: &S| {
        if lhs.is_zero() {
            f64::INFINITY
        } else {
            10f64.powf(t.log10_abs() - lhs.log10_abs())
        }
    };
    let tail = rel(&lhs_tail).max(rel(&rhs_tail));
    if tail > TAIL_BUDGET {
        return Err(Error::TailTooLarge {
            relative_tail: tail,
            budget: TAIL_BUDGET,
        });
    }
    let residual = rhs.rel_diff(&lhs);
    let tolerance = p.tolerance().max(10.0 * tail);
    Ok(MainTheoremOutcome {
        perm: i.clone(),
        form,
        max_degree: p.max_degree(),
        lhs: lhs.to_sci_string(20),
        rhs: rhs.to_sci_string(20),
        residual,
        tail,
        tolerance,
        pass: residual <= tolerance,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StabInverseOutcome {
    pub max_offdiagonal: f64,
    pub max_diagonal_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `M_{K,J} = sum_L bold^!_{K^!, L^!} bold_{L,J}`, where `bold^!` is built
/// on the dual parameters with the original ones as its dual.
pub fn stab_inverse_matrix<S: Scalar>(p: &ParamSet<S>) -> Result<(Vec<Perm>, Vec<Vec<S>>)> {
    let dual = kappa(p)?;
    let bold = normalized_matrices(&stab_matrix(p)?.stab, p, &dual)?.bold;
    let bold_dual = normalized_matrices(&stab_matrix(&dual)?.stab, &dual, p)?.bold;
    let order = bold.order.clone();
    let m = order.len();
    let mut out = vec![vec![p.zero(); m]; m];
    for (k, kk) in order.iter().enumerate() {
        let kd = bold_dual.position(&dual_fixed_point(kk));
        for j in 0..m {
            let mut acc = p.zero();
            for (l, ll) in order.iter().enumerate() {
                let ld = bold_dual.position(&dual_fixed_point(ll));
                acc = acc + (bold_dual.entries[kd][ld].clone() * &bold.entries[l][j]);
            }
            out[k][j] = acc;
        }
    }
    Ok((order, out))
}

pub fn verify_stab_inverse<S: Scalar>(p: &ParamSet<S>) -> Result<StabInverseOutcome> {
    let (order, m) = stab_inverse_matrix(p)?;
    let one = p.one();
    let mut off = 0f64;
    let mut diag = 0f64;
    for a in 0..order.len() {
        for b in 0..order.len() {
            if a == b {
                diag = diag.max(m[a][b].rel_diff(&one));
            } else {
                off = off.max(m[a][b].abs().to_f64());
            }
        }
    }
    let tolerance = p.tolerance();
    Ok(StabInverseOutcome {
        max_offdiagonal: off,
        max_diagonal_deviation: diag,
        tolerance,
        pass: off <= tolerance && diag <= tolerance,
    })
}

/// Parameters along `u_i -> w^{-i} u_i` with `w = 10^{-2m}`.
pub fn sigma_spec(spec: &ParamSpec, m: u32) -> Result<ParamSpec> {
    let mut out = spec.clone();
    for (i, su) in out.sqrt_u.iter_mut().enumerate() {
        let f = BigRational::from_integer(BigInt::from(10).pow(m * (i as u32 + 1)));
        *su = su.clone() * f;
    }
    out.validate()?;
    out.check_generic()?;
    Ok(out)
}

/// Sampled parameters with every `z_i` multiplied by `q^2`. The summands
/// of the limit lemmas tend to zero like `a^{log|z| / log|q|}`, so `|z|`
/// must sit well below `|q|` for the decay to be visible at moderate `w`.
pub fn limit_params(n: usize, seed: u64, theta_terms: usize, max_degree: usize) -> Result<ParamSpec> {
    let mut spec = crate::numerics::sample_params(n, seed, theta_terms, max_degree)?;
    let sq2 = spec.sqrt_q.clone() * &spec.sqrt_q;
    let mut f = BigRational::from_integer(BigInt::from(1));
    for k in (0..n - 1).rev() {
        f *= &sq2;
        spec.sqrt_zeta[k] = spec.sqrt_zeta[k].clone() * &f;
    }
    spec.validate()?;
    spec.check_generic()?;
    Ok(spec)
}

/// `F_{I,J} = sqrt(det T_I / det N_I) Stab_{I,J} Phi((q - hbar) T_J) / Theta(T_J) V_J(a, z)`
/// summed at the numeric `z`.
pub fn limit_summands<S: Scalar>(i: &Perm, p: &ParamSet<S>) -> Result<Vec<(Perm, S)>> {
    let stab = stab_matrix(p)?.stab;
    let a = stab.position(i);
    let det = half_tangent(i)
        .sub(&n_plus(i))
        .sqrt_det()
        .ok_or_else(|| Error::InvalidParameters("det has no square root".into()))?
        .value(p)?;
    stab.order
        .par_iter()
        .enumerate()
        .map(|(b, j)| {
            let t = half_tangent(j);
            let v = vertex_series(j, p)?.eval(&p.z)?;
            let f = det.clone()
                * &stab.entries[a][b]
                * &phi_diff(&t, p)?.checked_div(&theta_multiset(&t, p)?)?
                * &v;
            Ok((j.clone(), f))
        })
        .collect()
}

/// `Phi((q - hbar) N_I^+) V_I(a, z)` summed at `z`, the diagonal summand
/// after the theta factors cancel.
pub fn diagonal_limit_summand<S: Scalar>(i: &Perm, p: &ParamSet<S>) -> Result<S> {
    Ok(phi_diff(&n_plus(i), p)? * vertex_series(i, p)?.eval(&p.z)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitOutcome {
    pub perm: Perm,
    /// `log10 w` along the sequence.
    pub log10_w: Vec<f64>,
    /// `log10 |F_{I,J}|` for every `J` strictly after `I`, per sequence point.
    pub offdiagonal: Vec<(String, Vec<f64>)>,
    /// Decades of decay per decade of `w` between the last two points.
    pub offdiagonal_slopes: Vec<(String, f64)>,
    /// `|F_{I,I} - V_I(0, z)| / |V_I(0, z)|` per sequence point.
    pub diagonal_gap: Vec<f64>,
    pub diagonal_slope: f64,
    /// Same gap at a point with `|a|` below the tolerance.
    pub final_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks of the two limit lemmas along `sigma(w)`, `w = 10^{-2m}` for the
/// given `m`, plus a final point with `|a|` far below tolerance.
pub fn verify_limits<S: Scalar>(i: &Perm, p: &ParamSet<S>, steps: &[u32]) -> Result<LimitOutcome> {
    let spec = p.spec();
    let later: Vec<Perm> = Perm::all(p.n()).into_iter().filter(|j| precedes(i, j)).collect();
    let mut off: Vec<(String, Vec<f64>)> = later.iter().map(|j| (j.to_string(), Vec::new())).collect();
    let mut gaps = Vec::new();
    let mut log10_w = Vec::new();
    for &m in steps {
        let ps = ParamSet::<S>::with_ctx(&sigma_spec(spec, m)?, p.ctx())?;
        let lim = vertex_limit(i, &ps)?.eval(&ps.z)?;
        for (j, f) in limit_summands(i, &ps)? {
            if &j == i {
                gaps.push(f.rel_diff(&lim));
            } else if let Some(k) = later.iter().position(|x| x == &j) {
                off[k].1.push(f.log10_abs());
            }
        }
        log10_w.push(-2.0 * m as f64);
    }
    let slope = |ys: &[f64]| -> f64 {
        let k = ys.len();
        if k < 2 {
            return f64::NAN;
        }
        (ys[k - 2] - ys[k - 1]) / (log10_w[k - 2] - log10_w[k - 1])
    };
    let offdiagonal_slopes: Vec<(String, f64)> = off.iter().map(|(j, ys)| (j.clone(), slope(ys))).collect();
    let diag_log: Vec<f64> = gaps.iter().map(|g| g.log10()).collect();
    let diagonal_slope = slope(&diag_log);
    // final point with |a| < tol/100
    let tolerance = p.tolerance();
    let a_max = p.a.iter().map(|a| a.log10_abs()).fold(f64::NEG_INFINITY, f64::max);
    let m_final = ((a_max - (tolerance / 100.0).log10()) / 2.0).ceil().max(1.0) as u32;
    let pf = ParamSet::<S>::with_ctx(&sigma_spec(spec, m_final)?, p.ctx())?;
    let lim = vertex_limit(i, &pf)?.eval(&pf.z)?;
    let final_gap = diagonal_limit_summand(i, &pf)?.rel_diff(&lim);
    let decays = offdiagonal_slopes.iter().all(|(_, s)| *s >= 1.0)
        && off.iter().all(|(_, ys)| ys.windows(2).all(|w| w[1] < w[0]));
    let converges = gaps.windows(2).all(|w| w[1] < w[0]);
    let pass = decays && converges && final_gap <= tolerance;
    Ok(LimitOutcome {
        perm: i.clone(),
        log10_w,
        offdiagonal: off,
        offdiagonal_slopes,
        diagonal_gap: gaps,
        diagonal_slope,
        final_gap,
        tolerance,
        pass,
    })
}

/// Largest relative coefficient gap between `V_I` and its closed-form
/// limit, per step of `sigma(w)`.
pub fn vertex_limit_convergence<S: Scalar>(i: &Perm, p: &ParamSet<S>, steps: &[u32]) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for &m in steps {
        let ps = ParamSet::<S>::with_ctx(&sigma_spec(p.spec(), m)?, p.ctx())?;
        let v = vertex_series(i, &ps)?;
        let lim = vertex_limit(i, &ps)?;
        out.push((-2.0 * m as f64, v.max_rel_diff(&lim)));
    }
    Ok(out)
}
