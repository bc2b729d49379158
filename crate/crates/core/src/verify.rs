//! Verification suites. Each returns claim records; errors inside a suite
//! become failing records instead of aborting the run.

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cache::SeriesCache;
use crate::combinatorics::{preceq, Perm};
use crate::envelope::{
    diagonal_value, expected_row_sign, predicted_shift_ratio, restrict, restriction_matrix, stab_matrix,
    theorem_row_sign, ChernPoint, QuasiVar,
};
use crate::error::{Error, Result};
use crate::macdonald::{eigencheck_u, eigencheck_zeta};
use crate::mirror::{
    dual_fixed_point, kappa, lemma_lem_residual, limit_params, limver_check, verify_limits,
    verify_main_theorem, verify_stab_inverse, vertex_limit_convergence, MirrorContext, TheoremForm,
};
use crate::numerics::{sample_params, Exact, ParamSet, ParamSpec, Real, Scalar};
use crate::report::{claim_or_failure, ClaimRecord};
use crate::series::TruncatedSeries;
use crate::vertex::vertex_series;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Triangularity,
    Diagonal,
    Quasiperiodicity,
    Macdonald,
    Mirror,
    StabInverse,
    Limits,
    All,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Triangularity,
        Suite::Diagonal,
        Suite::Quasiperiodicity,
        Suite::Macdonald,
        Suite::Mirror,
        Suite::StabInverse,
        Suite::Limits,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Triangularity => "triangularity",
            Suite::Diagonal => "diagonal",
            Suite::Quasiperiodicity => "quasiperiodicity",
            Suite::Macdonald => "macdonald",
            Suite::Mirror => "mirror",
            Suite::StabInverse => "stab-inverse",
            Suite::Limits => "limits",
            Suite::All => "all",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .iter()
            .chain(std::iter::once(&Suite::All))
            .find(|x| x.name() == s)
            .copied()
            .ok_or_else(|| Error::Parse(format!("unknown suite {s}")))
    }
}

/// Inputs shared by all suites. `degree` and `theta_terms` fall back to
/// per-suite defaults when `None`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub n: usize,
    pub seeds: Vec<u64>,
    pub degree: Option<usize>,
    pub theta_terms: Option<usize>,
    pub precision: u32,
    pub form: TheoremForm,
    pub perm: Option<Perm>,
}

impl SuiteOptions {
    pub fn new(n: usize, seeds: Vec<u64>) -> Self {
        SuiteOptions {
            n,
            seeds,
            degree: None,
            theta_terms: None,
            precision: crate::numerics::DEFAULT_PRECISION,
            form: TheoremForm::Overline,
            perm: None,
        }
    }

    fn theta_terms(&self) -> usize {
        self.theta_terms.unwrap_or(crate::numerics::DEFAULT_THETA_TERMS)
    }

    fn spec(&self, seed: u64, degree: usize) -> Result<ParamSpec> {
        Ok(sample_params(self.n, seed, self.theta_terms(), degree)?.with_precision(self.precision))
    }

    fn perms(&self) -> Vec<Perm> {
        match &self.perm {
            Some(p) => vec![p.clone()],
            None => Perm::all(self.n),
        }
    }
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions, cache: &SeriesCache) -> Vec<ClaimRecord> {
    match suite {
        Suite::Triangularity => triangularity(opts),
        Suite::Diagonal => diagonal(opts),
        Suite::Quasiperiodicity => quasiperiodicity(opts),
        Suite::Macdonald => macdonald(opts),
        Suite::Mirror => mirror(opts, cache),
        Suite::StabInverse => stab_inverse(opts),
        Suite::Limits => limits(opts),
        Suite::All => Suite::ALL.iter().flat_map(|&s| run_suite(s, opts, cache)).collect(),
    }
}

fn real(spec: &ParamSpec) -> Result<ParamSet<Real>> {
    ParamSet::from_spec(spec)
}

pub fn triangularity(opts: &SuiteOptions) -> Vec<ClaimRecord> {
    let paper_ref = "Lemma stabt: =0 unless I<J";
    opts.seeds
        .iter()
        .map(|&seed| {
            let id = format!("triangularity/n{}/seed{seed}", opts.n);
            claim_or_failure(&id, paper_ref, || {
                let p = real(&opts.spec(seed, 1)?)?;
                let m = restriction_matrix(&p)?;
                let mut worst = 0f64;
                let mut count = 0usize;
                for (a, i) in m.order.iter().enumerate() {
                    let row_max = m.entries[a].iter().map(|x| x.log10_abs()).fold(f64::NEG_INFINITY, f64::max);
                    for (b, j) in m.order.iter().enumerate() {
                        count += 1;
                        if !preceq(i, j) {
                            worst = worst.max(10f64.powf(m.entries[a][b].log10_abs() - row_max));
                        }
                    }
                }
                Ok(ClaimRecord::new(&id, paper_ref, worst, p.tolerance())
                    .with_details(json!({ "restrictions": count })))
            })
        })
        .collect()
}

pub fn diagonal(opts: &SuiteOptions) -> Vec<ClaimRecord> {
    let mut out = Vec::new();
    for &seed in &opts.seeds {
        let id = format!("diagonal/n{}/seed{seed}", opts.n);
        let paper_ref = "Lemma rtv2: =P_I(w,hbar)";
        out.push(claim_or_failure(&id, paper_ref, || {
            let p = real(&opts.spec(seed, 1)?)?;
            let worst = Perm::all(opts.n)
                .par_iter()
                .map(|i| Ok(restrict(i, i, &p)?.rel_diff(&diagonal_value(i, &p)?)))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0f64, f64::max);
            Ok(ClaimRecord::new(&id, paper_ref, worst, p.tolerance()))
        }));
        let id = format!("diagonal-sign/n{}/seed{seed}", opts.n);
        let paper_ref = "Lemma stabd: row constant (-1)^{n(n-1)/2} sign(I)";
        out.push(claim_or_failure(&id, paper_ref, || {
            let p = real(&opts.spec(seed, 1)?)?;
            let data = stab_matrix(&p)?;
            let mut worst = 0f64;
            let mut disagreements = Vec::new();
            for (a, i) in data.stab.order.iter().enumerate() {
                let expect = p.int(expected_row_sign(i) as i64);
                worst = worst.max(data.row_constants[a].rel_diff(&expect));
                if theorem_row_sign(i) != expected_row_sign(i) {
                    disagreements.push(i.to_string());
                }
            }
            Ok(ClaimRecord::new(&id, paper_ref, worst, p.tolerance())
                .with_details(json!({ "differs_from_(-1)^n": disagreements })))
        }));
    }
    out
}

/// A generic point for the weight function: the sampled `hbar, u, z` and
/// Chern roots `x^{(k)}_a` spread over `(1/2, 2)`.
pub fn chern_point<S: Scalar>(p: &ParamSet<S>) -> ChernPoint<S> {
    const PRIMES: [i64; 10] = [7, 11, 13, 17, 19, 23, 29, 31, 37, 41];
    let n = p.n();
    let mut idx = 0;
    let sx = (1..n)
        .map(|k| {
            (1..=k)
                .map(|_| {
                    let d = PRIMES[idx % PRIMES.len()];
                    idx += 1;
                    p.scalar(&BigRational::new(BigInt::from(d + 2 * idx as i64), BigInt::from(d)))
                })
                .collect()
        })
        .collect();
    ChernPoint {
        n,
        sqrt_q: p.sqrt_q.clone(),
        sqrt_hbar: p.sqrt_hbar.clone(),
        sx,
        sqrt_u: p.sqrt_u.clone(),
        sqrt_z: p.sqrt_z.clone(),
        theta_terms: p.theta_terms(),
    }
}

pub fn quasiperiodicity(opts: &SuiteOptions) -> Vec<ClaimRecord> {
    let paper_ref = "Lemma stabq: W~_I is invariant under v -> qv up to the predicted factor";
    let vars = [QuasiVar::XRoot { k: 1, a: 1 }, QuasiVar::U(1), QuasiVar::Z(1), QuasiVar::Hbar];
    let mut out = Vec::new();
    for &seed in &opts.seeds {
        for v in vars {
            let id = format!("quasiperiodicity/n{}/seed{seed}/{v}", opts.n);
            out.push(claim_or_failure(&id, paper_ref, || {
                let p = real(&opts.spec(seed, 1)?)?;
                let pt = chern_point(&p);
                let shifted = pt.shifted(v);
                let worst = Perm::all(opts.n)
                    .par_iter()
                    .map(|i| {
                        let ratio = shifted.wtilde(i)?.checked_div(&pt.wtilde(i)?)?;
                        Ok(ratio.rel_diff(&predicted_shift_ratio(i, &pt, v)?))
                    })
                    .collect::<Result<Vec<f64>>>()?
                    .into_iter()
                    .fold(0f64, f64::max);
                Ok(ClaimRecord::new(&id, paper_ref, worst, p.tolerance()))
            }));
        }
    }
    out
}

fn default_macdonald_degree(n: usize) -> usize {
    if n <= 2 {
        6
    } else {
        4
    }
}

pub fn macdonald(opts: &SuiteOptions) -> Vec<ClaimRecord> {
    let d = opts.degree.unwrap_or_else(|| default_macdonald_degree(opts.n));
    let mut out = Vec::new();
    for &seed in &opts.seeds {
        for r in 1..=opts.n {
            for (kind, paper_ref) in [
                ("zeta", "Proposition dopzeta: D_r(zeta) V~_I = e_r(u^{-1}) V~_I"),
                ("u", "Proposition dopu: D_r(u) V~_I = e_r(zeta^{-1}) V~_I"),
            ] {
                let id = format!("macdonald-{kind}/n{}/seed{seed}/r{r}", opts.n);
                out.push(claim_or_failure(&id, paper_ref, || {
                    let p = real(&opts.spec(seed, d)?)?;
                    let perms = opts.perms();
                    let worst = perms
                        .par_iter()
                        .map(|i| match kind {
                            "zeta" => eigencheck_zeta(i, r, &p),
                            _ => eigencheck_u(i, r, &p),
                        })
                        .collect::<Result<Vec<f64>>>()?
                        .into_iter()
                        .fold(0f64, f64::max);
                    Ok(ClaimRecord::new(&id, paper_ref, worst, p.tolerance())
                        .with_details(json!({ "degree": d, "fixed_points": perms.len() })))
                }));
            }
        }
    }
    out
}

fn default_mirror_degree(n: usize) -> usize {
    if n <= 2 {
        8
    } else {
        5
    }
}

fn cached_vertex<S: Scalar>(
    cache: &SeriesCache,
    i: &Perm,
    p: &ParamSet<S>,
) -> Result<TruncatedSeries<S>> {
    cache.get_or_compute(&format!("vertex:{i}"), p, p.n() - 1, || vertex_series(i, p))
}

/// Mirror context with vertex series drawn from the cache.
pub fn mirror_context(p: &ParamSet<Real>, cache: &SeriesCache) -> Result<MirrorContext<Real>> {
    let dual = kappa(p)?;
    let stab = stab_matrix(p)?;
    let matrices = crate::envelope::normalized_matrices(&stab.stab, p, &dual)?;
    let order = stab.stab.order.clone();
    let vertex = order
        .par_iter()
        .map(|j| cached_vertex(cache, j, p))
        .collect::<Result<Vec<_>>>()?;
    let dual_vertex = order
        .par_iter()
        .map(|j| cached_vertex(cache, &dual_fixed_point(j), &dual))
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

/// Main theorem at degree `D` and `D + 2`: each comparison must pass and
/// the residual must not grow with the degree.
pub fn mirror(opts: &SuiteOptions, cache: &SeriesCache) -> Vec<ClaimRecord> {
    let d = opts.degree.unwrap_or_else(|| default_mirror_degree(opts.n));
    let form = opts.form;
    let paper_ref = match form {
        TheoremForm::Overline => "Theorem mainthm2: overline V^!_{I^!} = sum_J overlineStab_{I,J} overline V_J",
        TheoremForm::Bold => "Theorem mainthm: V~^!_{I^!} = sum_J boldStab_{I,J} V~_J",
    };
    let form_name = match form {
        TheoremForm::Overline => "overline",
        TheoremForm::Bold => "bold",
    };
    let mut out = Vec::new();
    for &seed in &opts.seeds {
        let contexts = [d, d + 2]
            .iter()
            .map(|&deg| opts.spec(seed, deg).and_then(|s| real(&s)).and_then(|p| mirror_context(&p, cache)))
            .collect::<Vec<_>>();
        for i in opts.perms() {
            let id = format!("mirror-{form_name}/n{}/seed{seed}/{}", opts.n, i.to_string().replace(' ', ""));
            out.push(claim_or_failure(&id, paper_ref, || {
                let lo = verify_main_theorem(contexts[0].as_ref().map_err(Clone::clone)?, &i, form)?;
                let hi = verify_main_theorem(contexts[1].as_ref().map_err(Clone::clone)?, &i, form)?;
                let shrinks = hi.residual <= lo.residual || hi.residual <= lo.tolerance.min(hi.tolerance) * 1e-3;
                Ok(ClaimRecord::new(&id, paper_ref, lo.residual, lo.tolerance)
                    .with_pass(lo.pass && hi.pass && shrinks)
                    .with_details(json!({
                        "degree": d,
                        "tail": lo.tail,
                        "lhs": lo.lhs,
                        "rhs": lo.rhs,
                        "residual_at_degree_plus_2": hi.residual,
                        "residual_shrinks": shrinks,
                    })))
            }));
        }
    }
    out
}

pub fn stab_inverse(opts: &SuiteOptions) -> Vec<ClaimRecord> {
    let paper_ref = "Corollary stabms: M_{I,J} = delta_{I,J}";
    opts.seeds
        .iter()
        .map(|&seed| {
            let id = format!("stab-inverse/n{}/seed{seed}", opts.n);
            claim_or_failure(&id, paper_ref, || {
                let p = real(&opts.spec(seed, 1)?)?;
                let o = verify_stab_inverse(&p)?;
                Ok(ClaimRecord::new(&id, paper_ref, o.max_offdiagonal.max(o.max_diagonal_deviation), o.tolerance)
                    .with_pass(o.pass)
                    .with_details(serde_json::to_value(&o).unwrap_or_default()))
            })
        })
        .collect()
}

/// Exponents `m` of the `w = 10^{-2m}` sequence.
pub const LIMIT_STEPS: [u32; 3] = [1, 2, 3];

pub fn limits(opts: &SuiteOptions) -> Vec<ClaimRecord> {
    let d = opts.degree.unwrap_or(if opts.n <= 3 { 6 } else { 3 }).min(6);
    let mut out = Vec::new();
    for &seed in &opts.seeds {
        let id = format!("limit-closed-form/n{}/seed{seed}", opts.n);
        let paper_ref = "Proposition limver: kappa(V_I(0,z)) = Phi((q-hbar^!) N^{!+}_{I^!})";
        out.push(claim_or_failure(&id, paper_ref, || {
            let spec = sample_params(opts.n, seed, opts.theta_terms(), d)?;
            let p = ParamSet::<Exact>::from_spec(&spec)?;
            let perms = opts.perms();
            let worst = perms
                .par_iter()
                .map(|i| {
                    let (a, b) = limver_check(i, &p)?;
                    Ok(a.max_rel_diff(&b))
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0f64, f64::max);
            Ok(ClaimRecord::new(&id, paper_ref, worst, 0.0).with_details(json!({ "degree": d, "backend": "exact" })))
        }));
        let id = format!("limit-sequence/n{}/seed{seed}", opts.n);
        let paper_ref = "eq. 0c: lim_{w->0} V_p(sigma(w), z) = V_p(0, z)";
        out.push(claim_or_failure(&id, paper_ref, || {
            let spec = limit_params(opts.n, seed, opts.theta_terms(), d.min(4))?.with_precision(opts.precision);
            let p = real(&spec)?;
            // coefficient d only settles once |a| << |q|^d, so start the
            // sequence past that point
            let a_max = p.a.iter().map(|a| a.log10_abs()).fold(f64::NEG_INFINITY, f64::max);
            let need = (p.max_degree() as f64 + 1.0) * -p.q.log10_abs() + a_max;
            let m0 = (need / 2.0).ceil().max(0.0) as u32;
            let steps: Vec<u32> = LIMIT_STEPS.iter().map(|m| m + m0).collect();
            let mut worst_slope = f64::INFINITY;
            let mut monotone = true;
            let mut last_gap = 0f64;
            let mut first_gap = 0f64;
            let mut detail = Vec::new();
            for i in opts.perms() {
                let conv = vertex_limit_convergence(&i, &p, &steps)?;
                let k = conv.len();
                let slope = (conv[k - 2].1.log10() - conv[k - 1].1.log10()) / (conv[k - 2].0 - conv[k - 1].0);
                worst_slope = worst_slope.min(slope);
                monotone &= conv.windows(2).all(|w| w[1].1 < w[0].1);
                last_gap = last_gap.max(conv[k - 1].1);
                first_gap = first_gap.max(conv[0].1);
                detail.push(json!({ "perm": i, "gaps": conv }));
            }
            Ok(ClaimRecord::new(&id, paper_ref, last_gap, first_gap)
                .with_pass(monotone && worst_slope >= 1.0)
                .with_details(json!({ "min_slope": worst_slope, "steps": steps, "sequences": detail })))
        }));
        for i in opts.perms() {
            let id = format!("limit-lemmas/n{}/seed{seed}/{}", opts.n, i.to_string().replace(' ', ""));
            let paper_ref = "Lemma lem4: off-diagonal summands vanish; Lemma lt: diagonal summand tends to V_I(0,z)";
            out.push(claim_or_failure(&id, paper_ref, || {
                let spec = limit_params(opts.n, seed, opts.theta_terms(), d.min(4))?.with_precision(opts.precision);
                let p = real(&spec)?;
                let o = verify_limits(&i, &p, &LIMIT_STEPS)?;
                Ok(ClaimRecord::new(&id, paper_ref, o.final_gap, o.tolerance)
                    .with_pass(o.pass)
                    .with_details(serde_json::to_value(&o).unwrap_or_default()))
            }));
        }
        let id = format!("lemma-lem/n{}/seed{seed}", opts.n);
        let paper_ref = "Lemma lem: Theta(N+) Phi((q-hbar)T)/Theta(T) = sqrt(det N+/det T) Phi((q-hbar)N+)";
        out.push(claim_or_failure(&id, paper_ref, || {
            let p = real(&opts.spec(seed, 1)?)?;
            let worst = Perm::all(opts.n)
                .iter()
                .map(|i| lemma_lem_residual(i, &p))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0f64, f64::max);
            Ok(ClaimRecord::new(&id, paper_ref, worst, p.tolerance()))
        }));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_roundtrip() {
        for s in Suite::ALL.iter().chain(std::iter::once(&Suite::All)) {
            assert_eq!(s.name().parse::<Suite>().unwrap(), *s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn all_n2_passes() {
        let opts = SuiteOptions::new(2, vec![7]);
        let claims = run_suite(Suite::All, &opts, &SeriesCache::disabled());
        for c in &claims {
            assert!(c.pass, "{c:?}");
        }
        assert!(claims.len() >= 8);
    }
}
