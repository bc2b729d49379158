//! Torus weights at fixed points: polarization, tangent space, its
//! attracting and repelling halves, index bundles and tautological line
//! bundles.

use std::collections::BTreeMap;

use crate::combinatorics::Perm;
use crate::qseries::SqrtMonomial;

/// A formal sum of characters with integer multiplicities.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeightMultiset {
    n: usize,
    weights: BTreeMap<SqrtMonomial, i64>,
}

impl WeightMultiset {
    pub fn new(n: usize) -> Self {
        WeightMultiset {
            n,
            weights: BTreeMap::new(),
        }
    }

    pub fn from_weights(n: usize, ws: impl IntoIterator<Item = SqrtMonomial>) -> Self {
        let mut v = Self::new(n);
        for w in ws {
            v.add_weight(w, 1);
        }
        v
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add_weight(&mut self, w: SqrtMonomial, m: i64) {
        let e = self.weights.entry(w).or_insert(0);
        *e += m;
        if *e == 0 {
            self.weights.retain(|_, m| *m != 0);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SqrtMonomial, &i64)> {
        self.weights.iter()
    }

    /// Weights listed with repetition; only meaningful for effective classes.
    pub fn to_list(&self) -> Vec<SqrtMonomial> {
        let mut out = Vec::new();
        for (w, &m) in &self.weights {
            for _ in 0..m.max(0) {
                out.push(w.clone());
            }
        }
        out
    }

    /// Virtual rank: sum of multiplicities.
    pub fn rank(&self) -> i64 {
        self.weights.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (w, &m) in &other.weights {
            out.add_weight(w.clone(), m);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (w, &m) in &other.weights {
            out.add_weight(w.clone(), -m);
        }
        out
    }

    /// `V^∨`: every weight inverted.
    pub fn dual(&self) -> Self {
        let mut out = Self::new(self.n);
        for (w, &m) in &self.weights {
            out.add_weight(w.inv(), m);
        }
        out
    }

    /// Every weight multiplied by `c`.
    pub fn twist(&self, c: &SqrtMonomial) -> Self {
        let mut out = Self::new(self.n);
        for (w, &m) in &self.weights {
            out.add_weight(w.mul(c), m);
        }
        out
    }

    /// `det V = prod w^m`.
    pub fn det(&self) -> SqrtMonomial {
        self.weights
            .iter()
            .fold(SqrtMonomial::identity(self.n), |acc, (w, &m)| {
                acc.mul(&w.pow(m as i32))
            })
    }

    /// `(det V)^{1/2}`, defined because every weight is a square.
    pub fn sqrt_det(&self) -> Option<SqrtMonomial> {
        self.det().sqrt()
    }
}

fn u(n: usize, i: usize) -> SqrtMonomial {
    SqrtMonomial::u(n, i - 1)
}

/// `T^{1/2}_I X = sum_{j<k} u_{I_k}/u_{I_j}`.
pub fn half_tangent(i: &Perm) -> WeightMultiset {
    let n = i.n();
    let mut v = WeightMultiset::new(n);
    for j in 1..=n {
        for k in (j + 1)..=n {
            v.add_weight(u(n, i.at(k)).div(&u(n, i.at(j))), 1);
        }
    }
    v
}

/// `T_I X = T^{1/2} + hbar^{-1} (T^{1/2})^∨`.
pub fn tangent(i: &Perm) -> WeightMultiset {
    let h = half_tangent(i);
    let hinv = SqrtMonomial::hbar(i.n()).inv();
    h.add(&h.dual().twist(&hinv))
}

/// Attracting part of `T_I X` for the fixed chamber `u -> (w^-1, ..., w^-n)`.
pub fn n_plus(i: &Perm) -> WeightMultiset {
    let n = i.n();
    let hinv = SqrtMonomial::hbar(n).inv();
    let mut v = WeightMultiset::new(n);
    for j in 1..=n {
        for k in (j + 1)..=n {
            let (ij, ik) = (i.at(j), i.at(k));
            if ik < ij {
                v.add_weight(u(n, ik).div(&u(n, ij)), 1);
            } else {
                v.add_weight(u(n, ij).div(&u(n, ik)).mul(&hinv), 1);
            }
        }
    }
    v
}

/// Repelling part of `T_I X`.
pub fn n_minus(i: &Perm) -> WeightMultiset {
    let n = i.n();
    let hinv = SqrtMonomial::hbar(n).inv();
    let mut v = WeightMultiset::new(n);
    for j in 1..=n {
        for k in (j + 1)..=n {
            let (ij, ik) = (i.at(j), i.at(k));
            if ik < ij {
                v.add_weight(u(n, ij).div(&u(n, ik)).mul(&hinv), 1);
            } else {
                v.add_weight(u(n, ik).div(&u(n, ij)), 1);
            }
        }
    }
    v
}

/// Whether a weight tends to zero along the chamber with the given sign
/// (`+1` for the fixed chamber, `-1` for its opposite). Only the `a`-part
/// matters; a weight with no `a`-dependence is neither.
pub fn is_attracting(w: &SqrtMonomial, chamber_sign: i32) -> bool {
    match w.a_exponents() {
        Some(e) => {
            let e: Vec<i32> = e.iter().map(|x| x * chamber_sign).collect();
            e.iter().all(|&x| x >= 0) && e.iter().any(|&x| x > 0)
        }
        None => false,
    }
}

/// Attracting part of the polarization at `I` for the signed chamber.
pub fn index_bundle(i: &Perm, chamber_sign: i32) -> WeightMultiset {
    let mut v = WeightMultiset::new(i.n());
    for (w, &m) in half_tangent(i).iter() {
        if is_attracting(w, chamber_sign) {
            v.add_weight(w.clone(), m);
        }
    }
    v
}

/// `L_i|_I = u_{I_1} ... u_{I_i}`.
pub fn line_restriction(i: usize, perm: &Perm) -> SqrtMonomial {
    let n = perm.n();
    (1..=i).fold(SqrtMonomial::identity(n), |acc, j| acc.mul(&u(n, perm.at(j))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::non_inversions;

    fn p(s: &str) -> Perm {
        s.parse().unwrap()
    }

    fn w(n: usize, num: usize, den: usize, hbar_pow: i32) -> SqrtMonomial {
        u(n, num).div(&u(n, den)).mul(&SqrtMonomial::hbar(n).pow(hbar_pow))
    }

    #[test]
    fn half_tangent_n2() {
        assert_eq!(
            half_tangent(&p("1 2")),
            WeightMultiset::from_weights(2, [w(2, 2, 1, 0)])
        );
        for n in 2..=5 {
            for i in Perm::all(n) {
                assert_eq!(half_tangent(&i).rank() as usize, n * (n - 1) / 2);
            }
        }
    }

    #[test]
    fn n_plus_minus_n2() {
        assert_eq!(n_plus(&p("1 2")), WeightMultiset::from_weights(2, [w(2, 1, 2, -1)]));
        assert_eq!(n_minus(&p("1 2")), WeightMultiset::from_weights(2, [w(2, 2, 1, 0)]));
        assert_eq!(n_plus(&p("2 1")), WeightMultiset::from_weights(2, [w(2, 1, 2, 0)]));
        assert_eq!(n_minus(&p("2 1")), WeightMultiset::from_weights(2, [w(2, 2, 1, -1)]));
    }

    #[test]
    fn decomposition_and_attraction() {
        for n in 2..=4 {
            for i in Perm::all(n) {
                let np = n_plus(&i);
                assert_eq!(np.add(&n_minus(&i)), tangent(&i));
                assert_eq!(np.rank() as usize, n * (n - 1) / 2);
                for (wt, _) in np.iter() {
                    assert!(is_attracting(wt, 1), "{wt}");
                }
            }
        }
    }

    #[test]
    fn index_bundles() {
        assert_eq!(
            index_bundle(&p("1 2"), -1),
            WeightMultiset::from_weights(2, [w(2, 2, 1, 0)])
        );
        for i in Perm::all(3) {
            let plus = index_bundle(&i, 1);
            let minus = index_bundle(&i, -1);
            assert_eq!(plus.add(&minus), half_tangent(&i));
            assert_eq!(minus.rank() as usize, non_inversions(&i));
        }
    }

    #[test]
    fn line_restrictions() {
        let i = p("3 1 2");
        assert_eq!(line_restriction(1, &i), u(3, 3));
        assert_eq!(
            line_restriction(2, &Perm::identity(3)),
            u(3, 1).mul(&u(3, 2))
        );
        for j in Perm::all(3) {
            for k in 1..3 {
                let r = line_restriction(k, &i).div(&line_restriction(k, &j));
                assert!(r.a_exponents().is_some());
            }
        }
    }

    #[test]
    fn sqrt_det_well_formed() {
        for n in 2..=4 {
            for i in Perm::all(n) {
                let m = half_tangent(&i).sub(&n_plus(&i));
                assert!(m.sqrt_det().is_some());
            }
        }
    }
}
