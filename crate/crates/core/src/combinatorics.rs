//! Permutations, the attraction order on fixed points, and the quasimap
//! degree cone.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A permutation `I = (I_1, ..., I_n)` of `{1..n}` in one-line notation.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Perm {
    vals: Vec<usize>,
    inv: Vec<usize>,
    sign: i32,
    /// `ordered[k-1]` = `i^{(k)}_1 < ... < i^{(k)}_k`, for k = 1..n.
    ordered: Vec<Vec<usize>>,
}

impl Perm {
    pub fn new(vals: Vec<usize>) -> Result<Self> {
        let n = vals.len();
        let mut seen = vec![false; n + 1];
        for &v in &vals {
            if v == 0 || v > n || seen[v] {
                return Err(Error::Parse(format!("{vals:?} is not a permutation of 1..{n}")));
            }
            seen[v] = true;
        }
        let mut inv = vec![0; n];
        for (pos, &v) in vals.iter().enumerate() {
            inv[v - 1] = pos + 1;
        }
        let mut sign = 1;
        for a in 0..n {
            for b in (a + 1)..n {
                if vals[a] > vals[b] {
                    sign = -sign;
                }
            }
        }
        let ordered = (1..=n)
            .map(|k| {
                let mut s = vals[..k].to_vec();
                s.sort_unstable();
                s
            })
            .collect();
        Ok(Perm {
            vals,
            inv,
            sign,
            ordered,
        })
    }

    pub fn identity(n: usize) -> Self {
        Perm::new((1..=n).collect()).expect("identity is a permutation")
    }

    /// All permutations of `1..n` in lexicographic order.
    pub fn all(n: usize) -> Vec<Perm> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (1..=n).collect();
        loop {
            out.push(Perm::new(cur.clone()).expect("valid"));
            // next lexicographic permutation
            let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).expect("exists");
            cur.swap(i, j);
            cur[i + 1..].reverse();
        }
        out
    }

    pub fn n(&self) -> usize {
        self.vals.len()
    }

    /// One-line values, 1-based.
    pub fn values(&self) -> &[usize] {
        &self.vals
    }

    /// `I_j` for 1-based `j`.
    pub fn at(&self, j: usize) -> usize {
        self.vals[j - 1]
    }

    /// The inverse permutation `I^!`.
    pub fn inverse(&self) -> Perm {
        Perm::new(self.inv.clone()).expect("inverse is a permutation")
    }

    /// `(-1)^I`.
    pub fn sign(&self) -> i32 {
        self.sign
    }

    /// `i^{(k)}_1 < ... < i^{(k)}_k`, for `1 <= k <= n`.
    pub fn ordered(&self, k: usize) -> &[usize] {
        &self.ordered[k - 1]
    }

    pub fn compose(&self, other: &Perm) -> Perm {
        Perm::new(other.vals.iter().map(|&j| self.vals[j - 1]).collect()).expect("valid")
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.vals.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

impl FromStr for Perm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let vals: std::result::Result<Vec<usize>, _> = s
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<usize>())
            .collect();
        let vals = vals.map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
        Perm::new(vals)
    }
}

impl Serialize for Perm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Perm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `I ≼ J`: `i^{(k)}_m <= j^{(k)}_m` for all `k = 1..n-1`, `m = 1..k`.
pub fn preceq(i: &Perm, j: &Perm) -> bool {
    assert_eq!(i.n(), j.n());
    (1..i.n()).all(|k| {
        i.ordered(k)
            .iter()
            .zip(j.ordered(k))
            .all(|(a, b)| a <= b)
    })
}

/// Strict version of [`preceq`].
pub fn precedes(i: &Perm, j: &Perm) -> bool {
    i != j && preceq(i, j)
}

/// All permutations of `1..n`, topologically sorted for [`precedes`] with
/// ties broken lexicographically.
pub fn total_order(n: usize) -> Vec<Perm> {
    let all = Perm::all(n);
    let m = all.len();
    let mut indeg = vec![0usize; m];
    let mut succ = vec![Vec::new(); m];
    for a in 0..m {
        for b in 0..m {
            if precedes(&all[a], &all[b]) {
                succ[a].push(b);
                indeg[b] += 1;
            }
        }
    }
    // `all` is lexicographic, so the index is the tie-breaking key.
    let mut heap: BinaryHeap<Reverse<usize>> =
        (0..m).filter(|&a| indeg[a] == 0).map(Reverse).collect();
    let mut out = Vec::with_capacity(m);
    while let Some(Reverse(a)) = heap.pop() {
        out.push(all[a].clone());
        for &b in &succ[a] {
            indeg[b] -= 1;
            if indeg[b] == 0 {
                heap.push(Reverse(b));
            }
        }
    }
    out
}

/// `N(I)`: number of pairs `j < k` with `I_j < I_k`.
pub fn non_inversions(i: &Perm) -> usize {
    let v = i.values();
    let mut c = 0;
    for a in 0..v.len() {
        for b in (a + 1)..v.len() {
            if v[a] < v[b] {
                c += 1;
            }
        }
    }
    c
}

pub fn inversions(i: &Perm) -> usize {
    let n = i.n();
    n * (n - 1) / 2 - non_inversions(i)
}

/// The 1-based position `j` with `I_j = i^{(k)}_a`.
pub fn j_index(i: &Perm, k: usize, a: usize) -> usize {
    let target = i.ordered(k)[a - 1];
    i.values()
        .iter()
        .position(|&v| v == target)
        .expect("ordered index is a value of I")
        + 1
}

/// A quasimap degree `d_{i,j}`, `i = 1..n-1`, `j = 1..i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DegreeMatrix {
    rows: Vec<Vec<u32>>,
}

impl DegreeMatrix {
    /// `rows[i-1]` has length `i`.
    pub fn new(rows: Vec<Vec<u32>>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != i + 1 {
                return Err(Error::InvalidParameters(format!(
                    "row {} of a degree matrix must have {} entries",
                    i + 1,
                    i + 1
                )));
            }
        }
        Ok(DegreeMatrix { rows })
    }

    pub fn zero(n: usize) -> Self {
        DegreeMatrix {
            rows: (1..n).map(|i| vec![0; i]).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.rows.len() + 1
    }

    /// `d_{i,j}` with 1-based indices.
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.rows[i - 1][j - 1]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i - 1]
    }

    /// `deg_i = sum_j d_{i,j}` for `i = 1..n-1`.
    pub fn degree(&self) -> Vec<u32> {
        self.rows.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn total_degree(&self) -> u32 {
        self.degree().iter().sum()
    }

    pub fn is_admissible(&self) -> bool {
        (1..self.rows.len()).all(|i| row_dominates(&self.rows[i - 1], &self.rows[i]))
    }
}

/// Whether some injection `k -> j_k` has `upper[k] >= lower[j_k]`. After
/// sorting both rows ascending, matching the k-th smallest entries is
/// optimal, so the check is entrywise.
pub fn row_dominates(upper: &[u32], lower: &[u32]) -> bool {
    let mut a = upper.to_vec();
    let mut b = lower.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    a.iter().zip(b.iter()).all(|(x, y)| x >= y)
}

fn compositions(len: usize, max_sum: u32) -> Vec<Vec<u32>> {
    fn rec(len: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(len, left - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(len, max_sum, &mut Vec::new(), &mut out);
    out
}

/// All admissible degree matrices with `deg_i <= bound`, sorted by total
/// degree and then lexicographically.
pub fn enumerate_degrees(n: usize, bound: u32) -> Vec<DegreeMatrix> {
    assert!(n >= 2);
    let choices: Vec<Vec<Vec<u32>>> = (1..n).map(|i| compositions(i, bound)).collect();
    let mut out = Vec::new();
    // Build from the bottom row up so that each new row only has to be
    // checked against the row below it.
    fn rec(
        level: usize,
        choices: &[Vec<Vec<u32>>],
        acc: &mut Vec<Vec<u32>>,
        out: &mut Vec<DegreeMatrix>,
    ) {
        if level == 0 {
            let mut rows = acc.clone();
            rows.reverse();
            out.push(DegreeMatrix { rows });
            return;
        }
        for row in &choices[level - 1] {
            if let Some(below) = acc.last() {
                if !row_dominates(row, below) {
                    continue;
                }
            }
            acc.push(row.clone());
            rec(level - 1, choices, acc, out);
            acc.pop();
        }
    }
    rec(n - 1, &choices, &mut Vec::new(), &mut out);
    out.sort_by(|a, b| a.total_degree().cmp(&b.total_degree()).then_with(|| a.cmp(b)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Perm {
        s.parse().unwrap()
    }

    #[test]
    fn perm_basics() {
        let i = p("3 1 2");
        assert_eq!(i.ordered(2), &[1, 3]);
        assert_eq!(i.inverse(), p("2 3 1"));
        assert_eq!(i.compose(&i.inverse()), Perm::identity(3));
        assert_eq!(i.sign(), 1);
        assert_eq!(p("2 1").sign(), -1);
        assert_eq!(i.to_string(), "3 1 2");
    }

    #[test]
    fn precedes_examples() {
        assert!(precedes(&p("1 2"), &p("2 1")));
        assert!(!precedes(&p("1 2"), &p("1 2")));
        assert!(preceq(&p("1 2"), &p("1 2")));
        let id = Perm::identity(3);
        let above: Vec<_> = Perm::all(3).into_iter().filter(|j| precedes(&id, j)).collect();
        assert_eq!(above.len(), 5);
    }

    #[test]
    fn precedes_is_a_strict_partial_order() {
        for n in 2..=4 {
            let all = Perm::all(n);
            for a in &all {
                assert!(!precedes(a, a));
                for b in &all {
                    if precedes(a, b) {
                        assert!(!precedes(b, a));
                        for c in &all {
                            if precedes(b, c) {
                                assert!(precedes(a, c));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn total_order_is_topological() {
        assert_eq!(total_order(2), vec![p("1 2"), p("2 1")]);
        for n in 2..=4 {
            let order = total_order(n);
            assert_eq!(order.len(), (1..=n).product::<usize>());
            for a in 0..order.len() {
                for b in 0..order.len() {
                    if precedes(&order[a], &order[b]) {
                        assert!(a < b);
                    }
                }
            }
            assert_eq!(order, total_order(n));
        }
    }

    #[test]
    fn inversion_counts() {
        assert_eq!(non_inversions(&p("2 1")), 0);
        assert_eq!(non_inversions(&Perm::identity(3)), 3);
        for i in Perm::all(4) {
            assert_eq!(non_inversions(&i) + inversions(&i), 6);
        }
    }

    #[test]
    fn j_index_examples() {
        assert_eq!(j_index(&p("3 1 2"), 2, 1), 2);
        assert_eq!(j_index(&p("2 1"), 1, 1), 1);
        let id = Perm::identity(4);
        for k in 1..4 {
            for a in 1..=k {
                assert_eq!(j_index(&id, k, a), a);
            }
        }
        for i in Perm::all(4) {
            for k in 1..4 {
                for a in 1..=k {
                    let j = j_index(&i, k, a);
                    assert!(j <= k);
                    assert_eq!(i.at(j), i.ordered(k)[a - 1]);
                }
            }
        }
    }

    #[test]
    fn enumerate_n2() {
        let ds = enumerate_degrees(2, 3);
        assert_eq!(ds.len(), 4);
        assert_eq!(ds[3].get(1, 1), 3);
    }

    #[test]
    fn admissibility_example() {
        let d = DegreeMatrix::new(vec![vec![0], vec![1, 0]]).unwrap();
        assert!(d.is_admissible());
        let d = DegreeMatrix::new(vec![vec![0], vec![1, 1]]).unwrap();
        assert!(!d.is_admissible());
    }

    #[test]
    fn enumeration_sorted_and_bounded() {
        let ds = enumerate_degrees(3, 3);
        for w in ds.windows(2) {
            assert!(w[0].total_degree() <= w[1].total_degree());
        }
        assert!(ds.iter().all(|d| d.degree().iter().all(|&x| x <= 3) && d.is_admissible()));
    }

    proptest! {
        #[test]
        fn perm_parse_roundtrip(seed in 0u64..10_000) {
            let all = Perm::all(4);
            let i = &all[(seed % 24) as usize];
            prop_assert_eq!(&i.to_string().parse::<Perm>().unwrap(), i);
            prop_assert_eq!(i.inverse().inverse(), i.clone());
            prop_assert_eq!(i.inverse().sign(), i.sign());
        }
    }
}
