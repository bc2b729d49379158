//! Multiplicative independence of the square-root generators.
//!
//! A monomial in the generators equals 1 exactly when its exponent vector
//! lies in the left kernel of the valuation matrix over a coprime base of
//! all numerators and denominators. The kernel is found by elimination
//! over Q; short kernel vectors are reported as witnesses.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Outcome of the genericity check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenericityVerdict {
    pub rank: usize,
    pub nullity: usize,
    /// Smallest exponent vector found whose monomial equals 1 and whose
    /// entries fit the window.
    pub witness: Option<Vec<i64>>,
}

fn coprime_base(values: &[BigInt]) -> Vec<BigInt> {
    let mut base: Vec<BigInt> = Vec::new();
    for v in values {
        let v = v.abs();
        if v > BigInt::one() {
            base.push(v);
        }
    }
    loop {
        base.sort();
        base.dedup();
        let mut changed = false;
        'outer: for i in 0..base.len() {
            for j in (i + 1)..base.len() {
                let g = base[i].gcd(&base[j]);
                if g > BigInt::one() {
                    let a = &base[i] / &g;
                    let b = &base[j] / &g;
                    let mut next: Vec<BigInt> = base
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != i && *k != j)
                        .map(|(_, x)| x.clone())
                        .collect();
                    for x in [a, b, g] {
                        if x > BigInt::one() {
                            next.push(x);
                        }
                    }
                    base = next;
                    changed = true;
                    break 'outer;
                }
            }
        }
        if !changed {
            return base;
        }
    }
}

fn valuation(x: &BigInt, p: &BigInt) -> i64 {
    let mut x = x.abs();
    let mut k = 0;
    while !x.is_zero() && (&x % p).is_zero() {
        x /= p;
        k += 1;
    }
    k
}

/// Integer basis of `{v : sum_i v_i * row_i = 0}` for rational rows.
fn left_kernel(rows: &[Vec<i64>]) -> (usize, Vec<Vec<BigInt>>) {
    let m = rows.len();
    let cols = rows.first().map_or(0, |r| r.len());
    // Work on the transpose: columns of `a` are the generators.
    let mut a: Vec<Vec<BigRational>> = (0..cols)
        .map(|c| {
            (0..m)
                .map(|r| BigRational::from_integer(BigInt::from(rows[r][c])))
                .collect()
        })
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..m {
        let Some(p) = (row..cols).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        let inv = a[row][col].recip();
        for x in a[row].iter_mut() {
            *x = &*x * &inv;
        }
        for r in 0..cols {
            if r != row && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let pivot_row = a[row].clone();
                for (x, y) in a[r].iter_mut().zip(pivot_row.iter()) {
                    *x = &*x - &f * y;
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == cols {
            break;
        }
    }
    let rank = pivots.len();
    let mut basis = Vec::new();
    for free in (0..m).filter(|c| !pivots.contains(c)) {
        let mut v = vec![BigRational::zero(); m];
        v[free] = BigRational::one();
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -a[r][free].clone();
        }
        let lcm = v
            .iter()
            .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let ints: Vec<BigInt> = v.iter().map(|x| (x * &lcm).to_integer()).collect();
        let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
        basis.push(ints.into_iter().map(|x| x / &g).collect());
    }
    (rank, basis)
}

fn max_abs(v: &[BigInt]) -> BigInt {
    v.iter().map(|x| x.abs()).max().unwrap_or_default()
}

fn size_reduce(basis: &mut [Vec<BigInt>]) {
    for _ in 0..20 {
        let mut improved = false;
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                if i == j {
                    continue;
                }
                for sign in [1i64, -1] {
                    let cand: Vec<BigInt> = basis[i]
                        .iter()
                        .zip(basis[j].iter())
                        .map(|(x, y)| x - y * BigInt::from(sign))
                        .collect();
                    if max_abs(&cand) < max_abs(&basis[i]) {
                        basis[i] = cand;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Check that no monomial with exponents bounded by `window` in the given
/// rational generators equals 1 (up to sign, since only squares enter).
pub fn check_genericity(generators: &[BigRational], window: i64) -> GenericityVerdict {
    let mut ints = Vec::new();
    for g in generators {
        ints.push(g.numer().clone());
        ints.push(g.denom().clone());
    }
    let base = coprime_base(&ints);
    let rows: Vec<Vec<i64>> = generators
        .iter()
        .map(|g| {
            base.iter()
                .map(|p| valuation(g.numer(), p) - valuation(g.denom(), p))
                .collect()
        })
        .collect();
    let (rank, mut basis) = if base.is_empty() {
        // Every generator is +-1.
        let m = generators.len();
        let basis = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| if i == j { BigInt::one() } else { BigInt::zero() })
                    .collect()
            })
            .collect();
        (0, basis)
    } else {
        left_kernel(&rows)
    };
    let nullity = basis.len();
    size_reduce(&mut basis);
    let mut candidates: Vec<Vec<BigInt>> = basis.clone();
    for i in 0..basis.len() {
        for j in (i + 1)..basis.len() {
            for (ci, cj) in [(1i64, 1i64), (1, -1), (1, 2), (2, 1), (1, -2), (2, -1)] {
                candidates.push(
                    basis[i]
                        .iter()
                        .zip(basis[j].iter())
                        .map(|(x, y)| x * BigInt::from(ci) + y * BigInt::from(cj))
                        .collect(),
                );
            }
        }
    }
    let bound = BigInt::from(window);
    let witness = candidates
        .into_iter()
        .filter(|v| v.iter().any(|x| !x.is_zero()) && max_abs(v) <= bound)
        .min_by_key(|v| max_abs(v))
        .map(|v| {
            v.into_iter()
                .map(|x| i64::try_from(x).expect("bounded by the window"))
                .collect()
        });
    GenericityVerdict {
        rank,
        nullity,
        witness,
    }
}
