//! Dense multivariate power series in `z_1..z_m`, truncated to the box
//! `deg_i <= D`.

use crate::error::Result;
use crate::numerics::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries<S: Scalar> {
    nvars: usize,
    bound: usize,
    ctx: S::Ctx,
    coeffs: Vec<S>,
}

impl<S: Scalar> TruncatedSeries<S> {
    pub fn zero(nvars: usize, bound: usize, ctx: S::Ctx) -> Self {
        let len = (bound + 1).pow(nvars as u32);
        TruncatedSeries {
            nvars,
            bound,
            ctx,
            coeffs: vec![S::zero(ctx); len],
        }
    }

    pub fn constant(nvars: usize, bound: usize, c: S) -> Self {
        let mut s = Self::zero(nvars, bound, c.ctx());
        s.coeffs[0] = c;
        s
    }

    pub fn one(nvars: usize, bound: usize, ctx: S::Ctx) -> Self {
        Self::constant(nvars, bound, S::one(ctx))
    }

    /// `c z^deg`, or zero if `deg` leaves the box.
    pub fn monomial(nvars: usize, bound: usize, deg: &[u32], c: S) -> Self {
        let mut s = Self::zero(nvars, bound, c.ctx());
        if deg.iter().all(|&d| d as usize <= bound) {
            let k = s.index(deg);
            s.coeffs[k] = c;
        }
        s
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn ctx(&self) -> S::Ctx {
        self.ctx
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn index(&self, deg: &[u32]) -> usize {
        deg.iter()
            .fold(0, |acc, &d| acc * (self.bound + 1) + d as usize)
    }

    /// Degree vector of the `k`-th stored coefficient.
    pub fn degree_of(&self, mut k: usize) -> Vec<u32> {
        let mut deg = vec![0; self.nvars];
        for slot in deg.iter_mut().rev() {
            *slot = (k % (self.bound + 1)) as u32;
            k /= self.bound + 1;
        }
        deg
    }

    pub fn get(&self, deg: &[u32]) -> &S {
        &self.coeffs[self.index(deg)]
    }

    pub fn set(&mut self, deg: &[u32], c: S) {
        let k = self.index(deg);
        self.coeffs[k] = c;
    }

    pub fn add_at(&mut self, deg: &[u32], c: &S) {
        let k = self.index(deg);
        let cur = std::mem::replace(&mut self.coeffs[k], S::zero(self.ctx));
        self.coeffs[k] = cur + c;
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    /// `(degree, coefficient)` pairs in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<u32>, &S)> {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(k, c)| (self.degree_of(k), c))
    }

    fn assert_compatible(&self, other: &Self) {
        assert_eq!(self.nvars, other.nvars, "series in different variables");
        assert_eq!(self.bound, other.bound, "series with different bounds");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.assert_compatible(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.clone() + b)
            .collect();
        TruncatedSeries { coeffs, ..self.clone() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.assert_compatible(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.clone() - b)
            .collect();
        TruncatedSeries { coeffs, ..self.clone() }
    }

    pub fn scale(&self, c: &S) -> Self {
        let coeffs = self.coeffs.iter().map(|a| a.clone() * c).collect();
        TruncatedSeries { coeffs, ..self.clone() }
    }

    /// Product truncated to the box.
    pub fn mul(&self, other: &Self) -> Self {
        self.assert_compatible(other);
        let mut out = Self::zero(self.nvars, self.bound, self.ctx);
        let nz: Vec<(Vec<u32>, &S)> = other.iter().filter(|(_, c)| !c.is_zero()).collect();
        for (da, a) in self.iter() {
            if a.is_zero() {
                continue;
            }
            for (db, b) in &nz {
                let deg: Vec<u32> = da.iter().zip(db).map(|(x, y)| x + y).collect();
                if deg.iter().all(|&d| d as usize <= self.bound) {
                    out.add_at(&deg, &(a.clone() * *b));
                }
            }
        }
        out
    }

    /// Multiply by `c z^shift`, dropping what leaves the box.
    pub fn shift(&self, shift: &[u32], c: &S) -> Self {
        let mut out = Self::zero(self.nvars, self.bound, self.ctx);
        for (d, a) in self.iter() {
            let deg: Vec<u32> = d.iter().zip(shift).map(|(x, y)| x + y).collect();
            if deg.iter().all(|&e| e as usize <= self.bound) {
                out.set(&deg, a.clone() * c);
            }
        }
        out
    }

    /// Multiply every coefficient by a function of its degree.
    pub fn map_degrees(&self, f: impl Fn(&[u32], &S) -> Result<S>) -> Result<Self> {
        let mut out = self.clone();
        for k in 0..self.coeffs.len() {
            let d = self.degree_of(k);
            out.coeffs[k] = f(&d, &self.coeffs[k])?;
        }
        Ok(out)
    }

    /// Multiplicative inverse; the constant term must be nonzero.
    pub fn recip(&self) -> Result<Self> {
        let c0inv = self.coeffs[0].recip()?;
        let mut out = Self::zero(self.nvars, self.bound, self.ctx);
        let mut order: Vec<usize> = (0..self.coeffs.len()).collect();
        order.sort_by_key(|&k| self.degree_of(k).iter().sum::<u32>());
        out.coeffs[0] = c0inv.clone();
        let nz: Vec<(Vec<u32>, &S)> = self
            .iter()
            .filter(|(d, c)| !c.is_zero() && d.iter().any(|&x| x > 0))
            .collect();
        for &k in order.iter().skip(1) {
            let e = self.degree_of(k);
            let mut acc = S::zero(self.ctx);
            for (d, f) in &nz {
                if d.iter().zip(&e).all(|(a, b)| a <= b) {
                    let rest: Vec<u32> = e.iter().zip(d).map(|(a, b)| a - b).collect();
                    acc = acc + &((*f).clone() * out.get(&rest));
                }
            }
            out.coeffs[k] = -(acc * &c0inv);
        }
        Ok(out)
    }

    /// Sum the series at numeric `z`.
    pub fn eval(&self, z: &[S]) -> Result<S> {
        let powers = self.powers(z)?;
        let mut acc = S::zero(self.ctx);
        for (d, c) in self.iter() {
            if c.is_zero() {
                continue;
            }
            let mut t = c.clone();
            for (i, &e) in d.iter().enumerate() {
                t = t * &powers[i][e as usize];
            }
            acc = acc + &t;
        }
        Ok(acc)
    }

    fn powers(&self, z: &[S]) -> Result<Vec<Vec<S>>> {
        assert_eq!(z.len(), self.nvars);
        Ok(z.iter()
            .map(|zi| {
                let mut v = vec![S::one(self.ctx)];
                for _ in 0..self.bound {
                    let next = v.last().expect("nonempty").clone() * zi;
                    v.push(next);
                }
                v
            })
            .collect())
    }

    /// Sum of `|c_d z^d|` over the outer shell `max_i deg_i = D`, the usual
    /// proxy for the truncation error.
    pub fn tail_estimate(&self, z: &[S]) -> Result<S> {
        let powers = self.powers(z)?;
        let mut acc = S::zero(self.ctx);
        for (d, c) in self.iter() {
            if c.is_zero() || !d.iter().any(|&x| x as usize == self.bound) {
                continue;
            }
            let mut t = c.abs();
            for (i, &e) in d.iter().enumerate() {
                t = t * &powers[i][e as usize].abs();
            }
            acc = acc + &t;
        }
        Ok(acc)
    }

    /// Restrict to a smaller box.
    pub fn truncate(&self, bound: usize) -> Self {
        assert!(bound <= self.bound);
        let mut out = Self::zero(self.nvars, bound, self.ctx);
        for (d, c) in self.iter() {
            if d.iter().all(|&x| x as usize <= bound) {
                out.set(&d, c.clone());
            }
        }
        out
    }

    /// Largest per-coefficient relative difference against a reference;
    /// coefficients where the reference vanishes are measured relative to
    /// the largest reference coefficient.
    pub fn max_rel_diff(&self, reference: &Self) -> f64 {
        self.assert_compatible(reference);
        let scale = reference
            .coeffs
            .iter()
            .map(|c| c.log10_abs())
            .fold(f64::NEG_INFINITY, f64::max);
        let mut worst: f64 = 0.0;
        for (a, b) in self.coeffs.iter().zip(&reference.coeffs) {
            let d = (a.clone() - b).abs();
            if d.is_zero() {
                continue;
            }
            let denom = if b.is_zero() { scale } else { b.log10_abs() };
            let r = if denom.is_finite() {
                10f64.powf(d.log10_abs() - denom)
            } else {
                f64::INFINITY
            };
            worst = worst.max(r);
        }
        worst
    }

    pub fn to_repr(&self) -> Vec<String> {
        self.coeffs.iter().map(|c| c.to_repr()).collect()
    }

    pub fn from_repr(nvars: usize, bound: usize, ctx: S::Ctx, lines: &[String]) -> Option<Self> {
        if lines.len() != (bound + 1).pow(nvars as u32) {
            return None;
        }
        let coeffs: Option<Vec<S>> = lines.iter().map(|l| S::from_repr(l, ctx)).collect();
        Some(TruncatedSeries {
            nvars,
            bound,
            ctx,
            coeffs: coeffs?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Exact;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn ex(n: i64, d: i64) -> Exact {
        Exact(BigRational::new(n.into(), d.into()))
    }

    fn series_from(vals: &[i64], nvars: usize, bound: usize) -> TruncatedSeries<Exact> {
        let mut s = TruncatedSeries::zero(nvars, bound, ());
        for (k, v) in vals.iter().enumerate().take(s.len()) {
            s.coeffs[k] = ex(*v, 1);
        }
        s
    }

    #[test]
    fn geometric_series_reciprocal() {
        // 1/(1 - z) = sum z^k
        let mut f = TruncatedSeries::<Exact>::one(1, 5, ());
        f.set(&[1], ex(-1, 1));
        let g = f.recip().unwrap();
        for k in 0..=5 {
            assert_eq!(g.get(&[k]), &ex(1, 1));
        }
    }

    #[test]
    fn eval_and_tail() {
        let s = series_from(&[1, 2, 3], 1, 2);
        let z = [ex(1, 10)];
        assert_eq!(s.eval(&z).unwrap(), ex(123, 100));
        assert_eq!(s.tail_estimate(&z).unwrap(), ex(3, 100));
    }

    #[test]
    fn shift_drops_out_of_box() {
        let s = series_from(&[1, 1, 1, 1], 2, 1);
        let t = s.shift(&[1, 0], &ex(2, 1));
        assert_eq!(t.get(&[1, 0]), &ex(2, 1));
        assert_eq!(t.get(&[1, 1]), &ex(2, 1));
        assert_eq!(t.get(&[0, 1]), &ex(0, 1));
    }

    proptest! {
        #[test]
        fn recip_is_inverse(vals in proptest::collection::vec(-20i64..20, 9)) {
            let mut s = series_from(&vals, 2, 2);
            s.set(&[0, 0], ex(3, 1));
            let prod = s.mul(&s.recip().unwrap());
            prop_assert_eq!(prod, TruncatedSeries::one(2, 2, ()));
        }

        #[test]
        fn mul_commutes(a in proptest::collection::vec(-9i64..9, 16), b in proptest::collection::vec(-9i64..9, 16)) {
            let x = series_from(&a, 2, 3);
            let y = series_from(&b, 2, 3);
            prop_assert_eq!(x.mul(&y), y.mul(&x));
        }
    }
}
