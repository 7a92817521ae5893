//! Banded LU factorisation with partial pivoting.
//!
//! Row `i` stores columns `i - kl ..= i + ku + kl`; the extra `kl`
//! super-diagonals hold fill-in created by row interchanges.

use std::fmt;

#[derive(Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl fmt::Debug for BandMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BandMatrix")
            .field("n", &self.n)
            .field("kl", &self.kl)
            .field("ku", &self.ku)
            .finish()
    }
}

/// Why a factorisation stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularPivot {
    pub column: usize,
    pub pivot: f64,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl, "({i}, {j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    /// Adds `v` to entry `(i, j)`, which must lie inside the declared band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside band");
        let o = self.offset(i, j);
        self.data[o] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl || j >= self.n {
            0.0
        } else {
            self.data[self.offset(i, j)]
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// `y = A x`, valid before factorisation.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.offset(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Factorises in place. Pivots smaller than `tol` times the largest entry
    /// magnitude are reported as singular.
    pub fn factorize(mut self, tol: f64) -> Result<BandLu, SingularPivot> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.ku + self.kl;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut pivots = vec![0usize; n];
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot: f64 = 0.0;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.offset(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.offset(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            pivots[k] = p;
            if !(best > tol * scale) || !best.is_finite() {
                return Err(SingularPivot {
                    column: k,
                    pivot: best,
                });
            }
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.offset(k, j);
                    let b = self.offset(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.offset(k, k)];
            for r in k + 1..=last_row {
                let o = self.offset(r, k);
                let l = self.data[o] / pivot;
                self.data[o] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let src = self.data[self.offset(k, j)];
                        let dst = self.offset(r, j);
                        self.data[dst] -= l * src;
                    }
                }
            }
        }
        Ok(BandLu {
            lu: self,
            pivots,
            pivot_ratio: if max_pivot > 0.0 { min_pivot / max_pivot } else { 0.0 },
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    lu: BandMatrix,
    pivots: Vec<usize>,
    pivot_ratio: f64,
}

impl BandLu {
    /// Smallest over largest pivot magnitude; a cheap conditioning hint.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let a = &self.lu;
        let n = a.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + a.kl).min(n - 1) {
                    b[r] -= a.data[a.offset(r, k)] * bk;
                }
            }
        }
        let reach = a.ku + a.kl;
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                acc -= a.data[a.offset(k, j)] * b[j];
            }
            b[k] = acc / a.data[a.offset(k, k)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for r in k + 1..n {
                let l = a[r][k] / a[k][k];
                for j in k..n {
                    a[r][j] -= l * a[k][j];
                }
                b[r] -= l * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
            x[k] = (b[k] - s) / a[k][k];
        }
        x
    }

    #[test]
    fn tridiagonal_solve() {
        let n = 6;
        let mut m = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            m.add(i, i, 2.0);
            if i > 0 {
                m.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                m.add(i, i + 1, -1.0);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let mut b = m.mul_vec(&x_true);
        m.factorize(1e-14).unwrap().solve_in_place(&mut b);
        for (a, e) in b.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let mut m = BandMatrix::zeros(3, 1, 1);
        m.add(0, 1, 1.0);
        m.add(1, 0, 1.0);
        m.add(1, 2, 1.0);
        m.add(2, 1, 1.0);
        m.add(2, 2, 1.0);
        let mut b = m.mul_vec(&[1.0, 2.0, 3.0]);
        m.factorize(1e-14).unwrap().solve_in_place(&mut b);
        assert!((b[0] - 1.0).abs() < 1e-14 && (b[1] - 2.0).abs() < 1e-14 && (b[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut m = BandMatrix::zeros(3, 1, 1);
        m.add(0, 0, 1.0);
        m.add(1, 1, 0.0);
        m.add(2, 2, 1.0);
        let err = m.factorize(1e-14).unwrap_err();
        assert_eq!(err.column, 1);
    }

    proptest! {
        #[test]
        fn matches_dense_elimination(
            entries in proptest::collection::vec(-1.0f64..1.0, 12 * 7),
            rhs in proptest::collection::vec(-1.0f64..1.0, 12),
        ) {
            let (n, kl, ku) = (12usize, 3usize, 3usize);
            let mut m = BandMatrix::zeros(n, kl, ku);
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    let v = entries[i * 7 + (j + kl - i)] + if i == j { 0.1 } else { 0.0 };
                    m.add(i, j, v);
                }
            }
            let dense = m.to_dense();
            let expect = dense_solve(dense, rhs.clone());
            if expect.iter().all(|v| v.is_finite() && v.abs() < 1e6) {
                let mut b = rhs.clone();
                m.clone().factorize(1e-14).unwrap().solve_in_place(&mut b);
                let r = m.mul_vec(&b);
                for (ri, bi) in r.iter().zip(&rhs) {
                    prop_assert!((ri - bi).abs() < 1e-8);
                }
            }
        }
    }
}
