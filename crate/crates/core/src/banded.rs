//! Cholesky factorization of symmetric positive-definite banded matrices.
//!
//! Only the lower band is stored: row `i` holds `A[i][i - bw ..= i]`, padded
//! with zeros on the left for the first rows. Factorization is `O(n bw^2)`
//! and each solve `O(n bw)`, so the pentadiagonal systems that appear in the
//! solvers cost linear time.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricBand {
    n: usize,
    bw: usize,
    /// Row-major, `bw + 1` entries per row; entry `k` is `A[i][i + k - bw]`.
    lower: Vec<f64>,
}

impl SymmetricBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, lower: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            0.0
        } else {
            self.lower[self.idx(i, j)]
        }
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
        let k = self.idx(i, j);
        self.lower[k] += v;
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..=i {
                let a = self.lower[self.idx(i, j)];
                out[i] += a * v[j];
                if j != i {
                    out[j] += a * v[i];
                }
            }
        }
        out
    }

    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.clone();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut sum = l.lower[l.idx(i, j)];
                for k in lo.max(j.saturating_sub(bw))..j {
                    sum -= l.lower[l.idx(i, k)] * l.lower[l.idx(j, k)];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(invalid(format!(
                            "banded matrix is not positive definite (pivot {sum} at row {i})"
                        )));
                    }
                    let k = l.idx(i, i);
                    l.lower[k] = sum.sqrt();
                } else {
                    let k = l.idx(i, j);
                    l.lower[k] = sum / l.lower[l.idx(j, j)];
                }
            }
        }
        Ok(BandCholesky { factor: l })
    }
}

/// Lower-triangular banded factor `L` with `A = L L^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCholesky {
    factor: SymmetricBand,
}

impl BandCholesky {
    pub fn dim(&self) -> usize {
        self.factor.n
    }

    /// Solves `A x = rhs` in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let f = &self.factor;
        let (n, bw) = (f.n, f.bw);
        assert_eq!(rhs.len(), n);
        for i in 0..n {
            let mut v = rhs[i];
            for k in i.saturating_sub(bw)..i {
                v -= f.lower[f.idx(i, k)] * rhs[k];
            }
            rhs[i] = v / f.lower[f.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut v = rhs[i];
            for k in i + 1..n.min(i + bw + 1) {
                v -= f.lower[f.idx(k, i)] * rhs[k];
            }
            rhs[i] = v / f.lower[f.idx(i, i)];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut out = rhs.to_vec();
        self.solve_in_place(&mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense(b: &SymmetricBand) -> Vec<Vec<f64>> {
        (0..b.dim()).map(|i| (0..b.dim()).map(|j| b.get(i, j)).collect()).collect()
    }

    #[test]
    fn tridiagonal_laplacian() {
        let n = 6;
        let mut a = SymmetricBand::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let rhs = a.mul_vec(&x);
        let got = a.cholesky().unwrap().solve(&rhs);
        for (u, v) in got.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = SymmetricBand::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(0, 1, 2.0);
        assert!(a.cholesky().is_err());
    }

    proptest! {
        #[test]
        fn pentadiagonal_solve_matches_dense_product(
            n in 1usize..30,
            seed in proptest::collection::vec(-1.0f64..1.0, 90),
        ) {
            // diagonally dominant pentadiagonal matrix
            let mut a = SymmetricBand::zeros(n, 2);
            for i in 0..n {
                a.add(i, i, 5.0 + seed[i].abs());
                if i >= 1 { a.add(i, i - 1, seed[30 + i]); }
                if i >= 2 { a.add(i, i - 2, seed[60 + i]); }
            }
            let x: Vec<f64> = (0..n).map(|i| seed[(7 * i) % 90]).collect();
            let d = dense(&a);
            let rhs: Vec<f64> = d.iter().map(|row| row.iter().zip(&x).map(|(p, q)| p * q).sum()).collect();
            let got = a.cholesky().unwrap().solve(&rhs);
            for (u, v) in got.iter().zip(&x) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }
    }
}
