//! Symmetric positive definite band matrices with an in-place Cholesky
//! factorization. Used for grid preconditioners, where the bandwidth is a
//! small multiple of the grid row length.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    /// Row `i` holds `a[i][i - k]` at `i * (bw + 1) + k`.
    lower: Vec<f64>,
    factored: bool,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSpd { n, bw, lower: vec![0.0; n * (bw + 1)], factored: false }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    /// Adds `v` to entry `(i, j)` and its mirror.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside the band");
        let k = self.at(i, j);
        self.lower[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.lower[self.at(i, j)]
        }
    }

    /// Adds `c · s sᵀ` for a sparse vector `s`.
    pub fn add_outer(&mut self, s: &[(usize, f64)], c: f64) {
        for &(i, a) in s {
            for &(j, b) in s {
                if j <= i {
                    let k = self.at(i, j);
                    self.lower[k] += c * a * b;
                }
            }
        }
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.lower[self.at(i, i)]).fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..=i {
                let a = self.lower[self.at(i, j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// Replaces the lower band by its Cholesky factor `L` with `A = L Lᵀ`.
    pub fn factor(&mut self) -> Result<()> {
        let bw = self.bw;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = self.lower[self.at(i, j)];
                for k in jlo..j {
                    s -= self.lower[self.at(i, k)] * self.lower[self.at(j, k)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::numerical(format!("band matrix is not positive definite at row {i}")));
                    }
                    let idx = self.at(i, i);
                    self.lower[idx] = s.sqrt();
                } else {
                    let idx = self.at(i, j);
                    self.lower[idx] = s / self.lower[self.at(j, j)];
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = b` with a factored matrix.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert!(self.factored, "solve called before factor");
        let mut x = b.to_vec();
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.lower[self.at(i, k)] * x[k];
            }
            x[i] = s / self.lower[self.at(i, i)];
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + self.bw + 1).min(self.n) {
                s -= self.lower[self.at(k, i)] * x[k];
            }
            x[i] = s / self.lower[self.at(i, i)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_solve() {
        let n = 40;
        let bw = 5;
        let mut a = BandedSpd::zeros(n, bw);
        for i in 0..n {
            a.add(i, i, 12.0 + (i as f64).sin());
            for k in 1..=bw.min(i) {
                a.add(i, i - k, 0.7 / k as f64 * ((i * k) as f64).cos());
            }
        }
        let dense = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        assert!((DVector::from_vec(a.mul_vec(&b)) - &dense * DVector::from_vec(b.clone())).norm() < 1e-12);
        let expect = dense.cholesky().unwrap().solve(&DVector::from_vec(b.clone()));
        a.factor().unwrap();
        let x = a.solve(&b);
        assert!((DVector::from_vec(x) - expect).norm() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = BandedSpd::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 0, 2.0);
        a.add(1, 1, 1.0);
        a.add(2, 2, 1.0);
        assert!(a.factor().is_err());
    }
}
