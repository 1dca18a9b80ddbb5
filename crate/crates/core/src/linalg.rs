//! Banded symmetric positive-definite storage and Cholesky factorization.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix: `band[k * (w + 1) + d] = A[k][k - d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    width: usize,
    band: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, width: usize) -> Self {
        Self {
            n,
            width,
            band: vec![0.0; n * (width + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> usize {
        debug_assert!(col <= row && row - col <= self.width);
        row * (self.width + 1) + (row - col)
    }

    /// Entry `A[row][col]`; zero outside the band.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        if r - c > self.width {
            0.0
        } else {
            self.band[self.slot(r, c)]
        }
    }

    /// Adds `v` to both `A[row][col]` and its mirror.
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        let s = self.slot(r, c);
        self.band[s] += v;
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        let s = self.slot(r, c);
        self.band[s] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for r in 0..self.n {
            let lo = r.saturating_sub(self.width);
            for c in lo..r {
                let a = self.band[self.slot(r, c)];
                y[r] += a * x[c];
                y[c] += a * x[r];
            }
            y[r] += self.band[self.slot(r, r)] * x[r];
        }
        y
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0f64; self.n];
        for r in 0..self.n {
            let lo = r.saturating_sub(self.width);
            for c in lo..r {
                let a = self.band[self.slot(r, c)].abs();
                rows[r] += a;
                rows[c] += a;
            }
            rows[r] += self.band[self.slot(r, r)].abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |r, c| self.get(r, c))
    }

    /// In-place band Cholesky `A = L L^T`.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, w) = (self.n, self.width);
        let mut l = self.band.clone();
        let at = |r: usize, c: usize| r * (w + 1) + (r - c);
        for j in 0..n {
            let lo = j.saturating_sub(w);
            let mut d = l[at(j, j)];
            for k in lo..j {
                d -= l[at(j, k)] * l[at(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Conditioning {
                    detail: format!("band Cholesky pivot {d:e} at row {j} of {n}"),
                });
            }
            let d = d.sqrt();
            l[at(j, j)] = d;
            for i in j + 1..(j + w + 1).min(n) {
                let lo_i = i.saturating_sub(w).max(lo);
                let mut s = l[at(i, j)];
                for k in lo_i..j {
                    s -= l[at(i, k)] * l[at(j, k)];
                }
                l[at(i, j)] = s / d;
            }
        }
        Ok(BandCholesky { n, width: w, l })
    }
}

/// Band Cholesky factor; solves cost `O(n w)`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    width: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.l[r * (self.width + 1) + (r - c)]
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, w) = (self.n, self.width);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(w)..i {
                s -= self.at(i, k) * b[k];
            }
            b[i] = s / self.at(i, i);
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + w + 1).min(n) {
                s -= self.at(k, i) * b[k];
            }
            b[i] = s / self.at(i, i);
        }
    }

    /// Solves for `nrhs` right-hand sides stored node-major:
    /// entry `r` of node `i` lives at `b[i * nrhs + r]`.
    pub fn solve_many_in_place(&self, b: &mut [f64], nrhs: usize) {
        let (n, w) = (self.n, self.width);
        assert_eq!(b.len(), n * nrhs, "right-hand side block has the wrong size");
        if nrhs == 0 {
            return;
        }
        for i in 0..n {
            let (head, tail) = b.split_at_mut(i * nrhs);
            let bi = &mut tail[..nrhs];
            for k in i.saturating_sub(w)..i {
                let l = self.at(i, k);
                for (x, y) in bi.iter_mut().zip(&head[k * nrhs..(k + 1) * nrhs]) {
                    *x -= l * y;
                }
            }
            let d = self.at(i, i);
            bi.iter_mut().for_each(|x| *x /= d);
        }
        for i in (0..n).rev() {
            let (head, tail) = b.split_at_mut((i + 1) * nrhs);
            let bi = &mut head[i * nrhs..];
            for k in i + 1..(i + w + 1).min(n) {
                let l = self.at(k, i);
                let off = (k - i - 1) * nrhs;
                for (x, y) in bi.iter_mut().zip(&tail[off..off + nrhs]) {
                    *x -= l * y;
                }
            }
            let d = self.at(i, i);
            bi.iter_mut().for_each(|x| *x /= d);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Ratio of the largest to smallest pivot squared, a cheap condition proxy.
    pub fn pivot_ratio(&self) -> f64 {
        let d: Vec<f64> = (0..self.n).map(|i| self.at(i, i)).collect();
        let max = d.iter().cloned().fold(0.0, f64::max);
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        (max / min).powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_solve_matches_single_solves() {
        let a = random_spd_band(40, 5, 77);
        let f = a.cholesky().unwrap();
        let nrhs = 3;
        let cols: Vec<Vec<f64>> = (0..nrhs)
            .map(|r| standard_normals(&mut StreamKey::new(r as u64, Purpose::Test).rng(), 40))
            .collect();
        let mut block = vec![0.0; 40 * nrhs];
        for i in 0..40 {
            for r in 0..nrhs {
                block[i * nrhs + r] = cols[r][i];
            }
        }
        f.solve_many_in_place(&mut block, nrhs);
        for (r, col) in cols.iter().enumerate() {
            let x = f.solve(col);
            for i in 0..40 {
                assert!((block[i * nrhs + r] - x[i]).abs() <= 1e-13 * x[i].abs().max(1.0));
            }
        }
    }
    use crate::rng::{standard_normals, Purpose, StreamKey};

    fn random_spd_band(n: usize, w: usize, seed: u64) -> SymBand {
        let mut rng = StreamKey::new(seed, Purpose::Test).rng();
        let vals = standard_normals(&mut rng, n * (w + 1));
        let mut a = SymBand::zeros(n, w);
        for r in 0..n {
            for c in r.saturating_sub(w)..r {
                a.set(r, c, vals[r * (w + 1) + r - c]);
            }
        }
        for r in 0..n {
            let row_sum: f64 = (0..n).filter(|&c| c != r).map(|c| a.get(r, c).abs()).sum();
            a.set(r, r, row_sum + 1.0);
        }
        a
    }

    #[test]
    fn band_solve_matches_dense_lu() {
        let a = random_spd_band(40, 5, 3);
        let b: Vec<f64> = (0..40).map(|k| (k as f64 * 0.37).sin()).collect();
        let x = a.cholesky().unwrap().solve(&b);
        let lu = a.to_dense().lu();
        let x_ref = lu.solve(&nalgebra::DVector::from_vec(b.clone())).unwrap();
        for (p, q) in x.iter().zip(x_ref.iter()) {
            assert!((p - q).abs() < 1e-12);
        }
        let r: f64 = a
            .mul_vec(&x)
            .iter()
            .zip(&b)
            .map(|(y, z)| (y - z).abs())
            .fold(0.0, f64::max);
        assert!(r < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = SymBand::zeros(2, 1);
        a.set(0, 0, 1.0);
        a.set(1, 1, 1.0);
        a.set(1, 0, 2.0);
        assert!(matches!(a.cholesky(), Err(Error::Conditioning { .. })));
    }
}
