//! Matérn covariance on grid nodes: kernel, dense operator, factorization and
//! Gaussian-random-field sampling.

mod bessel;

pub use bessel::{bessel_k, gamma};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::grid::{Grid2D, GridField};
use crate::rng::{standard_normals, Purpose, StreamKey};

/// Upper bound on entries of any dense matrix the library allocates.
pub const MAX_DENSE_ENTRIES: usize = 36_000_000;

/// Matérn hyperparameters: smoothness `nu`, length-scale `ell`, scale `c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaternParams {
    pub nu: f64,
    pub ell: f64,
    #[serde(default = "default_c0")]
    pub c0: f64,
}

fn default_c0() -> f64 {
    1.0
}

impl Default for MaternParams {
    fn default() -> Self {
        Self {
            nu: 2.4,
            ell: 15.0,
            c0: 1.0,
        }
    }
}

impl MaternParams {
    pub fn new(nu: f64, ell: f64, c0: f64) -> Result<Self> {
        let p = Self { nu, ell, c0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.nu) && ok(self.ell) && ok(self.c0) {
            Ok(())
        } else {
            Err(validation("Matérn nu, ell and c0 must be positive and finite"))
        }
    }

    /// `c0 * 2^(1-nu) / Gamma(nu) * (r/ell)^nu * K_nu(r/ell)`, equal to `c0` at `r = 0`.
    pub fn kernel(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return self.c0;
        }
        let s = r / self.ell;
        match bessel_k(self.nu, s) {
            Ok(k) => {
                let log_pre = (1.0 - self.nu) * std::f64::consts::LN_2 - gamma(self.nu).ln();
                let v = self.c0 * (log_pre + self.nu * s.ln()).exp() * k;
                // Rounding can push the value a hair past the r = 0 limit.
                v.min(self.c0)
            }
            // K_nu overflows only as s -> 0, where the kernel tends to c0.
            Err(_) => self.c0,
        }
    }
}

/// `(r, c(r))` pairs for plotting the kernel.
pub fn kernel_table(params: &MaternParams, radii: &[f64]) -> Vec<(f64, f64)> {
    radii.iter().map(|&r| (r, params.kernel(r))).collect()
}

/// Dense symmetric positive-definite covariance with a Cholesky factor of
/// `C + jitter * I`.
#[derive(Debug, Clone)]
pub struct CovarianceOperator {
    params: Option<MaternParams>,
    grid: Option<Grid2D>,
    dense: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl CovarianceOperator {
    /// Collocates the Matérn kernel at every pair of grid nodes.
    pub fn matern(grid: &Grid2D, params: MaternParams) -> Result<Self> {
        params.validate()?;
        let n = grid.len();
        guard_dense(n * n)?;
        // Node distances depend only on the index offsets.
        let (hx, hy) = (grid.hx(), grid.hy());
        let mut table = vec![0.0; grid.nx * grid.ny];
        for dj in 0..grid.ny {
            for di in 0..grid.nx {
                let r = ((di as f64 * hx).powi(2) + (dj as f64 * hy).powi(2)).sqrt();
                table[dj * grid.nx + di] = params.kernel(r);
            }
        }
        let dense = DMatrix::from_fn(n, n, |a, b| {
            let (ia, ja) = grid.ij(a);
            let (ib, jb) = grid.ij(b);
            table[ja.abs_diff(jb) * grid.nx + ia.abs_diff(ib)]
        });
        let mut op = Self::from_dense(dense)?;
        op.params = Some(params);
        op.grid = Some(*grid);
        Ok(op)
    }

    /// Wraps an explicit symmetric matrix. It is factored with the smallest
    /// jitter from the ladder `0, 1e-12, ..., 1e-8` (times the mean diagonal)
    /// that succeeds.
    pub fn from_dense(dense: DMatrix<f64>) -> Result<Self> {
        if !dense.is_square() || dense.nrows() == 0 {
            return Err(validation("covariance matrix must be square and non-empty"));
        }
        let n = dense.nrows();
        for a in 0..n {
            for b in 0..a {
                if dense[(a, b)] != dense[(b, a)] {
                    return Err(validation(format!("covariance not symmetric at ({a}, {b})")));
                }
            }
        }
        let mean_diag = dense.diagonal().mean();
        let ladder = std::iter::once(0.0).chain((0..=4).map(|k| 1e-12 * 10f64.powi(k) * mean_diag));
        for jitter in ladder {
            let mut shifted = dense.clone();
            for a in 0..n {
                shifted[(a, a)] += jitter;
            }
            if let Some(factor) = Cholesky::new(shifted) {
                if factor.l_dirty().diagonal().iter().all(|d| *d > 0.0 && d.is_finite()) {
                    return Ok(Self {
                        params: None,
                        grid: None,
                        dense,
                        factor,
                        jitter,
                    });
                }
            }
        }
        Err(Error::Conditioning {
            detail: format!(
                "Cholesky failed for C + jitter*I up to jitter = {:e} (n = {n}, mean diagonal {mean_diag:e})",
                1e-8 * mean_diag
            ),
        })
    }

    pub fn dim(&self) -> usize {
        self.dense.nrows()
    }

    pub fn params(&self) -> Option<&MaternParams> {
        self.params.as_ref()
    }

    pub fn grid(&self) -> Option<&Grid2D> {
        self.grid.as_ref()
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.dense
    }

    /// Jitter added to the diagonal before factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular `L` with `L L^T = C + jitter * I`.
    pub fn sqrt_factor(&self) -> DMatrix<f64> {
        self.factor.l()
    }

    /// `C v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.dense * v
    }

    /// `C M` for a block of column vectors.
    pub fn apply_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.dense * m
    }

    /// `(C + jitter * I)^{-1} v`.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(v)
    }

    pub fn solve_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor.solve(m)
    }

    /// `<v, C^{-1} v>`.
    pub fn weighted_norm_sq(&self, v: &DVector<f64>) -> f64 {
        v.dot(&self.solve(v))
    }

    /// Draws `L z` with `z` standard normal.
    pub fn sample(&self, key: StreamKey) -> DVector<f64> {
        let z = DVector::from_vec(standard_normals(&mut key.rng(), self.dim()));
        self.factor.l_dirty().lower_triangle() * z
    }

    /// Gaussian random field on the operator's grid.
    pub fn sample_grf(&self, seed: u64) -> Result<GridField> {
        let grid = self.grid.ok_or_else(|| validation("covariance has no grid attached"))?;
        let v = self.sample(StreamKey::new(seed, Purpose::RandomField));
        GridField::new(grid, v.as_slice().to_vec())
    }
}

pub(crate) fn guard_dense(entries: usize) -> Result<()> {
    if entries > MAX_DENSE_ENTRIES {
        Err(Error::Capacity {
            requested: entries,
            limit: MAX_DENSE_ENTRIES,
        })
    } else {
        Ok(())
    }
}
