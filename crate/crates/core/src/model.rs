//! The forward-operator contract shared by every solver variant.

use nalgebra::{DMatrix, DVector};

use crate::covariance::guard_dense;
use crate::error::Result;

/// A differentiable map `F: R^N -> R^m` from parameters to observations.
pub trait ForwardModel {
    type Linearization<'a>: Linearization
    where
        Self: 'a;

    fn param_dim(&self) -> usize;

    fn obs_dim(&self) -> usize;

    /// `F(u)`.
    fn evaluate(&self, u: &DVector<f64>) -> Result<DVector<f64>>;

    /// Evaluates `F` at `u` and keeps whatever is needed to apply `F'[u]`.
    fn linearize(&self, u: &DVector<f64>) -> Result<Self::Linearization<'_>>;
}

/// `F(u)` together with the Fréchet derivative `F'[u]` and its adjoint.
pub trait Linearization {
    /// `F(u)`.
    fn value(&self) -> &DVector<f64>;

    /// `F'[u] v`.
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;

    /// `F'[u]^* w`, adjoint with respect to Euclidean inner products.
    fn apply_adjoint(&self, w: &DVector<f64>) -> DVector<f64>;

    /// Selected rows of `F'[u]`, each computed by one adjoint application.
    fn jacobian_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        let m = self.value().len();
        let mut out: Option<DMatrix<f64>> = None;
        for (r, &k) in rows.iter().enumerate() {
            let mut e = DVector::zeros(m);
            e[k] = 1.0;
            let row = self.apply_adjoint(&e);
            let out = out.get_or_insert_with(|| DMatrix::zeros(rows.len(), row.len()));
            out.row_mut(r).copy_from(&row.transpose());
        }
        out.unwrap_or_else(|| DMatrix::zeros(0, 0))
    }

    /// The full `m x N` Jacobian, guarded against oversized allocations.
    fn dense_jacobian(&self, param_dim: usize) -> Result<DMatrix<f64>> {
        let m = self.value().len();
        guard_dense(m * param_dim)?;
        let rows: Vec<usize> = (0..m).collect();
        Ok(self.jacobian_rows(&rows))
    }
}
