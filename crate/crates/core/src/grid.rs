//! Uniform 2D grids and scalar fields sampled on their nodes.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

/// A uniform node grid over the rectangle `[0, lx] x [0, ly]`.
///
/// Nodes are numbered row-major: `index = j * nx + i`, where `i` runs along
/// the first axis and `j` along the second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        let g = Self { nx, ny, lx, ly };
        g.validate()?;
        Ok(g)
    }

    /// Square `n x n` grid over `[0, size]^2`.
    pub fn square(n: usize, size: f64) -> Result<Self> {
        Self::new(n, n, size, size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 || self.ny < 3 {
            return Err(validation(format!(
                "grid needs at least 3 nodes per axis, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.lx > 0.0 && self.ly > 0.0 && self.lx.is_finite() && self.ly.is_finite()) {
            return Err(validation("grid extents must be positive and finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hx(&self) -> f64 {
        self.lx / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    /// Physical coordinate of node `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> Result<[f64; 2]> {
        if i >= self.nx || j >= self.ny {
            return Err(Error::Index {
                i,
                j,
                nx: self.nx,
                ny: self.ny,
            });
        }
        Ok(self.point_unchecked(i, j))
    }

    #[inline]
    pub(crate) fn point_unchecked(&self, i: usize, j: usize) -> [f64; 2] {
        [i as f64 * self.hx(), j as f64 * self.hy()]
    }

    /// Coordinates of every node in index order.
    pub fn points(&self) -> Vec<[f64; 2]> {
        (0..self.len())
            .map(|k| {
                let (i, j) = self.ij(k);
                self.point_unchecked(i, j)
            })
            .collect()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= 0.0 && p[0] <= self.lx && p[1] >= 0.0 && p[1] <= self.ly
    }
}

/// A scalar field with one finite value per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(validation(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(validation(format!("non-finite field value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = grid.points().into_iter().map(|[x, y]| f(x, y)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Euclidean norm of the node values.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn standard_grid() -> Grid2D {
        Grid2D::square(7, 6.0).unwrap()
    }

    #[test]
    fn grid_points() {
        let g = standard_grid();
        assert_eq!(g.point(0, 0).unwrap(), [0.0, 0.0]);
        assert_eq!(g.point(6, 6).unwrap(), [6.0, 6.0]);
        assert_eq!(g.point(3, 1).unwrap(), [3.0, 1.0]);
    }

    #[test]
    fn out_of_range_point() {
        let g = standard_grid();
        assert!(matches!(g.point(7, 0), Err(Error::Index { .. })));
        assert!(matches!(g.point(0, 7), Err(Error::Index { .. })));
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid2D::square(2, 6.0).is_err());
        assert!(Grid2D::new(3, 3, 0.0, 1.0).is_err());
    }

    #[test]
    fn field_validation() {
        let g = standard_grid();
        assert!(GridField::new(g, vec![0.0; 48]).is_err());
        let mut v = vec![0.0; 49];
        v[5] = f64::NAN;
        assert!(GridField::new(g, v).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let g = standard_grid();
        let f = GridField::from_fn(g, |x, y| x * 0.25 - y / 3.0).unwrap();
        let text = toml::to_string(&f).unwrap();
        let back: GridField = toml::from_str(&text).unwrap();
        assert_eq!(f, back);
    }

    proptest! {
        #[test]
        fn index_round_trip(nx in 3usize..40, ny in 3usize..40, k in 0usize..1600) {
            let g = Grid2D::new(nx, ny, 6.0, 6.0).unwrap();
            let k = k % g.len();
            let (i, j) = g.ij(k);
            prop_assert_eq!(g.index(i, j), k);
            let p = g.point(i, j).unwrap();
            prop_assert_eq!((p[0] / g.hx()).round() as usize, i);
            prop_assert_eq!((p[1] / g.hy()).round() as usize, j);
        }
    }
}
