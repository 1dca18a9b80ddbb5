//! Ground-truth parameter fields for the Darcy experiments.

use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceOperator;
use crate::error::{validation, Result};
use crate::grid::{Grid2D, GridField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthKind {
    /// Two Gaussian bumps.
    Smooth,
    /// Two-valued field from thresholding a Gaussian random field at zero.
    Levelset,
}

impl TruthKind {
    pub fn label(self) -> &'static str {
        match self {
            TruthKind::Smooth => "smooth",
            TruthKind::Levelset => "discontinuous",
        }
    }
}

/// `exp(-100 |q - (0.3, 0.7)|^2) + 0.5 exp(-100 |q - (0.7, 0.35)|^2)` in
/// coordinates `q = (x / lx, y / ly)` normalized to the unit square.
pub fn smooth_value(grid: &Grid2D, x: f64, y: f64) -> f64 {
    let (xs, ys) = (x / grid.lx, y / grid.ly);
    let bump = |cx: f64, cy: f64| (-100.0 * ((xs - cx).powi(2) + (ys - cy).powi(2))).exp();
    bump(0.3, 0.7) + 0.5 * bump(0.7, 0.35)
}

pub fn smooth_truth(grid: &Grid2D) -> Result<GridField> {
    GridField::from_fn(*grid, |x, y| smooth_value(grid, x, y))
}

/// `high` where a GRF sample is non-negative, `low` elsewhere.
pub fn levelset_truth(cov: &CovarianceOperator, seed: u64, low: f64, high: f64) -> Result<GridField> {
    let z = cov.sample_grf(seed)?;
    let grid = *z.grid();
    GridField::new(
        grid,
        z.values().iter().map(|&v| if v < 0.0 { low } else { high }).collect(),
    )
}

/// Dispatches on `kind`; the level-set truth needs a covariance with a grid.
pub fn ground_truth(
    kind: TruthKind,
    grid: &Grid2D,
    cov: Option<&CovarianceOperator>,
    seed: u64,
    levels: (f64, f64),
) -> Result<GridField> {
    match kind {
        TruthKind::Smooth => smooth_truth(grid),
        TruthKind::Levelset => {
            let cov = cov.ok_or_else(|| validation("level-set truth needs a covariance"))?;
            if cov.grid() != Some(grid) {
                return Err(validation("covariance grid differs from the truth grid"));
            }
            levelset_truth(cov, seed, levels.0, levels.1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::MaternParams;

    #[test]
    fn smooth_bump_centres() {
        let g = Grid2D::square(33, 6.0).unwrap();
        let tail = (-100.0f64 * (0.16 + 0.1225)).exp();
        assert!((smooth_value(&g, 1.8, 4.2) - (1.0 + 0.5 * tail)).abs() < 1e-15);
        assert!((smooth_value(&g, 4.2, 2.1) - (0.5 + tail)).abs() < 1e-15);
        assert!((smooth_value(&g, 1.8, 4.2) - 1.0).abs() < 1e-4);
        assert!((smooth_value(&g, 4.2, 2.1) - 0.5).abs() < 1e-4);
    }

    #[test]
    fn levelset_is_reproducible_and_balanced() {
        let g = Grid2D::square(9, 6.0).unwrap();
        let cov = CovarianceOperator::matern(&g, MaternParams::default()).unwrap();
        let a = levelset_truth(&cov, 3, 1.0, 10.0).unwrap();
        assert_eq!(a, levelset_truth(&cov, 3, 1.0, 10.0).unwrap());
        assert!(a.values().iter().all(|v| *v == 1.0 || *v == 10.0));
        let mut frac = 0.0;
        let seeds = 50;
        for s in 0..seeds {
            let f = levelset_truth(&cov, s, 1.0, 10.0).unwrap();
            frac += f.values().iter().filter(|v| **v == 10.0).count() as f64 / g.len() as f64;
        }
        frac /= seeds as f64;
        assert!(frac > 0.3 && frac < 0.7, "high fraction {frac}");
    }

    #[test]
    fn levelset_requires_covariance() {
        let g = Grid2D::square(5, 6.0).unwrap();
        assert!(ground_truth(TruthKind::Levelset, &g, None, 0, (1.0, 10.0)).is_err());
        assert!(ground_truth(TruthKind::Smooth, &g, None, 0, (1.0, 10.0)).is_ok());
    }
}
