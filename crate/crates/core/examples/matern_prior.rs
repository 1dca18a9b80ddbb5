//! The Matérn prior: kernel values, a covariance on a small grid and a few
//! random-field draws.

use irgn::covariance::{bessel_k, CovarianceOperator, MaternParams};
use irgn::grid::Grid2D;

fn main() -> irgn::Result<()> {
    let p = MaternParams::default();
    println!("nu = {}, ell = {}, c0 = {}", p.nu, p.ell, p.c0);
    for r in [0.0, 1.0, 3.0, 6.0, 15.0, 30.0, 60.0] {
        println!("c({r:>4}) = {:.6}", p.kernel(r));
    }
    println!("K_2.4(1) = {:.15}", bessel_k(2.4, 1.0)?);

    let grid = Grid2D::square(17, 6.0)?;
    let cov = CovarianceOperator::matern(&grid, p)?;
    println!("covariance {}x{}, jitter {:.1e}", cov.dim(), cov.dim(), cov.jitter());
    for seed in 0..3 {
        let z = cov.sample_grf(seed)?;
        let v = z.values();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("draw {seed}: range [{lo:.3}, {hi:.3}]");
    }
    Ok(())
}
