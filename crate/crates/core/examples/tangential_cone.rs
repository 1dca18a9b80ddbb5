//! Empirical tangential cone constants of the Darcy map in balls of shrinking
//! radius, first for data far from the ball and then for data at its centre.
//! In the second case the eta needed with C = 1 falls about tenfold per decade
//! of radius, the signature of a second-order linearization error.

use irgn::darcy::{DarcyModel, Parameterization};
use irgn::diagnostics::probe_tangential_cone;
use irgn::grid::Grid2D;
use irgn::model::ForwardModel;
use irgn::rng::{Purpose, StreamKey};
use irgn::truth::smooth_truth;
use nalgebra::DVector;

fn main() -> irgn::Result<()> {
    let grid = Grid2D::square(9, 6.0)?;
    let model = DarcyModel::standard(grid, Parameterization::IdentityFloor)?;
    let center = DVector::from_element(grid.len(), 1.0);
    let shift = smooth_truth(&grid)?;
    let far = model.evaluate(&(&center + DVector::from_column_slice(shift.values())))?;
    let near = model.evaluate(&center)?;
    for (label, y) in [("far data", &far), ("data at centre", &near)] {
        println!("{label}");
        for radius in [1e-3, 1e-2, 1e-1] {
            let r = probe_tangential_cone(&model, &center, y, radius, 50, StreamKey::new(3, Purpose::Probe))?;
            println!(
                "  radius {radius:.0e}: C = {:.4}, eta = {:.0e}, eta with C = 1: {:.2e}",
                r.c_tc, r.eta, r.eta_at_unit_c
            );
        }
    }
    Ok(())
}
