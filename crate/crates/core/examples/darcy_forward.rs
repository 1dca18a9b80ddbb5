//! Solves the Darcy problem for a two-valued permeability, prints the observed
//! pressures and writes both fields as CSV.
//!
//!     cargo run --release --example darcy_forward -- out/forward

use std::path::PathBuf;

use irgn::covariance::{CovarianceOperator, MaternParams};
use irgn::darcy::{DarcyModel, Parameterization};
use irgn::experiment::output::write_field;
use irgn::grid::Grid2D;
use irgn::model::ForwardModel;
use irgn::truth::levelset_truth;
use nalgebra::DVector;

fn main() -> irgn::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/forward".into()));
    std::fs::create_dir_all(&out)?;

    let grid = Grid2D::square(33, 6.0)?;
    let cov = CovarianceOperator::matern(&grid, MaternParams::default())?;
    let kappa = levelset_truth(&cov, 17, 1.0, 10.0)?;
    let model = DarcyModel::standard(grid, Parameterization::IdentityFloor)?;

    let pressure = model.pressure(kappa.values())?;
    let y = model.evaluate(&DVector::from_column_slice(kappa.values()))?;
    println!("{} observations on an {}x{} grid", y.len(), grid.nx, grid.ny);
    for (k, row) in y.as_slice().chunks(8).enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:8.2}")).collect();
        println!("row {k}: {}", cells.join(" "));
    }
    write_field(&out.join("permeability.csv"), &kappa)?;
    write_field(&out.join("pressure.csv"), &pressure)?;
    println!("fields written to {}", out.display());
    Ok(())
}
