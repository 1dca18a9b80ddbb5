//! One regularized Gauss-Newton update computed two ways: through the small
//! observation-space system and through the parameter-space normal equations.

use irgn::covariance::CovarianceOperator;
use irgn::rng::{standard_normals, Purpose, StreamKey};
use irgn::solver::{sketched_objective, step_primal, step_woodbury, StepInputs};
use nalgebra::{DMatrix, DVector};

fn randn(seed: u64, n: usize) -> DVector<f64> {
    DVector::from_vec(standard_normals(&mut StreamKey::new(seed, Purpose::Test).rng(), n))
}

fn main() -> irgn::Result<()> {
    let (n, m) = (200, 32);
    let a = DMatrix::from_vec(n, n, randn(1, n * n).as_slice().to_vec());
    let c = &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5;
    let cov = CovarianceOperator::from_dense((&c + c.transpose()) * 0.5)?;
    let inputs = StepInputs {
        u_n: randn(2, n),
        u_0: DVector::zeros(n),
        alpha: 0.1,
        z: randn(3, m),
        f: randn(4, m),
        jac: DMatrix::from_vec(m, n, randn(5, m * n).as_slice().to_vec()),
    };
    let w = step_woodbury(&inputs, &cov)?;
    let p = step_primal(&inputs, &cov)?;
    println!("N = {n}, m = {m}");
    println!("relative difference {:.2e}", (&w - &p).norm() / p.norm());
    println!("objective at update   {:.6}", sketched_objective(&inputs, &cov, &w));
    println!(
        "objective at u_n      {:.6}",
        sketched_objective(&inputs, &cov, &inputs.u_n)
    );
    Ok(())
}
