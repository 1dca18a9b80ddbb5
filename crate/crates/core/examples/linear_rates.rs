//! Noise-free IRGNM on an ill-conditioned linear operator. With a geometric
//! schedule the residual falls like alpha^2 and the squared error like alpha.

use irgn::covariance::CovarianceOperator;
use irgn::diagnostics::{fit_rate, LinearTestOperator};
use irgn::schedule::StepSchedule;
use irgn::solver::{run, Data, SolverConfig, Truth, Variant};
use nalgebra::{DMatrix, DVector};

fn main() -> irgn::Result<()> {
    let (op, u) = LinearTestOperator::rate_benchmark(81, 6.0, 8);
    println!("{}", op.description());
    let cov = CovarianceOperator::from_dense(DMatrix::identity(81, 81))?;
    let truth = Truth {
        output: op.apply(&u),
        u,
    };
    for gamma in [0.8, 0.9] {
        let cfg = SolverConfig::new(Variant::Irgnm, StepSchedule::Geometric { alpha0: 0.5, gamma }, 60);
        let r = run(
            &cfg,
            &op,
            &cov,
            Data::Fixed(truth.output.clone()),
            DVector::zeros(81),
            Some(&truth),
        )?;
        let fit = fit_rate(&r.state.history, 20)?;
        let last = r.state.history.last().expect("60 iterations");
        println!(
            "gamma {gamma}: t ~ alpha^{:.2}, d ~ alpha^{:.2}, final rel_err {:.2e}",
            fit.t_slope,
            fit.d_slope,
            last.rel_err.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
