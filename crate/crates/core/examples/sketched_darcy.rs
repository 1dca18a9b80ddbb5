//! SIRGNM on the Darcy problem: each step uses 32 of the 64 observations.
//! Prints the error every 50 iterations and writes the trace and fields.
//!
//!     cargo run --release --example sketched_darcy -- 400

use std::path::Path;

use irgn::experiment::output::{write_field, write_trace};
use irgn::experiment::{ExperimentConfig, Problem};

fn main() -> irgn::Result<()> {
    let iters: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let mut cfg = ExperimentConfig::default();
    cfg.solver.max_iters = iters;
    let problem = Problem::build(&cfg.problem, &cfg.matern)?;
    let r = problem.solve(&cfg.solver, &cfg.noise)?;
    for m in r.state.history.iter().filter(|m| m.iter % 50 == 0 || m.iter == 1) {
        println!(
            "iter {:>5}  alpha {:.3e}  rel_err {:.4}",
            m.iter,
            m.alpha,
            m.rel_err.unwrap_or(f64::NAN)
        );
    }
    println!("{:?} after {} iterations", r.termination, r.state.iter);

    let out = Path::new("out/sketched_darcy");
    std::fs::create_dir_all(out)?;
    write_trace(&out.join("trace.csv"), &r.state.history, false)?;
    write_field(&out.join("truth.csv"), &problem.truth_field)?;
    write_field(&out.join("reconstruction.csv"), &problem.field(&r.state.u)?)?;
    Ok(())
}
