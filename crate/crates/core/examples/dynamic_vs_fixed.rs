//! SdIRGNM (fresh observation each step, averaged) against SIRGNM on one fixed
//! noisy data set, over a handful of replicates.

use irgn::diagnostics::Summary;
use irgn::experiment::{run_replicates, ExperimentConfig, Problem};
use irgn::solver::Variant;

fn main() -> irgn::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.solver.max_iters = 300;
    let problem = Problem::build(&cfg.problem, &cfg.matern)?;
    for variant in [Variant::Sirgnm, Variant::Sdirgnm] {
        let mut s = cfg.solver.clone();
        s.variant = variant;
        let runs = run_replicates(&problem, &s, &cfg.noise, 4, 1)?;
        let errs: Vec<f64> = runs
            .iter()
            .map(|r| r.state.history.last().and_then(|m| m.rel_err).unwrap_or(f64::NAN))
            .collect();
        let sum = Summary::of(&errs);
        println!(
            "{:<8} rel_err {:.4} (95% CI {:.4}..{:.4})",
            variant.name(),
            sum.mean,
            sum.lo,
            sum.hi
        );
    }
    Ok(())
}
