//! A reduced mini-batch sweep: final error and iteration count per batch size
//! on the discontinuous truth with 256 observations.

use irgn::experiment::{sweep_points, ExperimentConfig};
use irgn::truth::TruthKind;

fn main() -> irgn::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.replicates = 2;
    cfg.solver.max_iters = 300;
    cfg.sweep.truths = vec![TruthKind::Levelset];
    cfg.sweep.obs_count = Some(256);
    cfg.sweep.stop_rel_err = 0.2;
    println!("{:>6} {:>10} {:>8}", "batch", "rel_err", "iters");
    for p in sweep_points(&cfg, &[16, 32, 64, 128])? {
        println!(
            "{:>6} {:>10.4} {:>8.1}",
            p.batch, p.final_rel_err.mean, p.iterations.mean
        );
    }
    Ok(())
}
