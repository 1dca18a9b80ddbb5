//! All four solver variants on the same problem and seeds.

use irgn::experiment::{compare_variants, ExperimentConfig};
use irgn::solver::Variant;

fn main() -> irgn::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.replicates = 3;
    cfg.solver.max_iters = 200;
    for c in compare_variants(&cfg, &Variant::ALL)? {
        println!(
            "{:<8} final rel_err {:.4} (95% CI {:.4}..{:.4})",
            c.variant.name(),
            c.final_rel_err.mean,
            c.final_rel_err.lo,
            c.final_rel_err.hi
        );
    }
    Ok(())
}
