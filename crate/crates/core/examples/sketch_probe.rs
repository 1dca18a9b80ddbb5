//! Is a random row sketch unbiased? Exact enumeration for small m, Monte
//! Carlo for m = 64, in both sketch modes.

use irgn::diagnostics::probe_unbiasedness;
use irgn::rng::{Purpose, StreamKey};
use irgn::sketch::SketchMode;

fn main() -> irgn::Result<()> {
    let g: Vec<f64> = (1..=6).map(f64::from).collect();
    for mode in [SketchMode::MaskScaled, SketchMode::Select] {
        let r = probe_unbiasedness(&g, 2, mode, 0, StreamKey::new(0, Purpose::Sketch))?;
        println!("{mode:?}, m = 6, b = 2, exact: E[Pg] = {:?}", r.mean);
    }
    let g: Vec<f64> = (0..64).map(|k| (k as f64 * 0.3).sin()).collect();
    let r = probe_unbiasedness(
        &g,
        32,
        SketchMode::MaskScaled,
        100_000,
        StreamKey::new(1, Purpose::Sketch),
    )?;
    println!(
        "MaskScaled, m = 64, b = 32, {} draws: max deviation {:.2e}",
        r.draws, r.max_deviation
    );
    Ok(())
}
