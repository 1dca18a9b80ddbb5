//! Loads a TOML experiment file and runs it, like `irgn run`.
//!
//!     cargo run --release --example run_config -- configs/quick.toml out/quick

use std::path::PathBuf;

use irgn::experiment::{cmd_run, ExperimentConfig};

fn main() -> irgn::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| "configs/quick.toml".into()));
    let cfg = ExperimentConfig::load(&config)?;
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| cfg.output.dir.clone());
    let report = cmd_run(&cfg, &out)?;
    for l in report.lines {
        println!("{l}");
    }
    Ok(())
}
