//! Iteratively regularized Gauss-Newton solvers, with optional row sketching
//! and sequentially averaged data, for a Darcy-flow parameter estimation
//! problem.
//!
//! The library is best read through its examples:
//!
//! ```text
//! examples/
//! ├── darcy_forward.rs        # forward PDE solve, observed pressures
//! ├── matern_prior.rs         # kernel, covariance, random-field draws
//! ├── woodbury_step.rs        # one update, two equivalent formulas
//! ├── linear_rates.rs         # convergence rates on a linear operator
//! ├── sketched_darcy.rs       # SIRGNM on the Darcy problem
//! ├── observation_stream.rs   # running average of noisy observations
//! ├── dynamic_vs_fixed.rs     # SdIRGNM against SIRGNM
//! ├── sketch_probe.rs         # unbiasedness of the row sketch
//! ├── tangential_cone.rs      # nonlinearity constants of the forward map
//! ├── batch_sweep.rs          # final error against batch size
//! ├── compare_variants.rs     # all four variants, shared seeds
//! └── run_config.rs           # TOML experiment file, as `irgn run`
//! ```
//!
//! ```bash
//! cargo run --release --example sketched_darcy
//! ```
//!
//! Modules, bottom up: [`grid`], [`linalg`] and [`rng`] are plumbing;
//! [`darcy`] implements [`model::ForwardModel`]; [`covariance`] is the
//! Matérn prior; [`sketch`] and [`observation`] supply randomized rows and
//! data; [`solver`] runs the iteration; [`diagnostics`] measures it;
//! [`experiment`] drives configured runs for the `irgn` binary.

pub mod covariance;
pub mod darcy;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod observation;
pub mod rng;
pub mod schedule;
pub mod sketch;
pub mod solver;
pub mod truth;

pub use error::{Error, Result};
