//! Experiment harness: problem assembly from a config, replicated runs, and
//! the `run`, `sweep`, `compare` and `check` commands.

pub mod check;
pub mod config;
pub mod output;
pub mod svg;

use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::{CovarianceOperator, MaternParams};
use crate::darcy::{DarcyBoundary, DarcyModel, ObservationOperator};
use crate::diagnostics::{replicate_expectation, MetricsRecord, ReplicateStats, Summary};
use crate::error::{Error, Result};
use crate::grid::{Grid2D, GridField};
use crate::model::ForwardModel;
use crate::observation::ObservationStream;
use crate::solver::{self, Data, RunResult, SolverConfig, Termination, Truth, Variant};
use crate::truth::{ground_truth, TruthKind};

pub use config::{ConfigIssue, ExperimentConfig, NoiseConfig, ProblemConfig};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "IRGN_WORKERS";

/// A fully assembled Darcy inverse problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: ProblemConfig,
    pub grid: Grid2D,
    pub cov: CovarianceOperator,
    pub model: DarcyModel,
    /// Ground truth in parameter space.
    pub truth_field: GridField,
    pub truth: Truth,
    pub u_init: DVector<f64>,
}

impl Problem {
    pub fn build(config: &ProblemConfig, matern: &MaternParams) -> Result<Self> {
        let grid = Grid2D::square(config.grid_n, config.domain_size)?;
        let cov = CovarianceOperator::matern(&grid, *matern)?;
        let per_axis = config
            .obs_per_axis()
            .ok_or_else(|| Error::Config(format!("obs_count {} is not a perfect square", config.obs_count)))?;
        let obs = ObservationOperator::lattice(grid, per_axis)?;
        let model = DarcyModel::new(grid, DarcyBoundary::default(), config.parameterization, obs)?;
        let raw = ground_truth(
            config.truth_kind,
            &grid,
            Some(&cov),
            config.truth_seed,
            (config.kappa_low, config.kappa_high),
        )?;
        // Level-set values are permeabilities; the smooth truth is already a
        // parameter field.
        let truth_field = match config.truth_kind {
            TruthKind::Smooth => raw,
            TruthKind::Levelset => GridField::new(
                grid,
                raw.values()
                    .iter()
                    .map(|&k| config.parameterization.inverse(k))
                    .collect(),
            )?,
        };
        let u = DVector::from_column_slice(truth_field.values());
        let output = model.evaluate(&u)?;
        Ok(Self {
            config: config.clone(),
            grid,
            cov,
            model,
            truth_field,
            truth: Truth { u, output },
            u_init: DVector::from_element(grid.len(), config.initial_value()),
        })
    }

    /// Data for replicate `run`: a fresh stream for dynamic variants, else the
    /// first draw of a stream with standard deviation `delta`.
    pub fn data(&self, solver: &SolverConfig, noise: &NoiseConfig, run: u64) -> Result<Data> {
        let out = self.truth.output.as_slice().to_vec();
        if solver.variant.is_dynamic() {
            Ok(Data::Stream(ObservationStream::new(
                out,
                noise.sigma_stream,
                solver.seed,
                run,
            )?))
        } else {
            let mut s = ObservationStream::new(out, noise.delta, solver.seed, run)?;
            Ok(Data::Fixed(DVector::from_vec(s.draw().0)))
        }
    }

    /// One solve; `solver.run` selects the replicate streams.
    pub fn solve(&self, solver: &SolverConfig, noise: &NoiseConfig) -> Result<RunResult> {
        let data = self.data(solver, noise, solver.run)?;
        solver::run(
            solver,
            &self.model,
            &self.cov,
            data,
            self.u_init.clone(),
            Some(&self.truth),
        )
    }

    pub fn field(&self, u: &DVector<f64>) -> Result<GridField> {
        GridField::new(self.grid, u.as_slice().to_vec())
    }
}

/// Worker count: `IRGN_WORKERS`, then the config, then the machine.
pub fn resolve_workers(configured: Option<usize>) -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .or(configured)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs replicates `0..count` (offset by `solver.run`) concurrently; results
/// come back in replicate order.
pub fn run_replicates(
    problem: &Problem,
    solver: &SolverConfig,
    noise: &NoiseConfig,
    count: usize,
    workers: usize,
) -> Result<Vec<RunResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..count as u64)
            .into_par_iter()
            .map(|r| {
                let mut cfg = solver.clone();
                cfg.run = solver.run + r;
                problem.solve(&cfg, noise)
            })
            .collect()
    })
}

/// What a command produced, for exit-code decisions and console output.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub lines: Vec<String>,
    pub diverged: bool,
}

fn final_record(r: &RunResult) -> Option<&MetricsRecord> {
    r.state.history.last()
}

fn final_rel_err(r: &RunResult) -> f64 {
    final_record(r).and_then(|m| m.rel_err).unwrap_or(f64::NAN)
}

fn describe(t: Termination) -> &'static str {
    match t {
        Termination::MaxIters => "max_iters",
        Termination::Converged => "converged",
        Termination::Diverged => "diverged",
    }
}

#[derive(Debug, Clone, Serialize)]
struct SummaryRow {
    replicate: u64,
    iterations: usize,
    termination: &'static str,
    final_rel_err: Option<f64>,
    final_residual_t: Option<f64>,
    final_param_err_d: Option<f64>,
    wall_ms: f64,
}

/// Executes the configured experiment and writes its outputs to `out`.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<Report> {
    std::fs::create_dir_all(out)?;
    let problem = Problem::build(&cfg.problem, &cfg.matern)?;
    let workers = resolve_workers(cfg.workers);
    let results = run_replicates(&problem, &cfg.solver, &cfg.noise, cfg.replicates, workers)?;
    let timed = cfg.output.record_wall_time;
    std::fs::write(out.join("config.toml"), cfg.to_toml_string())?;

    let first = &results[0];
    output::write_trace(&out.join("trace.csv"), &first.state.history, timed)?;
    if cfg.solver.variant.is_stochastic() {
        output::write_sketches(&out.join("sketches.csv"), &first.plans)?;
    }
    let rows: Vec<SummaryRow> = results
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let last = final_record(r);
            SummaryRow {
                replicate: cfg.solver.run + k as u64,
                iterations: r.state.iter,
                termination: describe(r.termination),
                final_rel_err: last.and_then(|m| m.rel_err),
                final_residual_t: last.and_then(|m| m.residual_t),
                final_param_err_d: last.and_then(|m| m.param_err_d),
                wall_ms: if timed { last.map_or(0.0, |m| m.wall_ms) } else { 0.0 },
            }
        })
        .collect();
    output::write_rows(&out.join("summary.csv"), &rows)?;
    let histories: Vec<Vec<MetricsRecord>> = results.iter().map(|r| r.state.history.clone()).collect();
    let stats = replicate_expectation(&histories);
    if results.len() > 1 {
        output::write_replicate_stats(&out.join("trace_mean.csv"), &stats)?;
    }
    // A diverged iterate may be non-finite; its field is then skipped.
    let recon = problem.field(&first.state.u).ok();
    output::write_field(&out.join("truth.csv"), &problem.truth_field)?;
    if let Some(recon) = &recon {
        output::write_field(&out.join("reconstruction.csv"), recon)?;
    }
    if cfg.output.emit_svg {
        std::fs::write(out.join("truth.svg"), svg::raster(&problem.truth_field, "truth"))?;
        if let Some(recon) = &recon {
            std::fs::write(out.join("reconstruction.svg"), svg::raster(recon, "reconstruction"))?;
        }
        let series = vec![svg::Series::from_stats(cfg.solver.variant.name(), &stats)];
        std::fs::write(
            out.join("convergence.svg"),
            svg::line_plot(&series, "relative error", "iteration", "rel_err"),
        )?;
    }

    let mut report = Report::default();
    let errs: Vec<f64> = results.iter().map(final_rel_err).collect();
    let s = Summary::of(&errs);
    report.lines.push(format!(
        "{} on {} truth: {} replicate(s), final rel_err mean {:.4} (95% CI {:.4}..{:.4})",
        cfg.solver.variant.name(),
        cfg.problem.truth_kind.label(),
        results.len(),
        s.mean,
        s.lo,
        s.hi
    ));
    for (k, r) in results.iter().enumerate() {
        if r.termination == Termination::Diverged {
            report.diverged = true;
            report.lines.push(format!(
                "replicate {k} diverged after {} iterations{}",
                r.state.iter,
                r.failure.as_deref().map(|f| format!(": {f}")).unwrap_or_default()
            ));
        }
    }
    Ok(report)
}

/// One `(truth, batch)` point of the mini-batch sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub truth: TruthKind,
    pub batch: usize,
    pub final_rel_err: Summary,
    pub iterations: Summary,
    pub wall_ms: f64,
    pub results: Vec<RunResult>,
}

#[derive(Debug, Clone, Serialize)]
struct TableRow {
    truth: &'static str,
    batch: usize,
    final_rel_err: f64,
    iterations: f64,
    wall_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SweepReplicateRow {
    truth: &'static str,
    batch: usize,
    replicate: u64,
    final_rel_err: f64,
    iterations: usize,
    termination: &'static str,
    wall_ms: f64,
}

/// Solver settings for one sweep point: the config's stochastic variant (or
/// SIRGNM) with the given batch and the sweep's stopping threshold.
pub fn sweep_solver(cfg: &ExperimentConfig, batch: usize) -> SolverConfig {
    let mut s = cfg.solver.clone();
    if !s.variant.is_stochastic() {
        s.variant = Variant::Sirgnm;
    }
    s.sketch_batch = Some(batch);
    s.stop_rel_err = Some(cfg.sweep.stop_rel_err);
    s
}

/// Runs the sweep without writing files.
pub fn sweep_points(cfg: &ExperimentConfig, batches: &[usize]) -> Result<Vec<SweepPoint>> {
    if batches.is_empty() {
        return Err(Error::Config("empty batch list".into()));
    }
    let workers = resolve_workers(cfg.workers);
    let mut points = Vec::new();
    for &kind in &cfg.sweep.truths {
        let pc = cfg.problem_for(kind);
        if let Some(&b) = batches.iter().find(|&&b| b == 0 || b > pc.obs_count) {
            return Err(Error::Config(format!(
                "batch {b} outside [1, {}] for the {} truth",
                pc.obs_count,
                kind.label()
            )));
        }
        let problem = Problem::build(&pc, &cfg.matern)?;
        for &batch in batches {
            let solver = sweep_solver(cfg, batch);
            let results = run_replicates(&problem, &solver, &cfg.noise, cfg.replicates, workers)?;
            let errs: Vec<f64> = results.iter().map(final_rel_err).collect();
            let iters: Vec<f64> = results.iter().map(|r| r.state.iter as f64).collect();
            let wall = results
                .iter()
                .map(|r| final_record(r).map_or(0.0, |m| m.wall_ms))
                .sum::<f64>()
                / results.len() as f64;
            points.push(SweepPoint {
                truth: kind,
                batch,
                final_rel_err: Summary::of(&errs),
                iterations: Summary::of(&iters),
                wall_ms: wall,
                results,
            });
        }
    }
    Ok(points)
}

/// Mini-batch sweep; writes `table1.csv` and per-replicate details.
pub fn cmd_sweep(cfg: &ExperimentConfig, batches: &[usize], out: &Path) -> Result<(Report, Vec<SweepPoint>)> {
    std::fs::create_dir_all(out)?;
    let points = sweep_points(cfg, batches)?;
    let timed = cfg.output.record_wall_time;
    let table: Vec<TableRow> = points
        .iter()
        .map(|p| TableRow {
            truth: p.truth.label(),
            batch: p.batch,
            final_rel_err: p.final_rel_err.mean,
            iterations: p.iterations.mean,
            wall_ms: if timed { p.wall_ms } else { 0.0 },
        })
        .collect();
    output::write_rows(&out.join("table1.csv"), &table)?;
    let mut reps = Vec::new();
    for p in &points {
        for (k, r) in p.results.iter().enumerate() {
            reps.push(SweepReplicateRow {
                truth: p.truth.label(),
                batch: p.batch,
                replicate: cfg.solver.run + k as u64,
                final_rel_err: final_rel_err(r),
                iterations: r.state.iter,
                termination: describe(r.termination),
                wall_ms: if timed {
                    final_record(r).map_or(0.0, |m| m.wall_ms)
                } else {
                    0.0
                },
            });
        }
    }
    output::write_rows(&out.join("sweep_replicates.csv"), &reps)?;
    let mut report = Report::default();
    report.lines.push(format!(
        "{:<14} {:>6} {:>10} {:>10}",
        "truth", "batch", "rel_err", "iters"
    ));
    for p in &points {
        report.lines.push(format!(
            "{:<14} {:>6} {:>10.4} {:>10.1}",
            p.truth.label(),
            p.batch,
            p.final_rel_err.mean,
            p.iterations.mean
        ));
        report.diverged |= p.results.iter().any(|r| r.termination == Termination::Diverged);
    }
    if cfg.output.emit_svg {
        let mut series = Vec::new();
        for &kind in &cfg.sweep.truths {
            let pts: Vec<(f64, f64)> = points
                .iter()
                .filter(|p| p.truth == kind)
                .map(|p| (p.batch as f64, p.final_rel_err.mean))
                .collect();
            series.push(svg::Series::new(kind.label(), pts));
        }
        std::fs::write(
            out.join("sweep.svg"),
            svg::line_plot(&series, "mini-batch sweep", "batch", "final rel_err"),
        )?;
    }
    Ok((report, points))
}

/// Mean convergence of one variant in a comparison.
#[derive(Debug, Clone)]
pub struct VariantCurve {
    pub variant: Variant,
    pub stats: Vec<ReplicateStats>,
    pub final_rel_err: Summary,
    pub diverged: usize,
}

#[derive(Debug, Clone, Serialize)]
struct CompareRow {
    iter: usize,
    variant: &'static str,
    count: usize,
    mean_rel_err: Option<f64>,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
}

/// Solver settings for one variant in a comparison.
pub fn variant_solver(cfg: &ExperimentConfig, variant: Variant) -> SolverConfig {
    let mut s = cfg.solver.clone();
    s.variant = variant;
    s.sketch_batch = if variant.is_stochastic() {
        Some(cfg.solver.sketch_batch.unwrap_or(32).min(cfg.problem.obs_count))
    } else {
        None
    };
    s
}

/// Runs the given variants on one problem with shared seeds.
pub fn compare_variants(cfg: &ExperimentConfig, variants: &[Variant]) -> Result<Vec<VariantCurve>> {
    let problem = Problem::build(&cfg.problem, &cfg.matern)?;
    let workers = resolve_workers(cfg.workers);
    variants
        .iter()
        .map(|&v| {
            let results = run_replicates(&problem, &variant_solver(cfg, v), &cfg.noise, cfg.replicates, workers)?;
            let histories: Vec<Vec<MetricsRecord>> = results.iter().map(|r| r.state.history.clone()).collect();
            let errs: Vec<f64> = results.iter().map(final_rel_err).collect();
            Ok(VariantCurve {
                variant: v,
                stats: replicate_expectation(&histories),
                final_rel_err: Summary::of(&errs),
                diverged: results
                    .iter()
                    .filter(|r| r.termination == Termination::Diverged)
                    .count(),
            })
        })
        .collect()
}

/// All four variants; writes `compare.csv` and `compare.svg`.
pub fn cmd_compare(cfg: &ExperimentConfig, out: &Path) -> Result<(Report, Vec<VariantCurve>)> {
    std::fs::create_dir_all(out)?;
    let curves = compare_variants(cfg, &Variant::ALL)?;
    let mut rows = Vec::new();
    for c in &curves {
        for s in &c.stats {
            rows.push(CompareRow {
                iter: s.iter,
                variant: c.variant.name(),
                count: s.count,
                mean_rel_err: s.rel_err.map(|e| e.mean),
                ci_lo: s.rel_err.map(|e| e.lo),
                ci_hi: s.rel_err.map(|e| e.hi),
            });
        }
    }
    output::write_rows(&out.join("compare.csv"), &rows)?;
    if cfg.output.emit_svg {
        let series: Vec<svg::Series> = curves
            .iter()
            .map(|c| svg::Series::from_stats(c.variant.name(), &c.stats))
            .collect();
        std::fs::write(
            out.join("compare.svg"),
            svg::line_plot(&series, "variant comparison", "iteration", "mean rel_err"),
        )?;
    }
    let mut report = Report::default();
    for c in &curves {
        report.lines.push(format!(
            "{:<8} final rel_err {:.4} (95% CI {:.4}..{:.4}){}",
            c.variant.name(),
            c.final_rel_err.mean,
            c.final_rel_err.lo,
            c.final_rel_err.hi,
            if c.diverged > 0 {
                format!(", {} diverged", c.diverged)
            } else {
                String::new()
            }
        ));
        report.diverged |= c.diverged > 0;
    }
    Ok((report, curves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::StepSchedule;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.problem.grid_n = 9;
        c.problem.obs_count = 16;
        c.solver.max_iters = 5;
        c.solver.sketch_batch = Some(8);
        c.replicates = 2;
        c.workers = Some(1);
        c.output.emit_svg = false;
        c
    }

    #[test]
    fn fixed_data_is_first_stream_draw() {
        let c = small();
        let p = Problem::build(&c.problem, &c.matern).unwrap();
        let Data::Fixed(y) = p.data(&c.solver, &c.noise, 0).unwrap() else {
            panic!("expected fixed data")
        };
        let mut dynamic = c.solver.clone();
        dynamic.variant = Variant::Sdirgnm;
        let Data::Stream(mut s) = p.data(&dynamic, &c.noise, 0).unwrap() else {
            panic!("expected a stream")
        };
        assert_eq!(y.as_slice(), s.draw().0.as_slice());
    }

    #[test]
    fn replicates_are_ordered_and_distinct() {
        let c = small();
        let p = Problem::build(&c.problem, &c.matern).unwrap();
        let a = run_replicates(&p, &c.solver, &c.noise, 3, 2).unwrap();
        let b = run_replicates(&p, &c.solver, &c.noise, 3, 1).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.state.u, y.state.u);
        }
        assert_ne!(a[0].state.u, a[1].state.u);
    }

    #[test]
    fn full_batch_sweep_point_matches_irgnm() {
        let mut c = small();
        c.sweep.truths = vec![TruthKind::Levelset];
        c.sweep.stop_rel_err = 1e-9;
        c.replicates = 1;
        let pts = sweep_points(&c, &[16]).unwrap();
        let p = Problem::build(&c.problem, &c.matern).unwrap();
        let mut det = c.solver.clone();
        det.variant = Variant::Irgnm;
        det.sketch_batch = None;
        let r = p.solve(&det, &c.noise).unwrap();
        assert_eq!(pts[0].results[0].state.u, r.state.u);
    }

    #[test]
    fn sweep_rejects_oversized_batch() {
        let c = small();
        assert!(matches!(sweep_points(&c, &[32]), Err(Error::Config(_))));
    }

    #[test]
    fn exp_levelset_truth_is_log_permeability() {
        let mut c = small();
        c.problem.parameterization = crate::darcy::Parameterization::Exp;
        c.solver.schedule = StepSchedule::Constant { alpha0: 1.0 };
        let p = Problem::build(&c.problem, &c.matern).unwrap();
        assert!(p
            .truth_field
            .values()
            .iter()
            .all(|&v| v == 0.0 || (v - 10f64.ln()).abs() < 1e-15));
    }
}
