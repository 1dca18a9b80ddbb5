//! Experiment configuration files (TOML, strict keys).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::covariance::MaternParams;
use crate::darcy::Parameterization;
use crate::error::{Error, Result};
use crate::schedule::StepSchedule;
use crate::sketch::SketchMode;
use crate::solver::{SolverConfig, Variant};
use crate::truth::TruthKind;

fn default_grid_n() -> usize {
    33
}

fn default_domain() -> f64 {
    6.0
}

fn default_obs_count() -> usize {
    64
}

fn default_kappa_low() -> f64 {
    1.0
}

fn default_kappa_high() -> f64 {
    10.0
}

fn default_truth_seed() -> u64 {
    17
}

fn default_delta() -> f64 {
    0.1
}

fn default_replicates() -> usize {
    20
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

fn default_sweep_stop() -> f64 {
    0.1
}

fn default_sweep_truths() -> Vec<TruthKind> {
    vec![TruthKind::Levelset, TruthKind::Smooth]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_domain")]
    pub domain_size: f64,
    /// Observation count; must be a perfect square (uniform lattice).
    #[serde(default = "default_obs_count")]
    pub obs_count: usize,
    pub truth_kind: TruthKind,
    /// Seed of the random field behind the level-set truth.
    #[serde(default = "default_truth_seed")]
    pub truth_seed: u64,
    #[serde(default = "default_kappa_low")]
    pub kappa_low: f64,
    #[serde(default = "default_kappa_high")]
    pub kappa_high: f64,
    #[serde(default)]
    pub parameterization: Parameterization,
    /// Constant initial guess (and prior centre) in parameter space.
    /// Defaults to 0.1 for the smooth truth and 1 for the level-set truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_value: Option<f64>,
}

impl ProblemConfig {
    pub fn initial_value(&self) -> f64 {
        self.initial_value.unwrap_or(match self.truth_kind {
            TruthKind::Smooth => 0.1,
            TruthKind::Levelset => 1.0,
        })
    }

    pub fn obs_per_axis(&self) -> Option<usize> {
        let k = (self.obs_count as f64).sqrt().round() as usize;
        (k * k == self.obs_count && k > 0).then_some(k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation of the fixed data set.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Standard deviation of each sequential observation.
    #[serde(default = "default_delta")]
    pub sigma_stream: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            sigma_stream: default_delta(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_true")]
    pub emit_svg: bool,
    /// Write measured solver time into `wall_ms` columns. Off by default so
    /// that reruns produce identical files.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            emit_svg: true,
            record_wall_time: false,
        }
    }
}

/// Per-truth settings used when the sweep switches truth kinds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameterization: Option<Parameterization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_sweep_truths")]
    pub truths: Vec<TruthKind>,
    /// Observation count for the sweep, if different from the problem's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs_count: Option<usize>,
    #[serde(default = "default_sweep_stop")]
    pub stop_rel_err: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smooth: Option<TruthOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levelset: Option<TruthOverride>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            truths: default_sweep_truths(),
            obs_count: None,
            stop_rel_err: default_sweep_stop(),
            smooth: None,
            levelset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Concurrent runs; `IRGN_WORKERS` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub matern: MaternParams,
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    /// Desk-scale defaults: 33x33 grid, 64 observations, SIRGNM with batch 32.
    fn default() -> Self {
        let mut solver = SolverConfig::new(
            Variant::Sirgnm,
            StepSchedule::Power {
                alpha0: 0.5,
                exponent: 0.9,
            },
            2000,
        );
        solver.sketch_batch = Some(32);
        solver.sketch_mode = SketchMode::Select;
        Self {
            replicates: default_replicates(),
            workers: None,
            problem: ProblemConfig {
                grid_n: default_grid_n(),
                domain_size: default_domain(),
                obs_count: default_obs_count(),
                truth_kind: TruthKind::Levelset,
                truth_seed: default_truth_seed(),
                kappa_low: default_kappa_low(),
                kappa_high: default_kappa_high(),
                parameterization: Parameterization::IdentityFloor,
                initial_value: None,
            },
            noise: NoiseConfig::default(),
            matern: MaternParams::default(),
            solver,
            output: OutputConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// A rejected config value, with the 1-based line it was found on.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Line of `key = ...` inside `[section]` (or the section header itself when
/// `key` is empty).
pub fn locate(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header_line = None;
    for (k, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section && header_line.is_none() {
                header_line = Some(k + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some((lhs, _)) = line.split_once('=') {
                if lhs.trim() == key {
                    return Some(k + 1);
                }
            }
        }
    }
    header_line
}

impl ExperimentConfig {
    /// Parses and validates; failures carry a line number where possible.
    pub fn from_toml_str(src: &str) -> std::result::Result<Self, ConfigIssue> {
        let cfg: Self = toml::from_str(src).map_err(|e| ConfigIssue {
            line: e
                .span()
                .map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1),
            message: e.message().to_string(),
        })?;
        cfg.check().map_err(|(section, key, message)| ConfigIssue {
            line: locate(src, section, key).or_else(|| locate(src, section, "")),
            message: format!(
                "{}{}{key}: {message}",
                section,
                if section.is_empty() { "" } else { "." }
            ),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)?;
        Self::from_toml_str(&src).map_err(|issue| Error::Config(format!("{}: {issue}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Semantic checks; returns `(section, key, message)` on failure.
    pub fn check(&self) -> std::result::Result<(), (&'static str, &'static str, String)> {
        let p = &self.problem;
        if p.grid_n < 3 {
            return Err(("problem", "grid_n", "needs at least 3 nodes per axis".into()));
        }
        if !(p.domain_size > 0.0 && p.domain_size.is_finite()) {
            return Err(("problem", "domain_size", "must be positive".into()));
        }
        if p.obs_per_axis().is_none() {
            return Err((
                "problem",
                "obs_count",
                format!("{} is not a perfect square", p.obs_count),
            ));
        }
        if !(p.kappa_low > 0.0 && p.kappa_high > p.kappa_low) {
            return Err(("problem", "kappa_high", "need 0 < kappa_low < kappa_high".into()));
        }
        if !p.initial_value().is_finite() {
            return Err(("problem", "initial_value", "must be finite".into()));
        }
        if !(self.noise.delta >= 0.0 && self.noise.delta.is_finite()) {
            return Err(("noise", "delta", "must be non-negative".into()));
        }
        if !(self.noise.sigma_stream >= 0.0 && self.noise.sigma_stream.is_finite()) {
            return Err(("noise", "sigma_stream", "must be non-negative".into()));
        }
        let m = &self.matern;
        for (key, v) in [("nu", m.nu), ("ell", m.ell), ("c0", m.c0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(("matern", key, "must be positive and finite".into()));
            }
        }
        if let Err(e) = self.solver.schedule.validate() {
            let msg = e.to_string();
            let key = ["alpha0", "gamma", "exponent"]
                .into_iter()
                .find(|k| msg.contains(k))
                .unwrap_or("");
            return Err(("solver.schedule", key, msg));
        }
        if let Err(e) = self.solver.validate() {
            let key = if e.to_string().contains("sketch_batch") {
                "sketch_batch"
            } else if e.to_string().contains("stop_rel_err") {
                "stop_rel_err"
            } else {
                "max_iters"
            };
            return Err(("solver", key, e.to_string()));
        }
        if let Some(b) = self.solver.sketch_batch {
            if b > p.obs_count {
                return Err((
                    "solver",
                    "sketch_batch",
                    format!("{b} exceeds obs_count {}", p.obs_count),
                ));
            }
        }
        if self.replicates == 0 {
            return Err(("", "replicates", "must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(("", "workers", "must be at least 1".into()));
        }
        if let Some(m) = self.sweep.obs_count {
            let k = (m as f64).sqrt().round() as usize;
            if k * k != m || m == 0 {
                return Err(("sweep", "obs_count", format!("{m} is not a perfect square")));
            }
        }
        if !(self.sweep.stop_rel_err > 0.0 && self.sweep.stop_rel_err < 1.0) {
            return Err(("sweep", "stop_rel_err", "must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// The problem section with the sweep's settings for `kind` applied.
    pub fn problem_for(&self, kind: TruthKind) -> ProblemConfig {
        let mut p = self.problem.clone();
        if p.truth_kind != kind {
            p.initial_value = None;
        }
        p.truth_kind = kind;
        if let Some(m) = self.sweep.obs_count {
            p.obs_count = m;
        }
        let ov = match kind {
            TruthKind::Smooth => &self.sweep.smooth,
            TruthKind::Levelset => &self.sweep.levelset,
        };
        if let Some(ov) = ov {
            if let Some(v) = ov.parameterization {
                p.parameterization = v;
            }
            if let Some(v) = ov.initial_value {
                p.initial_value = Some(v);
            }
            if let Some(v) = ov.truth_seed {
                p.truth_seed = v;
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
replicates = 3

[problem]
truth_kind = "smooth"
parameterization = "exp"

[solver]
variant = "sirgnm"
max_iters = 100
sketch_batch = 32
seed = 5

[solver.schedule]
kind = "power"
alpha0 = 0.5
exponent = 0.9
"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.problem.grid_n, 33);
        assert_eq!(c.problem.initial_value(), 0.1);
        assert_eq!(c.matern, MaternParams::default());
        assert_eq!(c.noise.delta, 0.1);
        assert!(!c.output.record_wall_time);
    }

    #[test]
    fn round_trip_is_identity() {
        let c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, again);
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml_str(&d.to_toml_string()).unwrap(), d);
    }

    #[test]
    fn unknown_key_is_line_anchored() {
        let bad = SAMPLE.replace("seed = 5", "seed = 5\ncolour = 3");
        let e = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert_eq!(e.line, Some(13));
        assert!(e.message.contains("colour"), "{}", e.message);
    }

    #[test]
    fn semantic_error_is_line_anchored() {
        let bad = SAMPLE.replace("sketch_batch = 32", "sketch_batch = 100");
        let e = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert_eq!(e.line, Some(11));
        let bad = SAMPLE.replace("alpha0 = 0.5", "alpha0 = -1.0");
        let e = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert_eq!(e.line, Some(16));
    }

    #[test]
    fn sweep_overrides() {
        let mut c = ExperimentConfig::default();
        c.sweep.obs_count = Some(256);
        c.sweep.smooth = Some(TruthOverride {
            parameterization: Some(Parameterization::Exp),
            ..Default::default()
        });
        let p = c.problem_for(TruthKind::Smooth);
        assert_eq!(p.obs_count, 256);
        assert_eq!(p.parameterization, Parameterization::Exp);
        assert_eq!(p.initial_value(), 0.1);
        assert_eq!(
            c.problem_for(TruthKind::Levelset).parameterization,
            Parameterization::IdentityFloor
        );
    }
}
