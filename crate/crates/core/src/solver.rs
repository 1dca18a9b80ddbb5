//! Regularized Gauss-Newton iterations: IRGNM, its dynamic-data variant, and
//! their sketched (mini-batch) counterparts.
//!
//! Every variant performs the same covariance-weighted update
//!
//! ```text
//! u_{n+1} = argmin_u  1/2 |P(F(u_n) + J (u - u_n))|^2 - <P Z_n, P(F(u_n) + J (u - u_n))>
//!                     + alpha_n / 2 |u - u_0|_C^2
//! ```
//!
//! computed in observation space,
//! `u_{n+1} = u_0 + C J^T (J C J^T + alpha_n I)^{-1} (Z_n - F(u_n) - J (u_0 - u_n))`,
//! with `J`, `F(u_n)` and `Z_n` restricted (and scaled) by the sketch `P`.
//! The variants differ only in where `Z_n` comes from and whether `P` is the
//! identity.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{guard_dense, CovarianceOperator};
use crate::diagnostics::MetricsRecord;
use crate::error::{validation, Error, Result};
use crate::model::{ForwardModel, Linearization};
use crate::observation::ObservationStream;
use crate::rng::{Purpose, StreamKey};
use crate::schedule::StepSchedule;
use crate::sketch::{SketchMode, SketchPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Fixed data, full observation set.
    Irgnm,
    /// Running mean of sequential observations, full observation set.
    Dirgnm,
    /// Fixed data, fresh random row subset each iteration.
    Sirgnm,
    /// Running mean of sequential observations, fresh row subset each iteration.
    Sdirgnm,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Irgnm, Variant::Dirgnm, Variant::Sirgnm, Variant::Sdirgnm];

    pub fn is_dynamic(self) -> bool {
        matches!(self, Variant::Dirgnm | Variant::Sdirgnm)
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Variant::Sirgnm | Variant::Sdirgnm)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Irgnm => "IRGNM",
            Variant::Dirgnm => "dIRGNM",
            Variant::Sirgnm => "SIRGNM",
            Variant::Sdirgnm => "SdIRGNM",
        }
    }
}

/// Centre of the Tikhonov penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorCenter {
    /// The initial guess, fixed for the whole run.
    #[default]
    Initial,
    /// The current iterate (Levenberg-Marquardt style).
    Current,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub variant: Variant,
    pub schedule: StepSchedule,
    pub max_iters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_rel_err: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sketch_batch: Option<usize>,
    #[serde(default)]
    pub sketch_mode: SketchMode,
    #[serde(default)]
    pub seed: u64,
    /// Replicate index; selects independent noise and sketch streams.
    #[serde(default)]
    pub run: u64,
    #[serde(default)]
    pub prior_center: PriorCenter,
}

impl SolverConfig {
    pub fn new(variant: Variant, schedule: StepSchedule, max_iters: usize) -> Self {
        Self {
            variant,
            schedule,
            max_iters,
            stop_rel_err: None,
            sketch_batch: None,
            sketch_mode: SketchMode::Select,
            seed: 0,
            run: 0,
            prior_center: PriorCenter::Initial,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.max_iters == 0 {
            return Err(validation("max_iters must be positive"));
        }
        match (self.variant.is_stochastic(), self.sketch_batch) {
            (true, None) => return Err(validation(format!("{} needs sketch_batch", self.variant.name()))),
            (false, Some(_)) => {
                return Err(validation(format!(
                    "{} does not sketch; remove sketch_batch",
                    self.variant.name()
                )))
            }
            (true, Some(0)) => return Err(validation("sketch_batch must be positive")),
            _ => {}
        }
        if let Some(t) = self.stop_rel_err {
            if !(t > 0.0 && t < 1.0) {
                return Err(validation("stop_rel_err must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Everything one update needs. Rows of `jac`, `f` and `z` are already
/// sketched.
#[derive(Debug, Clone)]
pub struct StepInputs {
    pub u_n: DVector<f64>,
    /// Prior centre.
    pub u_0: DVector<f64>,
    pub alpha: f64,
    /// Data `Z_n`.
    pub z: DVector<f64>,
    /// `F(u_n)`.
    pub f: DVector<f64>,
    /// `F'[u_n]`.
    pub jac: DMatrix<f64>,
}

impl StepInputs {
    fn validate(&self, n: usize) -> Result<()> {
        let rows = self.jac.nrows();
        if self.f.len() != rows || self.z.len() != rows {
            return Err(validation(format!(
                "Jacobian has {rows} rows but F has {} and Z has {} entries",
                self.f.len(),
                self.z.len()
            )));
        }
        if self.jac.ncols() != n || self.u_n.len() != n || self.u_0.len() != n {
            return Err(validation(format!("parameter dimension mismatch (expected {n})")));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(validation("alpha must be positive"));
        }
        Ok(())
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for a in 0..n {
        for b in 0..a {
            let v = 0.5 * (m[(a, b)] + m[(b, a)]);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
}

/// Observation-space update
/// `u_0 + C J^T (J C J^T + alpha I)^{-1} (z - F - J (u_0 - u_n))`.
pub fn step_woodbury(inputs: &StepInputs, cov: &CovarianceOperator) -> Result<DVector<f64>> {
    inputs.validate(cov.dim())?;
    let drive = &inputs.z - &inputs.f - &inputs.jac * (&inputs.u_0 - &inputs.u_n);
    let cjt = cov.apply_matrix(&inputs.jac.transpose());
    let mut gram = &inputs.jac * &cjt;
    symmetrize(&mut gram);
    for k in 0..gram.nrows() {
        gram[(k, k)] += inputs.alpha;
    }
    let chol = Cholesky::new(gram).ok_or_else(|| Error::Conditioning {
        detail: format!(
            "J C J^T + alpha I not positive definite (alpha = {:e}, {} rows)",
            inputs.alpha,
            inputs.jac.nrows()
        ),
    })?;
    let x = chol.solve(&drive);
    Ok(&inputs.u_0 + cjt * x)
}

/// Parameter-space update
/// `u_n + (J^T J + alpha C^{-1})^{-1} (J^T (z - F) + alpha C^{-1} (u_0 - u_n))`.
pub fn step_primal(inputs: &StepInputs, cov: &CovarianceOperator) -> Result<DVector<f64>> {
    let n = cov.dim();
    inputs.validate(n)?;
    guard_dense(n * n)?;
    let mut cinv = cov.solve_matrix(&DMatrix::identity(n, n));
    symmetrize(&mut cinv);
    let jt = inputs.jac.transpose();
    let mut h = &jt * &inputs.jac + &cinv * inputs.alpha;
    symmetrize(&mut h);
    let rhs = &jt * (&inputs.z - &inputs.f) + &cinv * (&inputs.u_0 - &inputs.u_n) * inputs.alpha;
    let chol = Cholesky::new(h.clone()).ok_or_else(|| Error::Conditioning {
        detail: format!("J^T J + alpha C^-1 not positive definite (n = {n})"),
    })?;
    let s = chol.solve(&rhs);
    let res = (&h * &s - &rhs).norm();
    if res > 1e-9 * rhs.norm() {
        return Err(Error::Conditioning {
            detail: format!("primal solve residual {res:e} vs rhs {:e}", rhs.norm()),
        });
    }
    Ok(&inputs.u_n + s)
}

/// Sketched linearized objective at `u`:
/// `1/2 |g|^2 - <z, g> + alpha/2 |u - u_0|_C^2` with `g = F + J (u - u_n)`.
/// Its minimizer is the update returned by [`step_woodbury`].
pub fn sketched_objective(inputs: &StepInputs, cov: &CovarianceOperator, u: &DVector<f64>) -> f64 {
    let g = &inputs.f + &inputs.jac * (u - &inputs.u_n);
    let penalty = cov.weighted_norm_sq(&(u - &inputs.u_0));
    0.5 * g.norm_squared() - inputs.z.dot(&g) + 0.5 * inputs.alpha * penalty
}

/// Where `Z_n` comes from.
#[derive(Debug, Clone)]
pub enum Data {
    /// One noisy data set reused at every iteration.
    Fixed(DVector<f64>),
    /// Sequential observations; `Z_n` is their running mean.
    Stream(ObservationStream),
}

/// Known solution used for error metrics and early stopping.
#[derive(Debug, Clone)]
pub struct Truth {
    pub u: DVector<f64>,
    /// Noise-free `F(u_true)`.
    pub output: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIters,
    /// Relative error fell below `stop_rel_err`.
    Converged,
    /// The update was non-finite or blew past the divergence guard; the state
    /// holds the last finite iterate.
    Diverged,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub u: DVector<f64>,
    pub iter: usize,
    /// `alpha` for the next update.
    pub alpha: f64,
    pub history: Vec<MetricsRecord>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub state: SolverState,
    pub termination: Termination,
    /// Sampled rows per iteration (empty for unsketched variants).
    pub plans: Vec<Vec<usize>>,
    /// Numerical failure that ended a diverged run, if any.
    pub failure: Option<String>,
}

/// Step-by-step driver for one run.
pub struct Solver<'a, M: ForwardModel + 'a> {
    config: SolverConfig,
    model: &'a M,
    cov: &'a CovarianceOperator,
    data: Data,
    truth: Option<&'a Truth>,
    u_init: DVector<f64>,
    lin: M::Linearization<'a>,
    state: SolverState,
    plans: Vec<Vec<usize>>,
    termination: Option<Termination>,
    clock: Instant,
}

impl<'a, M: ForwardModel + 'a> Solver<'a, M> {
    pub fn new(
        config: SolverConfig,
        model: &'a M,
        cov: &'a CovarianceOperator,
        data: Data,
        u_init: DVector<f64>,
        truth: Option<&'a Truth>,
    ) -> Result<Self> {
        config.validate()?;
        let (n, m) = (model.param_dim(), model.obs_dim());
        if cov.dim() != n || u_init.len() != n {
            return Err(validation(format!(
                "dimension mismatch: model {n}, covariance {}, initial guess {}",
                cov.dim(),
                u_init.len()
            )));
        }
        match (&data, config.variant.is_dynamic()) {
            (Data::Fixed(y), false) if y.len() == m => {}
            (Data::Stream(_), true) => {}
            _ => {
                return Err(validation(format!(
                    "{} needs {} data of length {m}",
                    config.variant.name(),
                    if config.variant.is_dynamic() {
                        "streamed"
                    } else {
                        "fixed"
                    }
                )))
            }
        }
        if let Some(b) = config.sketch_batch {
            if b > m {
                return Err(validation(format!("sketch_batch {b} exceeds {m} observations")));
            }
        }
        if let Some(t) = truth {
            if t.u.len() != n || t.output.len() != m {
                return Err(validation("truth dimensions do not match the model"));
            }
        }
        let lin = model.linearize(&u_init)?;
        let state = SolverState {
            u: u_init.clone(),
            iter: 0,
            alpha: config.schedule.alpha(0),
            history: Vec::new(),
        };
        Ok(Self {
            config,
            model,
            cov,
            data,
            truth,
            u_init,
            lin,
            state,
            plans: Vec::new(),
            termination: None,
            clock: Instant::now(),
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    /// Current linearization `F(u_n)`, `F'[u_n]`.
    pub fn linearization(&self) -> &M::Linearization<'a> {
        &self.lin
    }

    fn next_data(&mut self) -> DVector<f64> {
        match &mut self.data {
            Data::Fixed(y) => y.clone(),
            Data::Stream(s) => DVector::from_vec(s.draw().1),
        }
    }

    /// Performs one update. Returns the termination reason once the run is over;
    /// an iterate that trips the divergence guard is reported as [`Error::Divergence`].
    pub fn step(&mut self) -> Result<Option<Termination>> {
        if self.termination.is_some() {
            return Ok(self.termination);
        }
        let n = self.state.iter;
        let m = self.model.obs_dim();
        let alpha = self.config.schedule.alpha(n);
        let z_full = self.next_data();

        let (rows, scale) = match self.config.sketch_batch {
            Some(b) if self.config.variant.is_stochastic() => {
                let key = StreamKey::new(self.config.seed, Purpose::Sketch)
                    .run(self.config.run)
                    .index(n as u64);
                let plan = SketchPlan::draw(m, b, self.config.sketch_mode, &mut key.rng())?;
                let scale = plan.scale();
                self.plans.push(plan.indices().to_vec());
                (plan.indices().to_vec(), scale)
            }
            _ => ((0..m).collect::<Vec<_>>(), 1.0),
        };
        let f_all = self.lin.value();
        let pick = |v: &DVector<f64>| DVector::from_iterator(rows.len(), rows.iter().map(|&k| scale * v[k]));
        let mut jac = self.lin.jacobian_rows(&rows);
        if scale != 1.0 {
            jac *= scale;
        }
        let inputs = StepInputs {
            u_n: self.state.u.clone(),
            u_0: match self.config.prior_center {
                PriorCenter::Initial => self.u_init.clone(),
                PriorCenter::Current => self.state.u.clone(),
            },
            alpha,
            z: pick(&z_full),
            f: pick(f_all),
            jac,
        };
        let u_next = step_woodbury(&inputs, self.cov)?;

        let norm = u_next.norm();
        if !norm.is_finite() || norm > 1e8 * (1.0 + self.u_init.norm()) {
            self.termination = Some(Termination::Diverged);
            return Err(Error::Divergence { iter: n + 1, norm });
        }
        let gap = (&inputs.f + &inputs.jac * (&u_next - &inputs.u_n) - &inputs.z).norm();
        self.lin = self.model.linearize(&u_next)?;

        let (rel_err, residual_t, param_err_d) = match self.truth {
            Some(t) => {
                let d = (&u_next - &t.u).norm_squared();
                let tn = 0.5 * (self.lin.value() - &t.output).norm_squared();
                (Some(d.sqrt() / t.u.norm()), Some(tn), Some(d))
            }
            None => (None, None, None),
        };
        self.state.history.push(MetricsRecord {
            iter: n + 1,
            alpha,
            rel_err,
            residual_t,
            param_err_d,
            sketch_gap: gap,
            wall_ms: self.clock.elapsed().as_secs_f64() * 1e3,
        });
        self.state.u = u_next;
        self.state.iter = n + 1;
        self.state.alpha = self.config.schedule.alpha(n + 1);

        if let (Some(tol), Some(e)) = (self.config.stop_rel_err, rel_err) {
            if e <= tol {
                self.termination = Some(Termination::Converged);
            }
        }
        if self.termination.is_none() && self.state.iter >= self.config.max_iters {
            self.termination = Some(Termination::MaxIters);
        }
        Ok(self.termination)
    }

    /// Iterates to termination. A numerical failure inside an update ends the
    /// run as [`Termination::Diverged`] and keeps the history so far.
    pub fn run(mut self) -> Result<RunResult> {
        self.clock = Instant::now();
        let mut failure = None;
        let termination = loop {
            match self.step() {
                Ok(Some(t)) => break t,
                Ok(None) => {}
                Err(e) => {
                    failure = Some(e.to_string());
                    break Termination::Diverged;
                }
            }
        };
        Ok(RunResult {
            state: self.state,
            termination,
            plans: self.plans,
            failure,
        })
    }
}

/// Runs one configured solve to completion.
pub fn run<M: ForwardModel>(
    config: &SolverConfig,
    model: &M,
    cov: &CovarianceOperator,
    data: Data,
    u_init: DVector<f64>,
    truth: Option<&Truth>,
) -> Result<RunResult> {
    Solver::new(config.clone(), model, cov, data, u_init, truth)?.run()
}
