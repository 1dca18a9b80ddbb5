//! Per-iteration metrics, empirical probes of the convergence assumptions,
//! rate fits and replicate statistics. Also hosts a linear forward operator
//! used as a verification oracle.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::grid::GridField;
use crate::model::{ForwardModel, Linearization};
use crate::rng::{standard_normals, StreamKey};
use crate::sketch::{SketchMode, SketchPlan};

/// One row of a run trace. Truth-dependent fields are `None` when no truth
/// is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iter: usize,
    /// `alpha_n` used to produce this iterate.
    pub alpha: f64,
    pub rel_err: Option<f64>,
    /// `1/2 |F(u_n) - y_true|^2`.
    pub residual_t: Option<f64>,
    /// `|u_n - u_true|^2`.
    pub param_err_d: Option<f64>,
    /// `|P(F(u_n) + J (u_{n+1} - u_n)) - P Z_n|`.
    pub sketch_gap: f64,
    /// Cumulative solver time.
    pub wall_ms: f64,
}

/// `|u - truth| / |truth|`. The uniform quadrature weight cancels.
pub fn relative_error(u: &GridField, truth: &GridField) -> Result<f64> {
    if u.grid() != truth.grid() {
        return Err(validation("fields live on different grids"));
    }
    let denom = truth.norm();
    if denom == 0.0 {
        return Err(validation("truth has zero norm"));
    }
    let num = u
        .values()
        .iter()
        .zip(truth.values())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

/// `F(u) = A u`.
#[derive(Debug, Clone)]
pub struct LinearTestOperator {
    a: DMatrix<f64>,
    description: String,
}

fn gaussian_matrix(rows: usize, cols: usize, key: StreamKey) -> DMatrix<f64> {
    DMatrix::from_vec(rows, cols, standard_normals(&mut key.rng(), rows * cols))
}

impl LinearTestOperator {
    pub fn new(a: DMatrix<f64>, description: impl Into<String>) -> Result<Self> {
        if a.is_empty() || a.iter().any(|v| !v.is_finite()) {
            return Err(validation("operator matrix must be non-empty and finite"));
        }
        Ok(Self {
            a,
            description: description.into(),
        })
    }

    /// Gaussian blur from `n` points to `m` points on [0, 1] plus a small
    /// random perturbation.
    pub fn smoothing(n: usize, m: usize, seed: u64) -> Self {
        let noise = gaussian_matrix(m, n, StreamKey::new(seed, crate::rng::Purpose::Test));
        let pos = |k: usize, len: usize| (k as f64 + 0.5) / len as f64;
        let a = DMatrix::from_fn(m, n, |i, k| {
            let d = (pos(i, m) - pos(k, n)) / 0.15;
            (-d * d).exp() / n as f64 + 0.01 * noise[(i, k)] / (n as f64).sqrt()
        });
        Self {
            a,
            description: format!("gaussian blur {m}x{n}, seed {seed}"),
        }
    }

    /// `A = U diag(s) V^T` with random orthogonal `U`, `V`.
    pub fn with_spectrum(singular: &[f64], seed: u64) -> Self {
        let (u, v) = Self::orthogonal_pair(singular.len(), seed);
        let s = DMatrix::from_diagonal(&DVector::from_column_slice(singular));
        Self {
            a: &u * s * v.transpose(),
            description: format!("{n}x{n} with prescribed spectrum, seed {seed}", n = singular.len()),
        }
    }

    fn orthogonal_pair(n: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        let key = StreamKey::new(seed, crate::rng::Purpose::Test);
        let u = gaussian_matrix(n, n, key.index(0)).qr().q();
        let v = gaussian_matrix(n, n, key.index(1)).qr().q();
        (u, v)
    }

    /// Square operator with singular values spread over `decades` decades and
    /// a truth `u = A^T w` (source condition of order one half, so that with
    /// `C = I` and `u_0 = 0` the noise-free iterates satisfy
    /// `t_n ~ alpha^2`, `d_n ~ alpha`).
    pub fn rate_benchmark(n: usize, decades: f64, seed: u64) -> (Self, DVector<f64>) {
        let singular: Vec<f64> = (0..n)
            .map(|k| 10f64.powf(-decades * k as f64 / (n - 1).max(1) as f64))
            .collect();
        let op = Self::with_spectrum(&singular, seed);
        let (u, _) = Self::orthogonal_pair(n, seed);
        let w = u * DVector::from_element(n, 1.0);
        let truth = op.a.transpose() * w;
        (op, truth)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.a * u
    }
}

pub struct LinearTestLinearization<'a> {
    a: &'a DMatrix<f64>,
    value: DVector<f64>,
}

impl Linearization for LinearTestLinearization<'_> {
    fn value(&self) -> &DVector<f64> {
        &self.value
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.a * v
    }

    fn apply_adjoint(&self, w: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(w)
    }

    fn jacobian_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        self.a.select_rows(rows)
    }
}

impl ForwardModel for LinearTestOperator {
    type Linearization<'a> = LinearTestLinearization<'a>;

    fn param_dim(&self) -> usize {
        self.a.ncols()
    }

    fn obs_dim(&self) -> usize {
        self.a.nrows()
    }

    fn evaluate(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        if u.len() != self.a.ncols() {
            return Err(validation("parameter length mismatch"));
        }
        Ok(&self.a * u)
    }

    fn linearize(&self, u: &DVector<f64>) -> Result<LinearTestLinearization<'_>> {
        Ok(LinearTestLinearization {
            a: &self.a,
            value: self.evaluate(u)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnbiasednessReport {
    pub m: usize,
    pub batch: usize,
    pub mode: SketchMode,
    /// Zero when every subset was enumerated.
    pub draws: usize,
    pub mean: Vec<f64>,
    /// `max_k |E[P g]_k - g_k|`.
    pub max_deviation: f64,
}

/// Largest `m` handled by exhaustive enumeration.
pub const ENUMERATION_LIMIT: usize = 8;

/// Estimates `E[P g]` for uniformly drawn plans of size `batch`, embedding
/// `Select` plans as plain 0/1 masks. Enumerates all subsets when
/// `m <= ENUMERATION_LIMIT`, otherwise averages `draws` plans.
pub fn probe_unbiasedness(
    g: &[f64],
    batch: usize,
    mode: SketchMode,
    draws: usize,
    key: StreamKey,
) -> Result<UnbiasednessReport> {
    let m = g.len();
    if batch == 0 || batch > m {
        return Err(validation(format!("batch {batch} must lie in [1, {m}]")));
    }
    let scale = |plan: &SketchPlan| match mode {
        SketchMode::Select => 1.0,
        SketchMode::MaskScaled => plan.scale(),
    };
    let (mean, draws) = if m <= ENUMERATION_LIMIT {
        // Inclusion counts are integers; the expectation of row k is
        // g_k * scale * count_k / total, evaluated as one exact ratio.
        let mut counts = vec![0u64; m];
        let mut total = 0u64;
        for subset in (0..m).combinations(batch) {
            total += 1;
            for k in subset {
                counts[k] += 1;
            }
        }
        let (num, den) = match mode {
            SketchMode::Select => (1u64, 1u64),
            SketchMode::MaskScaled => (m as u64, batch as u64),
        };
        let mean: Vec<f64> = g
            .iter()
            .zip(&counts)
            .map(|(gk, &c)| gk * ((c * num) as f64 / (total * den) as f64))
            .collect();
        (mean, 0)
    } else {
        if draws == 0 {
            return Err(validation("Monte Carlo probe needs at least one draw"));
        }
        let mut sum = vec![0.0; m];
        for d in 0..draws {
            let plan = SketchPlan::draw(m, batch, SketchMode::MaskScaled, &mut key.index(d as u64).rng())?;
            let s = scale(&plan);
            for &k in plan.indices() {
                sum[k] += s * g[k];
            }
        }
        (sum.into_iter().map(|v| v / draws as f64).collect(), draws)
    };
    let max_deviation = mean
        .iter()
        .zip(g)
        .map(|(a, b): (&f64, &f64)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(UnbiasednessReport {
        m,
        batch,
        mode,
        draws,
        mean,
        max_deviation,
    })
}

/// Grid of `eta` values tried by [`probe_tangential_cone`].
pub const ETA_GRID: [f64; 6] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeReport {
    pub radius: f64,
    pub samples: usize,
    pub c_tc: f64,
    pub eta: f64,
    /// Smallest `eta` (not restricted to the grid) that works with `C_tc = 1`.
    pub eta_at_unit_c: f64,
}

/// Samples pairs `u, v` from the sup-norm ball of `radius` around `center` and
/// fits the tangential cone inequality
/// `|F(u) + F'(u)(v - u) - y|^2 <= C |F(v) - y|^2 + eta |F(u) - y|^2`.
/// For each `eta` on [`ETA_GRID`] the smallest feasible `C >= 1` is computed;
/// the report holds the smallest `eta` attaining the overall minimum `C`.
pub fn probe_tangential_cone<M: ForwardModel>(
    model: &M,
    center: &DVector<f64>,
    y: &DVector<f64>,
    radius: f64,
    samples: usize,
    key: StreamKey,
) -> Result<ConeReport> {
    if !(radius > 0.0) || samples == 0 {
        return Err(validation("cone probe needs a positive radius and samples"));
    }
    let n = center.len();
    let mut triples = Vec::with_capacity(samples);
    for s in 0..samples {
        let mut rng = key.index(s as u64).rng();
        let mut ball =
            || center + DVector::from_iterator(n, (0..n).map(|_| radius * rand::Rng::gen_range(&mut rng, -1.0..=1.0)));
        let u = ball();
        let v = ball();
        let lin = model.linearize(&u)?;
        let lhs = (lin.value() + lin.apply(&(&v - &u)) - y).norm_squared();
        let a = (model.evaluate(&v)? - y).norm_squared();
        let b = (lin.value() - y).norm_squared();
        triples.push((lhs, a, b));
    }
    let c_for = |eta: f64| {
        triples
            .iter()
            .map(|&(lhs, a, b)| if a > 0.0 { (lhs - eta * b) / a } else { f64::INFINITY })
            .fold(1.0, f64::max)
    };
    let cs: Vec<f64> = ETA_GRID.iter().map(|&e| c_for(e)).collect();
    let best = cs.iter().copied().fold(f64::INFINITY, f64::min);
    let pick = cs.iter().position(|&c| c <= best * (1.0 + 1e-10)).unwrap_or(0);
    let eta_at_unit_c = triples
        .iter()
        .map(|&(lhs, a, b)| {
            let excess = lhs - a;
            if excess <= 1e-12 * lhs.max(a) {
                0.0
            } else if b > 0.0 {
                excess / b
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    Ok(ConeReport {
        radius,
        samples,
        c_tc: cs[pick],
        eta: ETA_GRID[pick],
        eta_at_unit_c,
    })
}

/// Least-squares slope of `y` against `x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(validation("slope fit needs at least two paired points"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(validation("log-log fit needs positive finite values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(validation("alpha is constant over the fit window"));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// Slope of `log t_n` against `log alpha`.
    pub t_slope: f64,
    /// Slope of `log d_n` against `log alpha`.
    pub d_slope: f64,
}

/// Fits both rates over the trailing `window` records.
pub fn fit_rate(history: &[MetricsRecord], window: usize) -> Result<RateFit> {
    if window < 2 || history.len() < window {
        return Err(validation(format!(
            "rate fit needs {window} records, history has {}",
            history.len()
        )));
    }
    let tail = &history[history.len() - window..];
    let alpha: Vec<f64> = tail.iter().map(|r| r.alpha).collect();
    let pull = |f: fn(&MetricsRecord) -> Option<f64>| {
        tail.iter()
            .map(f)
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| validation("rate fit needs truth metrics"))
    };
    Ok(RateFit {
        t_slope: loglog_slope(&alpha, &pull(|r| r.residual_t)?)?,
        d_slope: loglog_slope(&alpha, &pull(|r| r.param_err_d)?)?,
    })
}

/// Mean, normal-approximation 95% interval and range of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let half = 1.96 * sd / n.sqrt();
        Self {
            mean,
            lo: mean - half,
            hi: mean + half,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    /// True when the two intervals intersect.
    pub fn overlaps(&self, other: &Summary) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateStats {
    pub iter: usize,
    /// Replicates that reached this iteration.
    pub count: usize,
    pub rel_err: Option<Summary>,
    pub residual_t: Option<Summary>,
    pub param_err_d: Option<Summary>,
}

/// Per-iteration statistics across replicate histories. Runs that stopped
/// early simply drop out of later iterations.
pub fn replicate_expectation(histories: &[Vec<MetricsRecord>]) -> Vec<ReplicateStats> {
    let len = histories.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|k| {
            let rows: Vec<&MetricsRecord> = histories.iter().filter_map(|h| h.get(k)).collect();
            let field = |f: fn(&MetricsRecord) -> Option<f64>| {
                rows.iter()
                    .map(|r| f(r))
                    .collect::<Option<Vec<f64>>>()
                    .map(|v| Summary::of(&v))
            };
            ReplicateStats {
                iter: rows[0].iter,
                count: rows.len(),
                rel_err: field(|r| r.rel_err),
                residual_t: field(|r| r.residual_t),
                param_err_d: field(|r| r.param_err_d),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceOperator;
    use crate::darcy::{DarcyModel, Parameterization};
    use crate::grid::Grid2D;
    use crate::rng::Purpose;
    use crate::schedule::StepSchedule;
    use crate::solver::{run, step_woodbury, Data, SolverConfig, StepInputs, Truth, Variant};

    fn record(iter: usize, alpha: f64, t: f64, d: f64) -> MetricsRecord {
        MetricsRecord {
            iter,
            alpha,
            rel_err: Some(d.sqrt()),
            residual_t: Some(t),
            param_err_d: Some(d),
            sketch_gap: 0.0,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn relative_error_cases() {
        let g = Grid2D::square(3, 6.0).unwrap();
        let truth = GridField::from_fn(g, |x, y| 1.0 + x - 0.5 * y).unwrap();
        assert_eq!(relative_error(&truth, &truth).unwrap(), 0.0);
        let double = GridField::new(g, truth.values().iter().map(|v| 2.0 * v).collect()).unwrap();
        assert!((relative_error(&double, &truth).unwrap() - 1.0).abs() < 1e-15);
        // One node shifted by |u_true|: the error is exactly 1.
        let mut shifted = truth.values().to_vec();
        shifted[0] += truth.norm();
        let shifted = GridField::new(g, shifted).unwrap();
        let mean_sq = truth.values().iter().map(|v| v * v).sum::<f64>() / 9.0;
        let want = truth.norm() / (9.0 * mean_sq).sqrt();
        assert!((relative_error(&shifted, &truth).unwrap() - want).abs() < 1e-15);
        let zero = GridField::constant(g, 0.0);
        assert!(relative_error(&truth, &zero).is_err());
        let other = GridField::constant(Grid2D::square(4, 6.0).unwrap(), 1.0);
        assert!(relative_error(&other, &truth).is_err());
    }

    #[test]
    fn enumeration_is_exactly_unbiased() {
        let key = StreamKey::new(0, Purpose::Test);
        let r = probe_unbiasedness(&[1.0, 2.0, 3.0, 4.0], 2, SketchMode::MaskScaled, 0, key).unwrap();
        assert_eq!(r.max_deviation, 0.0);
        assert_eq!(r.draws, 0);
        for m in 1..=8 {
            let g: Vec<f64> = (0..m).map(|k| 0.1 + (k as f64).sin()).collect();
            for b in 1..=m {
                let r = probe_unbiasedness(&g, b, SketchMode::MaskScaled, 0, key).unwrap();
                assert_eq!(r.max_deviation, 0.0, "m {m} b {b}");
            }
        }
        // The unscaled 0/1 mask has mean (b/m) g.
        let r = probe_unbiasedness(&[1.0, 2.0, 3.0, 4.0], 2, SketchMode::Select, 0, key).unwrap();
        assert_eq!(r.mean, vec![0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn full_batch_single_draw_is_unbiased() {
        let g: Vec<f64> = (0..20).map(|k| k as f64 - 3.5).collect();
        let r = probe_unbiasedness(&g, 20, SketchMode::MaskScaled, 1, StreamKey::new(1, Purpose::Test)).unwrap();
        assert_eq!(r.max_deviation, 0.0);
    }

    #[test]
    fn sketch_deviation_vanishes_only_at_full_batch() {
        let g: Vec<f64> = (0..16).map(|k| (k as f64 * 0.7).cos()).collect();
        let key = StreamKey::new(4, Purpose::Test);
        let mut last = f64::INFINITY;
        for b in [4, 8, 12] {
            // mean single-draw deviation |P g - g| over 2000 plans
            let dev: f64 = (0..2000)
                .map(|d| {
                    let r = probe_unbiasedness(&g, b, SketchMode::MaskScaled, 1, key.run(b as u64).index(d)).unwrap();
                    r.mean.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                })
                .sum::<f64>()
                / 2000.0;
            assert!(dev > 0.0 && dev.is_finite() && dev < last, "b {b}: {dev}");
            last = dev;
        }
        let r = probe_unbiasedness(&g, 16, SketchMode::MaskScaled, 1, key).unwrap();
        assert_eq!(r.max_deviation, 0.0);
    }

    #[test]
    fn monte_carlo_unbiasedness() {
        let g = standard_normals(&mut StreamKey::new(2, Purpose::Test).rng(), 64);
        let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let r = probe_unbiasedness(
            &g,
            32,
            SketchMode::MaskScaled,
            100_000,
            StreamKey::new(3, Purpose::Sketch),
        )
        .unwrap();
        assert!(r.max_deviation <= 0.01 * gmax, "{} vs {}", r.max_deviation, gmax);
    }

    #[test]
    fn linear_operator_cone_is_trivial() {
        let op = LinearTestOperator::smoothing(30, 12, 4);
        let center = DVector::from_element(30, 1.0);
        let y = op.apply(&DVector::from_element(30, 0.7));
        let r = probe_tangential_cone(&op, &center, &y, 0.5, 50, StreamKey::new(5, Purpose::Probe)).unwrap();
        assert!((r.c_tc - 1.0).abs() <= 1e-10);
        assert!(r.eta.abs() <= 1e-10);
        assert!(r.eta_at_unit_c <= 1e-10);
    }

    #[test]
    fn darcy_cone_grows_with_radius() {
        let g = Grid2D::square(9, 6.0).unwrap();
        let model = DarcyModel::standard(g, Parameterization::IdentityFloor).unwrap();
        let center = DVector::from_element(g.len(), 1.0);
        let truth = crate::truth::smooth_truth(&g).unwrap();
        let y = model
            .evaluate(&DVector::from_iterator(g.len(), truth.values().iter().map(|v| 1.0 + v)))
            .unwrap();
        let mut last = ConeReport {
            radius: 0.0,
            samples: 0,
            c_tc: 1.0,
            eta: 0.0,
            eta_at_unit_c: 0.0,
        };
        for radius in [1e-3, 1e-2, 1e-1] {
            let r = probe_tangential_cone(&model, &center, &y, radius, 40, StreamKey::new(6, Purpose::Probe)).unwrap();
            if radius == 1e-3 {
                assert!(r.eta <= 1e-2, "{r:?}");
            }
            assert!(
                r.eta >= last.eta && r.eta_at_unit_c >= last.eta_at_unit_c,
                "{r:?} after {last:?}"
            );
            last = r;
        }
    }

    #[test]
    fn darcy_nonlinearity_is_second_order() {
        // Data at the centre itself: the linearization error is the only
        // thing separating the two sides, so eta scales like the radius.
        let g = Grid2D::square(9, 6.0).unwrap();
        let model = DarcyModel::standard(g, Parameterization::IdentityFloor).unwrap();
        let center = DVector::from_element(g.len(), 1.0);
        let y = model.evaluate(&center).unwrap();
        let etas: Vec<f64> = [1e-4, 1e-3, 1e-2]
            .iter()
            .map(|&r| {
                probe_tangential_cone(&model, &center, &y, r, 40, StreamKey::new(7, Purpose::Probe))
                    .unwrap()
                    .eta_at_unit_c
            })
            .collect();
        for w in etas.windows(2) {
            let ratio = w[1] / w[0];
            assert!((5.0..=20.0).contains(&ratio), "{etas:?}");
        }
    }

    #[test]
    fn exact_power_law_slopes() {
        let h: Vec<MetricsRecord> = (0..30)
            .map(|n| {
                let a = 0.5 * 0.8f64.powi(n);
                record(n as usize + 1, a, a * a, a)
            })
            .collect();
        let fit = fit_rate(&h, 20).unwrap();
        assert!((fit.t_slope - 2.0).abs() < 1e-12);
        assert!((fit.d_slope - 1.0).abs() < 1e-12);
        assert!(fit_rate(&h[..10], 20).is_err());
    }

    #[test]
    fn perturbed_power_law_slope() {
        let noise = standard_normals(&mut StreamKey::new(7, Purpose::Test).rng(), 30);
        let h: Vec<MetricsRecord> = (0..30)
            .map(|n| {
                let a = 0.5 * 0.8f64.powi(n);
                record(n as usize + 1, a, a * a + 1e-15 * noise[n as usize].abs(), a)
            })
            .collect();
        let s = fit_rate(&h, 20).unwrap().t_slope;
        assert!((1.99..=2.01).contains(&s), "slope {s}");
    }

    fn rate_run(iters: usize) -> Vec<MetricsRecord> {
        let (op, truth_u) = LinearTestOperator::rate_benchmark(81, 6.0, 8);
        let cov = CovarianceOperator::from_dense(DMatrix::identity(81, 81)).unwrap();
        let truth = Truth {
            output: op.apply(&truth_u),
            u: truth_u,
        };
        let cfg = SolverConfig::new(
            Variant::Irgnm,
            StepSchedule::Geometric {
                alpha0: 0.5,
                gamma: 0.8,
            },
            iters,
        );
        run(
            &cfg,
            &op,
            &cov,
            Data::Fixed(truth.output.clone()),
            DVector::zeros(81),
            Some(&truth),
        )
        .unwrap()
        .state
        .history
    }

    #[test]
    fn noise_free_rates() {
        let fit = fit_rate(&rate_run(60), 20).unwrap();
        assert!((1.7..=2.3).contains(&fit.t_slope), "{fit:?}");
        assert!((0.7..=1.3).contains(&fit.d_slope), "{fit:?}");
    }

    #[test]
    fn noise_free_residual_decreases() {
        let h = rate_run(60);
        let tail = &h[h.len() / 2..];
        for w in tail.windows(2) {
            assert!(w[1].residual_t.unwrap() <= w[0].residual_t.unwrap());
        }
    }

    #[test]
    fn small_alpha_gives_minimum_norm_solution() {
        let (n, m) = (40, 10);
        let op = LinearTestOperator::smoothing(n, m, 9);
        let a = gaussian_matrix(n, n, StreamKey::new(10, Purpose::Test));
        let cov = CovarianceOperator::from_dense(&a * a.transpose() / n as f64 + DMatrix::identity(n, n)).unwrap();
        let u0 = DVector::from_vec(standard_normals(&mut StreamKey::new(11, Purpose::Test).rng(), n));
        let y = DVector::from_vec(standard_normals(&mut StreamKey::new(12, Purpose::Test).rng(), m));
        let j = op.matrix().clone();
        let inputs = StepInputs {
            u_n: DVector::zeros(n),
            u_0: u0.clone(),
            alpha: 1e-10,
            f: DVector::zeros(m),
            z: y.clone(),
            jac: j.clone(),
        };
        let step = step_woodbury(&inputs, &cov).unwrap();
        let cj = cov.dense() * j.transpose();
        let gram = &j * &cj;
        let want = &u0 + &cj * gram.lu().solve(&(&y - &j * &u0)).unwrap();
        assert!((&step - &want).norm() <= 1e-6 * want.norm());
    }

    #[test]
    fn replicate_statistics() {
        let h1 = vec![record(1, 1.0, 4.0, 1.0), record(2, 0.5, 1.0, 0.25)];
        let same = replicate_expectation(&[h1.clone(), h1.clone(), h1.clone()]);
        assert_eq!(same[0].rel_err.unwrap().half_width(), 0.0);
        let h2 = vec![record(1, 1.0, 2.0, 4.0)];
        let stats = replicate_expectation(&[h1, h2]);
        let d = stats[0].param_err_d.unwrap();
        let sd = ((1.0f64 - 2.5).powi(2) + (4.0f64 - 2.5).powi(2)).sqrt();
        assert!((d.half_width() - 1.96 * sd / 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(d.mean, 2.5);
        assert_eq!(stats[1].count, 1);
    }

    #[test]
    fn stochastic_mean_within_envelope() {
        let op = LinearTestOperator::smoothing(30, 16, 13);
        let cov = CovarianceOperator::from_dense(DMatrix::identity(30, 30)).unwrap();
        let truth_u = DVector::from_fn(30, |k, _| (k as f64 / 5.0).sin());
        let truth = Truth {
            output: op.apply(&truth_u),
            u: truth_u,
        };
        let histories: Vec<Vec<MetricsRecord>> = (0..20)
            .map(|run_id| {
                let mut cfg = SolverConfig::new(Variant::Sirgnm, StepSchedule::Constant { alpha0: 0.05 }, 30);
                cfg.sketch_batch = Some(4);
                cfg.run = run_id;
                run(
                    &cfg,
                    &op,
                    &cov,
                    Data::Fixed(truth.output.clone()),
                    DVector::zeros(30),
                    Some(&truth),
                )
                .unwrap()
                .state
                .history
            })
            .collect();
        for s in replicate_expectation(&histories) {
            let e = s.rel_err.unwrap();
            assert!(e.min <= e.mean && e.mean <= e.max);
            assert_eq!(s.count, 20);
        }
    }
}
