//! Self-check suites: Woodbury equivalence, adjoint and Jacobian accuracy,
//! sketch unbiasedness, observation averaging, convergence rates, full-batch
//! reduction and Matérn/Bessel accuracy.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::covariance::bessel_k;
use crate::covariance::{CovarianceOperator, MaternParams};
use crate::darcy::{DarcyModel, Parameterization};
use crate::diagnostics::{fit_rate, probe_unbiasedness, LinearTestOperator};
use crate::error::Result;
use crate::grid::Grid2D;
use crate::model::{ForwardModel, Linearization};
use crate::observation::ObservationStream;
use crate::rng::{standard_normals, Purpose, StreamKey};
use crate::schedule::StepSchedule;
use crate::sketch::SketchMode;
use crate::solver::{self, step_primal, step_woodbury, Data, Solver, SolverConfig, StepInputs, Truth, Variant};

/// Outcome of one suite.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} {:<24} {:>7.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckOutcome {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn randn(seed: u64, n: usize) -> DVector<f64> {
    DVector::from_vec(standard_normals(&mut StreamKey::new(seed, Purpose::Probe).rng(), n))
}

fn random_spd(n: usize, seed: u64) -> Result<CovarianceOperator> {
    let a = DMatrix::from_vec(n, n, randn(seed, n * n).as_slice().to_vec());
    let c = &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5;
    CovarianceOperator::from_dense((&c + c.transpose()) * 0.5)
}

/// Closed-form and dual updates on random instances with `N <= 400`, `m <= 64`.
pub fn woodbury_equivalence(instances: usize) -> CheckOutcome {
    timed("woodbury_equivalence", || {
        const SHAPES: [(usize, usize); 5] = [(25, 6), (60, 64), (150, 16), (250, 40), (400, 64)];
        let mut worst = 0.0f64;
        for s in 0..instances as u64 {
            let (n, m) = SHAPES[s as usize % SHAPES.len()];
            let cov = random_spd(n, 1000 + s)?;
            let inp = StepInputs {
                u_n: randn(10 * s, n),
                u_0: randn(10 * s + 1, n),
                alpha: 10f64.powf(-1.0 + (s % 3) as f64),
                z: randn(10 * s + 2, m),
                f: randn(10 * s + 3, m),
                jac: DMatrix::from_vec(m, n, randn(10 * s + 4, m * n).as_slice().to_vec()),
            };
            let a = step_woodbury(&inp, &cov)?;
            let b = step_primal(&inp, &cov)?;
            worst = worst.max((&a - &b).norm() / b.norm());
        }
        Ok((
            worst <= 1e-10,
            format!("{instances} instances, max rel diff {worst:.2e} (tol 1e-10)"),
        ))
    })
}

/// Adjoint identity and central finite differences for the Darcy map.
pub fn adjoint_and_jacobian(grids: &[usize], directions: usize) -> CheckOutcome {
    timed("adjoint_and_jacobian", || {
        let (mut adj, mut fd) = (0.0f64, 0.0f64);
        for &n in grids {
            let grid = Grid2D::square(n, 6.0)?;
            let model = DarcyModel::standard(grid, Parameterization::IdentityFloor)?;
            let dim = grid.len();
            let u = randn(n as u64, dim).map(|v| 1.0 + 0.4 * v.tanh());
            let lin = model.linearize(&u)?;
            for d in 0..directions as u64 {
                let seed = 100 * n as u64 + 3 * d;
                let v = randn(seed, dim);
                let w = randn(seed + 1, model.obs_dim());
                let jv = lin.apply(&v);
                let jtw = lin.apply_adjoint(&w);
                let gap = (jv.dot(&w) - v.dot(&jtw)).abs();
                adj = adj.max(gap / (jv.norm() * w.norm() + v.norm() * jtw.norm()));
                let eps = 1e-6;
                let fp = model.evaluate(&(&u + eps * &v))?;
                let fm = model.evaluate(&(&u - eps * &v))?;
                let diff = (fp - fm) / (2.0 * eps);
                fd = fd.max((&jv - &diff).norm() / diff.norm());
            }
        }
        Ok((
            adj <= 1e-11 && fd <= 1e-5,
            format!("grids {grids:?}, {directions} directions: adjoint {adj:.1e} (tol 1e-11), fd {fd:.1e} (tol 1e-5)"),
        ))
    })
}

/// Exhaustive check at every `m <= 8` plus a Monte Carlo probe at `m = 64`.
pub fn sketch_unbiasedness(draws: usize) -> CheckOutcome {
    timed("sketch_unbiasedness", || {
        let mut exact = 0.0f64;
        for m in 1..=8 {
            let g = randn(m as u64, m);
            for b in 1..=m {
                let r = probe_unbiasedness(
                    g.as_slice(),
                    b,
                    SketchMode::MaskScaled,
                    0,
                    StreamKey::new(0, Purpose::Sketch),
                )?;
                exact = exact.max(r.max_deviation);
            }
        }
        let g = randn(64, 64);
        let r = probe_unbiasedness(
            g.as_slice(),
            32,
            SketchMode::MaskScaled,
            draws,
            StreamKey::new(5, Purpose::Sketch),
        )?;
        let rel = (DVector::from_vec(r.mean) - &g).norm() / g.norm();
        Ok((
            exact == 0.0 && rel <= 0.01,
            format!("enumeration max deviation {exact:e}; m=64 b=32 {draws} draws rel deviation {rel:.2e} (tol 1e-2)"),
        ))
    })
}

/// `var(Z_n) / var(Z_4n)` and `var(Z_n) ~ sigma^2 / n` across independent streams.
pub fn averaging_law(streams: u64) -> CheckOutcome {
    timed("averaging_law", || {
        let (n, m, sigma) = (25usize, 8usize, 0.1);
        let (mut zn, mut z4n) = (Vec::new(), Vec::new());
        for r in 0..streams {
            let mut s = ObservationStream::new(vec![0.0; m], sigma, 99, r)?;
            for k in 1..=4 * n {
                let (_, z) = s.draw();
                if k == n {
                    zn.extend(z);
                } else if k == 4 * n {
                    z4n.extend(z);
                }
            }
        }
        let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        let ratio = var(&zn) / var(&z4n);
        let level = var(&zn) / (sigma * sigma / n as f64);
        Ok((
            (2.5..=5.5).contains(&ratio) && (0.7..=1.3).contains(&level),
            format!(
                "{streams} streams: var ratio {ratio:.3} (in [2.5, 5.5]), var / (sigma^2/n) {level:.3} (in [0.7, 1.3])"
            ),
        ))
    })
}

/// Noise-free full-batch rates on the linear benchmark with `gamma = 0.8`.
pub fn convergence_rates() -> CheckOutcome {
    timed("convergence_rates", || {
        let (op, u) = LinearTestOperator::rate_benchmark(81, 6.0, 8);
        let cov = CovarianceOperator::from_dense(DMatrix::identity(81, 81))?;
        let truth = Truth {
            output: op.apply(&u),
            u,
        };
        let cfg = SolverConfig::new(
            Variant::Irgnm,
            StepSchedule::Geometric {
                alpha0: 0.5,
                gamma: 0.8,
            },
            60,
        );
        let r = solver::run(
            &cfg,
            &op,
            &cov,
            Data::Fixed(truth.output.clone()),
            DVector::zeros(81),
            Some(&truth),
        )?;
        let fit = fit_rate(&r.state.history, 20)?;
        Ok((
            (1.7..=2.3).contains(&fit.t_slope) && (0.7..=1.3).contains(&fit.d_slope),
            format!(
                "trailing 20 of 60: t slope {:.3} (in [1.7, 2.3]), d slope {:.3} (in [0.7, 1.3])",
                fit.t_slope, fit.d_slope
            ),
        ))
    })
}

/// SIRGNM with `b = m` against IRGNM, iterate by iterate.
pub fn full_batch_reduction(iters: usize) -> CheckOutcome {
    timed("full_batch_reduction", || {
        let op = LinearTestOperator::smoothing(40, 12, 2);
        let cov = random_spd(40, 22)?;
        let y = randn(23, 12);
        let sched = StepSchedule::Geometric {
            alpha0: 1.0,
            gamma: 0.9,
        };
        let det = SolverConfig::new(Variant::Irgnm, sched, iters);
        let mut sto = SolverConfig::new(Variant::Sirgnm, sched, iters);
        sto.sketch_batch = Some(12);
        let u0 = DVector::zeros(40);
        let mut a = Solver::new(det, &op, &cov, Data::Fixed(y.clone()), u0.clone(), None)?;
        let mut b = Solver::new(sto, &op, &cov, Data::Fixed(y), u0, None)?;
        let mut worst = 0.0f64;
        for _ in 0..iters {
            a.step()?;
            b.step()?;
            worst = worst.max((&a.state().u - &b.state().u).norm() / a.state().u.norm().max(f64::MIN_POSITIVE));
        }
        Ok((
            worst <= 1e-12,
            format!("{iters} iterations, max rel diff {worst:.1e} (tol 1e-12)"),
        ))
    })
}

/// `K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt` by the trapezoidal
/// rule, which converges geometrically for this analytic, rapidly decaying
/// integrand.
pub fn bessel_k_integral(nu: f64, x: f64) -> f64 {
    let h: f64 = 1.0 / 128.0;
    let mut sum = 0.5 * (-x).exp();
    let mut t: f64 = h;
    loop {
        let log_term = -x * t.cosh() + nu * t;
        sum += log_term.exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp());
        // Terms decrease past the peak; stop once they no longer register.
        if t > 1.0 && log_term < sum.ln() - 40.0 {
            break;
        }
        t += h;
    }
    sum * h
}

/// Matérn half-integer closed forms and `K_2.4` against quadrature.
pub fn matern_bessel() -> CheckOutcome {
    timed("matern_bessel", || {
        let mut closed = 0.0f64;
        let ell = 1.7;
        for k in 1..=50 {
            let r = 0.2 * k as f64;
            let s = r / ell;
            let forms = [
                (0.5, (-s).exp()),
                (1.5, (1.0 + s) * (-s).exp()),
                (2.5, (1.0 + s + s * s / 3.0) * (-s).exp()),
            ];
            for (nu, want) in forms {
                let got = MaternParams::new(nu, ell, 1.0)?.kernel(r);
                closed = closed.max((got - want).abs() / want);
            }
        }
        let mut quad = 0.0f64;
        for k in 0..20 {
            let x = 0.05 * 10f64.powf(3.0 * k as f64 / 19.0);
            let want = bessel_k_integral(2.4, x);
            quad = quad.max((bessel_k(2.4, x)? - want).abs() / want);
        }
        Ok((
            closed <= 1e-9 && quad <= 1e-8,
            format!("closed forms {closed:.1e} (tol 1e-9) at 50 radii; K_2.4 vs quadrature {quad:.1e} (tol 1e-8) at 20 points"),
        ))
    })
}

/// Every suite. `fast` trims instance counts and the largest grid.
pub fn run_all(fast: bool) -> Vec<CheckOutcome> {
    if fast {
        vec![
            woodbury_equivalence(10),
            adjoint_and_jacobian(&[9], 5),
            sketch_unbiasedness(100_000),
            averaging_law(200),
            convergence_rates(),
            full_batch_reduction(50),
            matern_bessel(),
        ]
    } else {
        vec![
            woodbury_equivalence(50),
            adjoint_and_jacobian(&[9, 13, 17], 20),
            sketch_unbiasedness(100_000),
            averaging_law(200),
            convergence_rates(),
            full_batch_reduction(50),
            matern_bessel(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_matches_closed_form() {
        for x in [0.05, 0.5, 1.0, 7.0, 40.0] {
            let want = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp();
            let got = bessel_k_integral(0.5, x);
            assert!((got - want).abs() <= 1e-13 * want, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn fast_suites_pass() {
        for o in run_all(true) {
            assert!(o.passed, "{}", o.line());
        }
    }
}
