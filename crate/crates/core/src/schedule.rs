//! Regularization-parameter schedules `alpha_n`.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSchedule {
    /// `alpha_n = alpha0`.
    Constant { alpha0: f64 },
    /// `alpha_n = alpha0 * gamma^n`.
    Geometric { alpha0: f64, gamma: f64 },
    /// `alpha_n = alpha0 * (n + 1)^(-exponent)`.
    Power {
        alpha0: f64,
        #[serde(alias = "power_exponent")]
        exponent: f64,
    },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        let alpha0 = self.alpha0();
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(validation("alpha0 must be positive and finite"));
        }
        match *self {
            StepSchedule::Geometric { gamma, .. } if !(gamma > 0.0 && gamma <= 1.0) => {
                Err(validation("geometric gamma must lie in (0, 1]"))
            }
            StepSchedule::Power { exponent, .. } if !(exponent > 0.0 && exponent.is_finite()) => {
                Err(validation("power exponent must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn alpha0(&self) -> f64 {
        match *self {
            StepSchedule::Constant { alpha0 }
            | StepSchedule::Geometric { alpha0, .. }
            | StepSchedule::Power { alpha0, .. } => alpha0,
        }
    }

    /// Regularization parameter at iteration `n`.
    pub fn alpha(&self, n: usize) -> f64 {
        match *self {
            StepSchedule::Constant { alpha0 } => alpha0,
            StepSchedule::Geometric { alpha0, gamma } => alpha0 * gamma.powi(n as i32),
            StepSchedule::Power { alpha0, exponent } => alpha0 * ((n + 1) as f64).powf(-exponent),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schedule_values() {
        assert_eq!(StepSchedule::Constant { alpha0: 0.5 }.alpha(100), 0.5);
        let g = StepSchedule::Geometric {
            alpha0: 0.5,
            gamma: 0.9,
        };
        assert!((g.alpha(2) - 0.405).abs() < 1e-15);
        let p = StepSchedule::Power {
            alpha0: 0.5,
            exponent: 0.9,
        };
        assert_eq!(p.alpha(0), 0.5);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(StepSchedule::Constant { alpha0: 0.0 }.validate().is_err());
        assert!(StepSchedule::Geometric {
            alpha0: 1.0,
            gamma: 1.5
        }
        .validate()
        .is_err());
        assert!(StepSchedule::Power {
            alpha0: 1.0,
            exponent: -1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn long_exponent_name_is_accepted() {
        let s: StepSchedule = toml::from_str("kind = \"power\"\nalpha0 = 0.5\npower_exponent = 0.9").unwrap();
        assert_eq!(
            s,
            StepSchedule::Power {
                alpha0: 0.5,
                exponent: 0.9
            }
        );
    }

    proptest! {
        #[test]
        fn monotone_and_positive(alpha0 in 1e-3f64..10.0, gamma in 0.2f64..1.0, p in 0.1f64..2.0, n in 0usize..400) {
            let g = StepSchedule::Geometric { alpha0, gamma };
            let pw = StepSchedule::Power { alpha0, exponent: p };
            prop_assert!(g.alpha(n) > 0.0 && pw.alpha(n) > 0.0);
            prop_assert!(g.alpha(n + 1) <= g.alpha(n));
            prop_assert!(pw.alpha(n + 1) <= pw.alpha(n));
            let ratio = g.alpha(n) / g.alpha(n + 1);
            prop_assert!((ratio * gamma - 1.0).abs() <= 1e-12);
        }
    }
}
