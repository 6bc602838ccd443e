use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size rules. `k` starts at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `ρκ / (μ k)`.
    Plain,
    /// `2ρκ / (μ (k + 1))`.
    Improved,
    /// `initial`, divided by 10 after iteration 50 and again after 100.
    Piecewise { initial: f64 },
    Constant { step: f64 },
}

/// How iterates `x_1, …, x_K` are combined into the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// `(1/K) Σ x_k`.
    Uniform,
    /// `2 Σ k x_k / (K (K + 1))`.
    Weighted,
    Last,
}

impl StepSchedule {
    pub fn step(&self, k: usize, mu: f64, rho_kappa: f64) -> f64 {
        let k = k.max(1) as f64;
        match *self {
            StepSchedule::Plain => rho_kappa / (mu * k),
            StepSchedule::Improved => 2.0 * rho_kappa / (mu * (k + 1.0)),
            StepSchedule::Piecewise { initial } => piecewise(initial, k as usize),
            StepSchedule::Constant { step } => step,
        }
    }

    /// The averaging rule the schedule's rate guarantee is stated for.
    pub fn averaging(&self) -> Averaging {
        match self {
            StepSchedule::Improved => Averaging::Weighted,
            _ => Averaging::Uniform,
        }
    }

    /// Whether the step depends on `μ` and `ρκ`.
    pub fn is_theoretical(&self) -> bool {
        matches!(self, StepSchedule::Plain | StepSchedule::Improved)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Piecewise { initial: s } | StepSchedule::Constant { step: s }
                if !(s.is_finite() && s > 0.0) =>
            {
                Err(Error::InvalidConfig(format!("step size must be positive, got {s}")))
            }
            _ => Ok(()),
        }
    }
}

fn piecewise(initial: f64, k: usize) -> f64 {
    if k > 100 {
        initial / 100.0
    } else if k > 50 {
        initial / 10.0
    } else {
        initial
    }
}

/// Combines iterates according to `rule`. Panics on an empty slice.
pub fn average(points: &[Vec<f64>], rule: Averaging) -> Vec<f64> {
    assert!(!points.is_empty(), "nothing to average");
    let dim = points[0].len();
    let big_k = points.len() as f64;
    match rule {
        Averaging::Last => points[points.len() - 1].clone(),
        Averaging::Uniform => {
            let mut out = vec![0.0; dim];
            for p in points {
                for (o, v) in out.iter_mut().zip(p) {
                    *o += v;
                }
            }
            out.iter_mut().for_each(|o| *o /= big_k);
            out
        }
        Averaging::Weighted => {
            let mut out = vec![0.0; dim];
            for (i, p) in points.iter().enumerate() {
                let k = (i + 1) as f64;
                for (o, v) in out.iter_mut().zip(p) {
                    *o += k * v;
                }
            }
            let norm = 2.0 / (big_k * (big_k + 1.0));
            out.iter_mut().for_each(|o| *o *= norm);
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_formulas() {
        let t = StepSchedule::Plain.step(2, 1.0, 2f64.sqrt());
        assert!((t - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(StepSchedule::Improved.step(1, 2.0, 1.0), 0.5);
        let p = StepSchedule::Piecewise { initial: 0.1 };
        assert_eq!(p.step(50, 1.0, 1.0), 0.1);
        assert!((p.step(51, 1.0, 1.0) - 0.01).abs() < 1e-18);
        assert!((p.step(101, 1.0, 1.0) - 0.001).abs() < 1e-18);
    }

    #[test]
    fn averages() {
        let xs: Vec<Vec<f64>> = vec![vec![1.0], vec![2.0], vec![3.0]];
        assert!((average(&xs, Averaging::Weighted)[0] - 14.0 / 6.0).abs() < 1e-15);
        assert_eq!(average(&xs, Averaging::Uniform)[0], 2.0);
        assert_eq!(average(&xs, Averaging::Last)[0], 3.0);
    }

    #[test]
    fn schedule_pairs_with_averaging() {
        assert_eq!(StepSchedule::Plain.averaging(), Averaging::Uniform);
        assert_eq!(StepSchedule::Improved.averaging(), Averaging::Weighted);
    }

    #[test]
    fn rejects_bad_steps() {
        assert!(StepSchedule::Constant { step: 0.0 }.validate().is_err());
        assert!(StepSchedule::Piecewise { initial: f64::NAN }.validate().is_err());
        assert!(StepSchedule::Plain.validate().is_ok());
    }
}
