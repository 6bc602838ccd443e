use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor_graph::{exact_marginals, Assignment, FactorGraph};
use crate::optimizers::{ConstraintSet, StochasticProblem};

/// `f(x, θ) = ½‖x − Tθ‖²` for a fixed `dim × n` loading matrix `T`.
///
/// The expectation is `½‖x − T E[θ]‖²` plus a constant, so the constrained
/// optimum is the projection of `T E[θ]` and `μ = L = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticProblem {
    pub model: FactorGraph,
    pub loading: Vec<Vec<f64>>,
}

impl QuadraticProblem {
    pub fn new(model: FactorGraph, loading: Vec<Vec<f64>>) -> Result<Self> {
        if loading.is_empty() {
            return Err(Error::Dimension("loading matrix has no rows".into()));
        }
        if loading.iter().any(|r| r.len() != model.num_vars()) {
            return Err(Error::Dimension(format!(
                "loading rows must have {} columns",
                model.num_vars()
            )));
        }
        if loading.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("loading matrix".into()));
        }
        Ok(QuadraticProblem { model, loading })
    }

    /// One variable with `Pr(θ = 1) = p`, and `f(x, θ) = ½(x − θ)²`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(FactorGraph::independent(&[p])?, vec![vec![1.0]])
    }

    /// `f(x) = ½‖x‖²` with no dependence on `θ`.
    pub fn deterministic(dim: usize) -> Self {
        Self::new(FactorGraph::uniform(1), vec![vec![0.0]; dim.max(1)]).unwrap()
    }

    /// `T E[θ]`, the unconstrained minimizer.
    pub fn target(&self) -> Result<Vec<f64>> {
        let m = exact_marginals(&self.model)?.marginals;
        Ok(self
            .loading
            .iter()
            .map(|r| r.iter().zip(&m).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn optimum(&self, constraints: &ConstraintSet) -> Result<Vec<f64>> {
        constraints.project(&self.target()?)
    }

    fn shift(&self, theta: &Assignment) -> Vec<f64> {
        self.loading
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, a)| a * theta.value(j)).sum())
            .collect()
    }
}

impl StochasticProblem for QuadraticProblem {
    fn dim(&self) -> usize {
        self.loading.len()
    }

    fn model(&self) -> &FactorGraph {
        &self.model
    }

    fn value(&self, x: &[f64], theta: &Assignment) -> f64 {
        0.5 * x
            .iter()
            .zip(self.shift(theta))
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
    }

    fn gradient(&self, x: &[f64], theta: &Assignment) -> Vec<f64> {
        x.iter().zip(self.shift(theta)).map(|(a, b)| a - b).collect()
    }
}
