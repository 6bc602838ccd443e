use crate::error::Result;
use crate::factor_graph::{Assignment, Enumeration, FactorGraph};

/// A stochastic objective `E_θ f(x, θ)` with `θ` drawn from a binary MRF.
pub trait StochasticProblem: Sync {
    fn dim(&self) -> usize;

    fn model(&self) -> &FactorGraph;

    /// Scenario cost `f(x, θ)`.
    fn value(&self, x: &[f64], theta: &Assignment) -> f64;

    /// A (sub)gradient of `f(·, θ)` at `x`.
    fn gradient(&self, x: &[f64], theta: &Assignment) -> Vec<f64>;

    /// Marks scenarios where `value`/`gradient` fall back to a surrogate.
    fn flagged(&self, _x: &[f64], _theta: &Assignment) -> bool {
        false
    }

    /// `E_θ f(x, θ)` by enumeration.
    fn expected_value(&self, x: &[f64]) -> Result<f64> {
        Enumeration::default().expectation(self.model(), |t| self.value(x, t))
    }
}

/// Adds `½ μ ‖x‖²` to a problem.
#[derive(Debug, Clone, Copy)]
pub struct Regularized<'a, P: ?Sized> {
    pub inner: &'a P,
    pub mu: f64,
}

impl<'a, P: StochasticProblem + ?Sized> Regularized<'a, P> {
    pub fn new(inner: &'a P, mu: f64) -> Self {
        Regularized { inner, mu }
    }
}

impl<P: StochasticProblem + ?Sized> StochasticProblem for Regularized<'_, P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn model(&self) -> &FactorGraph {
        self.inner.model()
    }

    fn value(&self, x: &[f64], theta: &Assignment) -> f64 {
        self.inner.value(x, theta) + 0.5 * self.mu * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], theta: &Assignment) -> Vec<f64> {
        let mut g = self.inner.gradient(x, theta);
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi += self.mu * xi;
        }
        g
    }

    fn flagged(&self, x: &[f64], theta: &Assignment) -> bool {
        self.inner.flagged(x, theta)
    }
}
