use serde::{Deserialize, Serialize};

use super::constraints::ConstraintSet;
use super::estimator::GradientEstimator;
use super::pgd::Recorder;
use super::problem::StochasticProblem;
use super::schedule::Averaging;
use super::trace::RunTrace;
use crate::error::{Error, Result};
use crate::numerics::{Cholesky, DenseMatrix};

/// Primal-dual augmented Lagrangian settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlConfig {
    pub iterations: usize,
    /// Penalty weight `β`.
    pub beta: f64,
    /// Dual-ball radius `τ` of the rate bound; reported, not used in updates.
    pub tau: f64,
    /// Domain diameter `D_X`.
    pub domain_diameter: f64,
    /// Gradient-norm bound `M`.
    pub grad_bound: f64,
    pub x0: Vec<f64>,
}

impl AlConfig {
    pub fn new(iterations: usize, beta: f64, x0: Vec<f64>) -> Self {
        AlConfig {
            iterations,
            beta,
            tau: 1.0,
            domain_diameter: 2.0,
            grad_bound: 2.0,
            x0,
        }
    }

    /// `η_k = D_X / (M √(2k))`.
    pub fn eta(&self, k: usize) -> f64 {
        self.domain_diameter / (self.grad_bound * (2.0 * k as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::NonPositivePenalty);
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iteration count K must be at least 1".into()));
        }
        for (name, v) in [
            ("tau", self.tau),
            ("domain diameter", self.domain_diameter),
            ("gradient bound", self.grad_bound),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Linearized augmented Lagrangian method for `min E f(x, θ)` subject to
/// `Ax + b = 0`.
///
/// Step `k` solves `(βAᵀA + I/η) x = x_k/η − ḡ_k − Aᵀλ_k − βAᵀb` with
/// `η = η_{k+1}`, then sets `λ_{k+1} = λ_k + β(Ax_{k+1} + b)`. Record `k`
/// holds `x_k` for `k = 1, …, K` and the output is their uniform average.
pub fn primal_dual_al<P, R>(
    problem: &P,
    constraints: &ConstraintSet,
    cfg: &AlConfig,
    estimator: &mut GradientEstimator<'_>,
    rng: &mut R,
) -> Result<(Vec<f64>, RunTrace)>
where
    P: StochasticProblem + ?Sized,
    R: rand::Rng + ?Sized,
{
    cfg.validate()?;
    let ConstraintSet::EqualityAffine { a, b } = constraints else {
        return Err(Error::InvalidConfig(
            "the augmented Lagrangian method needs equality constraints Ax + b = 0".into(),
        ));
    };
    constraints.validate()?;
    let dim = problem.dim();
    if cfg.x0.len() != dim || constraints.dim() != dim {
        return Err(Error::Dimension("x0, problem and constraints disagree".into()));
    }
    let am = DenseMatrix::from_rows(a)?;
    let at = am.transpose();
    let ata = at.matmul(&am)?;
    let at_b = at.matvec(b)?;
    let mut lambda = vec![0.0; a.len()];
    let mut x = cfg.x0.clone();
    let mut rec = Recorder::new("al-primal-dual", None);
    for k in 0..cfg.iterations {
        let est = estimator.estimate(problem, &x, rng)?;
        let eta = cfg.eta(k + 1);
        let mut h = DenseMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                h[(i, j)] = cfg.beta * ata[(i, j)];
            }
        }
        h.add_scaled_identity(1.0 / eta);
        let at_l = at.matvec(&lambda)?;
        let rhs: Vec<f64> = (0..dim)
            .map(|i| x[i] / eta - est.gradient[i] - at_l[i] - cfg.beta * at_b[i])
            .collect();
        x = Cholesky::factor(&h)?.solve_vec(&rhs);
        let r: Vec<f64> = am.matvec(&x)?.iter().zip(b).map(|(u, v)| u + v).collect();
        for (l, ri) in lambda.iter_mut().zip(&r) {
            *l += cfg.beta * ri;
        }
        rec.push(k + 1, &x, eta, constraints.residual(&x), Some(&est));
        rec.push_multipliers(&lambda);
    }
    Ok(rec.finish(Averaging::Uniform, constraints))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::EstimatorMode;
    use crate::problems::QuadraticProblem;
    use crate::rng::seeded;

    fn line() -> ConstraintSet {
        ConstraintSet::EqualityAffine {
            a: vec![vec![1.0, 1.0]],
            b: vec![-1.0],
        }
    }

    fn run(k: usize, c: &ConstraintSet, beta: f64) -> Result<(Vec<f64>, RunTrace)> {
        let p = QuadraticProblem::deterministic(2);
        let mut rng = seeded(0);
        let mut est = GradientEstimator::new(&EstimatorMode::Exact, 1, p.model(), &mut rng)?;
        primal_dual_al(&p, c, &AlConfig::new(k, beta, vec![0.0, 0.0]), &mut est, &mut rng)
    }

    #[test]
    fn converges_to_projection_of_origin() {
        let (x, trace) = run(2000, &line(), 1.0).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-2 && (x[1] - 0.5).abs() < 1e-2, "{x:?}");
        assert!(trace.output_residual <= 1e-2);
        assert_eq!(trace.multipliers.len(), 2000);
    }

    #[test]
    fn optimal_start_stays_put() {
        let c = ConstraintSet::EqualityAffine {
            a: vec![vec![1.0, 1.0]],
            b: vec![0.0],
        };
        let (x, _) = run(50, &c, 1.0).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_penalty_rejected() {
        let err = run(10, &line(), 0.0).unwrap_err();
        assert_eq!(err.to_string(), "penalty must be positive");
    }

    #[test]
    fn inequality_sets_rejected() {
        let c = ConstraintSet::unconstrained(2);
        assert!(matches!(run(10, &c, 1.0), Err(Error::InvalidConfig(_))));
    }
}
