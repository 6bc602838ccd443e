//! Benchmark problems: a quadratic toy, multi-material inventory and
//! network design under random edge failures.

mod inventory;
mod network;
mod quadratic;

pub use inventory::{gen_inventory, random_clique_model, InventoryInstance};
pub use network::{
    gen_network, parse_edge_list, Edge, NetworkInstance, NetworkKind, DEFAULT_BUDGET,
    DEFAULT_DISCONNECTION_PENALTY, MAX_GENERATED_EDGES,
};
pub use quadratic::QuadraticProblem;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::optimizers::{ConstraintSet, StochasticProblem};

/// Uniform on `(0, hi]`.
pub(crate) fn uniform_open_closed<R: rand::Rng + ?Sized>(rng: &mut R, hi: f64) -> f64 {
    hi * (1.0 - rng.random::<f64>())
}

/// `E_θ f(x, θ)` by enumerating the problem's model.
pub fn evaluate_objective_exact<P: StochasticProblem + ?Sized>(problem: &P, x: &[f64]) -> Result<f64> {
    problem.expected_value(x)
}

/// Any benchmark instance, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Instance {
    Inventory(InventoryInstance),
    Network(NetworkInstance),
    Quadratic {
        #[serde(flatten)]
        problem: QuadraticProblem,
        constraints: ConstraintSet,
    },
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Inventory(_) => "inventory",
            Instance::Network(_) => "network",
            Instance::Quadratic { .. } => "quadratic",
        }
    }

    pub fn problem(&self) -> &dyn StochasticProblem {
        match self {
            Instance::Inventory(p) => p,
            Instance::Network(p) => p,
            Instance::Quadratic { problem, .. } => problem,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Instance::Inventory(p) => p.validate(),
            Instance::Network(p) => p.validate(),
            Instance::Quadratic { problem, constraints } => {
                QuadraticProblem::new(problem.model.clone(), problem.loading.clone())?;
                constraints.validate()
            }
        }
    }

    /// Feasible set at `percent` of the storage or budget limit. The toy
    /// ignores `percent` and uses its stored set.
    pub fn constraints(&self, percent: f64) -> Result<ConstraintSet> {
        match self {
            Instance::Inventory(p) => p.storage_constraint(percent),
            Instance::Network(p) => p.budget_constraint(percent),
            Instance::Quadratic { constraints, .. } => Ok(constraints.clone()),
        }
    }

    /// Random start inside `constraints`; the toy starts at the projection
    /// of the origin.
    pub fn initial_point<R: rand::Rng + ?Sized>(
        &self,
        constraints: &ConstraintSet,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        match self {
            Instance::Inventory(p) => p.initial_point(constraints, rng),
            Instance::Network(p) => p.initial_point(constraints, rng),
            Instance::Quadratic { problem, .. } => {
                constraints.project(&vec![0.0; problem.dim()])
            }
        }
    }

    /// Known optimum value, when it has a closed form.
    pub fn known_optimum(&self) -> Result<Option<f64>> {
        match self {
            Instance::Quadratic { problem, constraints } => {
                let x = problem.optimum(constraints)?;
                Ok(Some(problem.expected_value(&x)?))
            }
            _ => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn instances_round_trip_through_json() {
        let items = vec![
            Instance::Inventory(gen_inventory(3, 0).unwrap()),
            Instance::Network(gen_network(NetworkKind::Grid { rows: 2, cols: 2 }, 0).unwrap()),
            Instance::Quadratic {
                problem: QuadraticProblem::bernoulli(0.7).unwrap(),
                constraints: ConstraintSet::Box {
                    lower: vec![0.0],
                    upper: vec![0.5],
                },
            },
        ];
        for inst in items {
            let text = serde_json::to_string_pretty(&inst).unwrap();
            let back: Instance = serde_json::from_str(&text).unwrap();
            assert_eq!(back, inst);
        }
    }

    #[test]
    fn toy_optimum() {
        let inst = Instance::Quadratic {
            problem: QuadraticProblem::bernoulli(0.7).unwrap(),
            constraints: ConstraintSet::Box {
                lower: vec![f64::NEG_INFINITY],
                upper: vec![0.5],
            },
        };
        let c = inst.constraints(100.0).unwrap();
        let x0 = inst.initial_point(&c, &mut seeded(0)).unwrap();
        assert_eq!(x0, vec![0.0]);
        assert!((inst.known_optimum().unwrap().unwrap() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn constant_objective_evaluates_to_constant() {
        let p = QuadraticProblem::deterministic(2);
        assert!((evaluate_objective_exact(&p, &[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
    }
}
