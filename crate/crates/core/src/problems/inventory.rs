use rand::seq::index::sample as sample_indices;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::uniform_open_closed;
use crate::error::{Error, Result};
use crate::factor_graph::{Assignment, Factor, FactorGraph};
use crate::optimizers::{ConstraintSet, StochasticProblem};
use crate::rng::{derive_seed, seeded};

/// Multi-material newsvendor with binary demand levels.
///
/// Material `i` costs `c_i x_i + b_i [d_i − x_i]⁺ + h_i [x_i − d_i]⁺` and
/// its demand is `d_high_i` when `θ_i = 1`, `d_low_i` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryInstance {
    pub order_cost: Vec<f64>,
    pub backorder_cost: Vec<f64>,
    pub holding_cost: Vec<f64>,
    /// Storage used per unit of material.
    pub storage: Vec<f64>,
    /// Storage capacity at the 100% limit.
    pub storage_cap: f64,
    pub demand_low: Vec<f64>,
    pub demand_high: Vec<f64>,
    pub model: FactorGraph,
}

fn hinge(v: f64) -> f64 {
    v.max(0.0)
}

impl InventoryInstance {
    pub fn validate(&self) -> Result<()> {
        let n = self.order_cost.len();
        let lens = [
            self.backorder_cost.len(),
            self.holding_cost.len(),
            self.storage.len(),
            self.demand_low.len(),
            self.demand_high.len(),
            self.model.num_vars(),
        ];
        if n == 0 || lens.iter().any(|&l| l != n) {
            return Err(Error::Dimension("inventory vectors must share one length n >= 1".into()));
        }
        let positive = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if !(positive(&self.order_cost)
            && positive(&self.holding_cost)
            && positive(&self.storage)
            && positive(&self.demand_low)
            && positive(&self.demand_high))
        {
            return Err(Error::InvalidModel("costs, storage and demands must be positive".into()));
        }
        if self
            .backorder_cost
            .iter()
            .zip(&self.order_cost)
            .any(|(b, c)| !(b >= c) || !b.is_finite())
        {
            return Err(Error::InvalidModel("back-order cost must be at least the order cost".into()));
        }
        if !(self.storage_cap.is_finite() && self.storage_cap > 0.0) {
            return Err(Error::InvalidModel("storage cap must be positive".into()));
        }
        Ok(())
    }

    pub fn num_materials(&self) -> usize {
        self.order_cost.len()
    }

    pub fn demand(&self, theta: &Assignment) -> Vec<f64> {
        (0..self.num_materials())
            .map(|i| {
                if theta.get(i) {
                    self.demand_high[i]
                } else {
                    self.demand_low[i]
                }
            })
            .collect()
    }

    fn cost_unchecked(&self, x: &[f64], d: &[f64]) -> f64 {
        (0..x.len())
            .map(|i| {
                self.order_cost[i] * x[i]
                    + self.backorder_cost[i] * hinge(d[i] - x[i])
                    + self.holding_cost[i] * hinge(x[i] - d[i])
            })
            .sum()
    }

    /// Total cost of stocking `x` when demand turns out to be `d`.
    pub fn cost(&self, x: &[f64], d: &[f64]) -> Result<f64> {
        if x.len() != self.num_materials() || d.len() != x.len() {
            return Err(Error::Dimension("stock and demand must have length n".into()));
        }
        if let Some(v) = x.iter().find(|v| **v < 0.0) {
            return Err(Error::Infeasible(format!("negative stock {v}")));
        }
        Ok(self.cost_unchecked(x, d))
    }

    /// `c_i − b_i 1[d_i > x_i] + h_i 1[x_i > d_i]`; equality takes neither hinge.
    pub fn subgradient(&self, x: &[f64], d: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut g = self.order_cost[i];
                if d[i] > x[i] {
                    g -= self.backorder_cost[i];
                } else if x[i] > d[i] {
                    g += self.holding_cost[i];
                }
                g
            })
            .collect()
    }

    /// `{x ≥ 0, wᵀx ≤ percent/100 · X}`.
    pub fn storage_constraint(&self, percent: f64) -> Result<ConstraintSet> {
        if !(percent.is_finite() && percent >= 0.0) {
            return Err(Error::InvalidConfig(format!("storage percent must be >= 0, got {percent}")));
        }
        ConstraintSet::nonneg_halfspace(self.storage.clone(), self.storage_cap * percent / 100.0)
    }

    /// `|N(5, 3)|` per coordinate, projected onto `constraints`.
    pub fn initial_point<R: rand::Rng + ?Sized>(
        &self,
        constraints: &ConstraintSet,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let normal = Normal::new(5.0, 3.0).expect("valid normal");
        let x: Vec<f64> = (0..self.num_materials())
            .map(|_| Distribution::<f64>::sample(&normal, rng).abs())
            .collect();
        constraints.project(&x)
    }
}

impl StochasticProblem for InventoryInstance {
    fn dim(&self) -> usize {
        self.num_materials()
    }

    fn model(&self) -> &FactorGraph {
        &self.model
    }

    fn value(&self, x: &[f64], theta: &Assignment) -> f64 {
        self.cost_unchecked(x, &self.demand(theta))
    }

    fn gradient(&self, x: &[f64], theta: &Assignment) -> Vec<f64> {
        self.subgradient(x, &self.demand(theta))
    }
}

const INVENTORY_STREAM: u64 = 0x1a7e_0001;

/// Entry `v_1 + v_2 v_3` with `v_1 ∈ (0,1)`, `v_2 ∈ {0,1}`, `v_3 ∈ (10,1000)`.
fn potential_entry<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let v1 = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    let v2 = f64::from(u8::from(rng.random_bool(0.5)));
    let v3 = loop {
        let u = rng.random_range(10.0..1000.0);
        if u > 10.0 {
            break u;
        }
    };
    v1 + v2 * v3
}

/// Random MRF with `[n, 2n]` cliques of size `[1, min(6, n)]`.
pub fn random_clique_model<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Result<FactorGraph> {
    let cliques = rng.random_range(n..=2 * n);
    let max_size = n.min(6);
    let factors = (0..cliques)
        .map(|_| {
            let size = rng.random_range(1..=max_size);
            let mut scope = sample_indices(rng, n, size).into_vec();
            scope.sort_unstable();
            let table = (0..1usize << size).map(|_| potential_entry(rng)).collect();
            Factor::new(scope, table)
        })
        .collect::<Result<Vec<_>>>()?;
    FactorGraph::new(n, factors)
}

/// Random instance: `c ∈ (0,5]`, `h ∈ (0,10]`, `b = c + s` with
/// `s ∈ (0,10]`, demands and storage weights in `(0,10]`, `X = 5n`.
pub fn gen_inventory(n: usize, seed: u64) -> Result<InventoryInstance> {
    if n == 0 {
        return Err(Error::InvalidConfig("inventory needs at least one material".into()));
    }
    let mut rng = seeded(derive_seed(seed, INVENTORY_STREAM));
    let mut draw = |hi: f64| -> Vec<f64> {
        (0..n).map(|_| uniform_open_closed(&mut rng, hi)).collect()
    };
    let order_cost = draw(5.0);
    let holding_cost = draw(10.0);
    let surcharge = draw(10.0);
    let storage = draw(10.0);
    let d1 = draw(10.0);
    let d2 = draw(10.0);
    let backorder_cost = order_cost.iter().zip(&surcharge).map(|(c, s)| c + s).collect();
    let demand_low = d1.iter().zip(&d2).map(|(a, b)| a.min(*b)).collect();
    let demand_high = d1.iter().zip(&d2).map(|(a, b)| a.max(*b)).collect();
    let model = random_clique_model(n, &mut rng)?;
    let inst = InventoryInstance {
        order_cost,
        backorder_cost,
        holding_cost,
        storage,
        storage_cap: 5.0 * n as f64,
        demand_low,
        demand_high,
        model,
    };
    inst.validate()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(p: f64, low: f64, high: f64) -> InventoryInstance {
        InventoryInstance {
            order_cost: vec![1.0],
            backorder_cost: vec![2.0],
            holding_cost: vec![0.5],
            storage: vec![1.0],
            storage_cap: 5.0,
            demand_low: vec![low],
            demand_high: vec![high],
            model: FactorGraph::independent(&[p]).unwrap(),
        }
    }

    #[test]
    fn cost_examples() {
        let inst = single(0.5, 1.0, 2.0);
        assert_eq!(inst.cost(&[3.0], &[5.0]).unwrap(), 7.0);
        assert_eq!(inst.cost(&[5.0], &[3.0]).unwrap(), 6.0);
        assert_eq!(inst.cost(&[4.0], &[4.0]).unwrap(), 4.0);
        assert!(matches!(inst.cost(&[-1.0], &[4.0]), Err(Error::Infeasible(_))));
    }

    #[test]
    fn subgradient_examples() {
        let inst = single(0.5, 1.0, 2.0);
        assert_eq!(inst.subgradient(&[3.0], &[5.0]), vec![-1.0]);
        assert_eq!(inst.subgradient(&[5.0], &[3.0]), vec![1.5]);
        assert_eq!(inst.subgradient(&[4.0], &[4.0]), vec![1.0]);
    }

    #[test]
    fn two_scenario_expectation() {
        let inst = single(0.75, 2.0, 6.0);
        let v = inst.expected_value(&[4.0]).unwrap();
        assert!((v - 7.25).abs() < 1e-12);
    }

    #[test]
    fn generator_ranges() {
        for seed in 0..20 {
            let inst = gen_inventory(10, seed).unwrap();
            let k = inst.model.factors().len();
            assert!((10..=20).contains(&k));
            assert!(inst.model.factors().iter().all(|f| (1..=6).contains(&f.scope().len())));
            for i in 0..10 {
                assert!(inst.backorder_cost[i] >= inst.order_cost[i]);
                assert!(inst.order_cost[i] > 0.0 && inst.order_cost[i] <= 5.0);
                assert!(inst.holding_cost[i] <= 10.0 && inst.storage[i] <= 10.0);
                assert!(inst.demand_low[i] <= inst.demand_high[i] && inst.demand_high[i] <= 10.0);
            }
            for f in inst.model.factors() {
                assert!(f.table().iter().all(|v| *v > 0.0 && *v < 1001.0));
            }
            assert_eq!(inst.storage_cap, 50.0);
        }
    }

    #[test]
    fn generator_is_seeded() {
        assert_eq!(gen_inventory(10, 3).unwrap(), gen_inventory(10, 3).unwrap());
        assert_ne!(gen_inventory(10, 3).unwrap(), gen_inventory(10, 4).unwrap());
    }

    #[test]
    fn storage_scaling() {
        let inst = gen_inventory(4, 1).unwrap();
        match inst.storage_constraint(50.0).unwrap() {
            ConstraintSet::NonnegHalfspace { cap, .. } => assert_eq!(cap, 10.0),
            other => panic!("unexpected {other:?}"),
        }
        let c = inst.storage_constraint(100.0).unwrap();
        let x0 = inst.initial_point(&c, &mut seeded(0)).unwrap();
        assert!(c.contains(&x0, 1e-9));
    }

    #[test]
    fn json_round_trip() {
        let inst = gen_inventory(5, 2).unwrap();
        let text = serde_json::to_string(&inst).unwrap();
        let back: InventoryInstance = serde_json::from_str(&text).unwrap();
        assert_eq!(back, inst);
    }
}
