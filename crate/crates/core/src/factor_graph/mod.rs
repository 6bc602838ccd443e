//! Binary Markov random fields.
//!
//! A [`FactorGraph`] over `n` binary variables defines the unnormalized
//! weight `w(θ) = ∏_α φ_α(θ_α)` and the distribution `Pr(θ) = w(θ) / Z`.
//! Potential tables are indexed lexicographically over the factor's scope
//! with the last scope variable varying fastest, which is the UAI convention:
//! for scope `(a, b)` the table is `[φ(0,0), φ(0,1), φ(1,0), φ(1,1)]`.
//!
//! Assignments can also be addressed by a packed index in which bit `i`
//! holds the value of variable `i`. All enumeration routines walk indices
//! `0..2^n` in that order.

mod exact;
mod uai;

pub use exact::{
    exact_expectation, exact_marginals, log_partition_function, partition_function,
    Enumeration, ExactDistribution, ExactInference, DEFAULT_ENUMERATION_CAP,
};
pub use uai::{load_uai, to_uai};

use crate::error::{Error, Result};

/// A potential over an ordered, duplicate-free set of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<usize>,
    table: Vec<f64>,
    log_table: Vec<f64>,
}

impl Factor {
    /// Builds a factor, checking the table length and that every entry is
    /// strictly positive and finite.
    pub fn new(scope: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        if scope.is_empty() {
            return Err(Error::InvalidModel("empty factor scope".into()));
        }
        if scope.len() > 30 {
            return Err(Error::InvalidModel(format!(
                "factor scope of {} variables is too large",
                scope.len()
            )));
        }
        let mut sorted = scope.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != scope.len() {
            return Err(Error::InvalidModel(format!(
                "duplicate variable in factor scope {scope:?}"
            )));
        }
        if table.len() != 1usize << scope.len() {
            return Err(Error::InvalidModel(format!(
                "table length {} does not match scope size {} (expected {})",
                table.len(),
                scope.len(),
                1usize << scope.len()
            )));
        }
        if let Some(&bad) = table.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::BadTableEntry {
                factor: usize::MAX,
                value: bad,
            });
        }
        let log_table = table.iter().map(|v| v.ln()).collect();
        Ok(Factor {
            scope,
            table,
            log_table,
        })
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn log_table(&self) -> &[f64] {
        &self.log_table
    }

    /// Table position of the packed assignment `index`.
    #[inline]
    pub fn table_index(&self, index: u64) -> usize {
        let mut t = 0usize;
        for &v in &self.scope {
            t = (t << 1) | ((index >> v) & 1) as usize;
        }
        t
    }

    #[inline]
    pub fn log_value(&self, index: u64) -> f64 {
        self.log_table[self.table_index(index)]
    }
}

/// A full assignment of the model's binary variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Assignment { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Assignment {
            bits: vec![false; n],
        }
    }

    /// Unpacks `index` (bit `i` = variable `i`) into an assignment of `n` bits.
    pub fn from_index(index: u64, n: usize) -> Self {
        Assignment {
            bits: (0..n).map(|i| (index >> i) & 1 == 1).collect(),
        }
    }

    pub fn index(&self) -> u64 {
        debug_assert!(self.bits.len() <= 64);
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Value of variable `i` as `0.0` or `1.0`.
    pub fn value(&self, i: usize) -> f64 {
        if self.bits[i] {
            1.0
        } else {
            0.0
        }
    }
}

impl std::fmt::Display for Assignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Binary Markov random field. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    num_vars: usize,
    factors: Vec<Factor>,
    var_factors: Vec<Vec<usize>>,
}

impl FactorGraph {
    pub fn new(num_vars: usize, factors: Vec<Factor>) -> Result<Self> {
        if num_vars > 64 {
            return Err(Error::InvalidModel(format!(
                "{num_vars} variables exceeds the 64-variable limit"
            )));
        }
        let mut var_factors = vec![Vec::new(); num_vars];
        for (fi, f) in factors.iter().enumerate() {
            for &v in f.scope() {
                if v >= num_vars {
                    return Err(Error::InvalidModel(format!(
                        "factor {fi} references variable {v} but the model has {num_vars}"
                    )));
                }
                var_factors[v].push(fi);
            }
        }
        Ok(FactorGraph {
            num_vars,
            factors,
            var_factors,
        })
    }

    /// Model in which every configuration has weight one.
    pub fn uniform(num_vars: usize) -> Self {
        let factors = (0..num_vars)
            .map(|i| Factor::new(vec![i], vec![1.0, 1.0]).unwrap())
            .collect();
        FactorGraph::new(num_vars, factors).unwrap()
    }

    /// Independent variables with `Pr(θ_i = 1) = probs[i]`.
    pub fn independent(probs: &[f64]) -> Result<Self> {
        let factors = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| Factor::new(vec![i], vec![1.0 - p, p]))
            .collect::<Result<Vec<_>>>()?;
        FactorGraph::new(probs.len(), factors)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Indices of the factors whose scope contains `var`.
    pub fn factors_of(&self, var: usize) -> &[usize] {
        &self.var_factors[var]
    }

    pub fn log_weight_index(&self, index: u64) -> f64 {
        self.factors.iter().map(|f| f.log_value(index)).sum()
    }

    pub fn log_weight(&self, a: &Assignment) -> f64 {
        debug_assert_eq!(a.len(), self.num_vars);
        self.log_weight_index(a.index())
    }

    /// Unnormalized weight `∏_α φ_α(a_α)`. May overflow for large models;
    /// use [`Self::log_weight`] there.
    pub fn weight(&self, a: &Assignment) -> f64 {
        debug_assert_eq!(a.len(), self.num_vars);
        let idx = a.index();
        self.factors
            .iter()
            .map(|f| f.table()[f.table_index(idx)])
            .product()
    }

    /// Graph over the variables of `self` followed by those of `other`.
    pub fn disjoint_union(&self, other: &FactorGraph) -> Result<FactorGraph> {
        let shift = self.num_vars;
        let mut factors = self.factors.clone();
        for f in &other.factors {
            factors.push(Factor::new(
                f.scope().iter().map(|v| v + shift).collect(),
                f.table().to_vec(),
            )?);
        }
        FactorGraph::new(self.num_vars + other.num_vars, factors)
    }
}
