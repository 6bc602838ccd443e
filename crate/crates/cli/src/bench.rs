use std::fmt::Write as _;

use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xorpgd::optimizers::FEASIBILITY_TOL;
use xorpgd::problems::{evaluate_objective_exact, gen_inventory, gen_network, Instance, NetworkKind};
use xorpgd::rng::{derive_seed, seeded};
use xorpgd::Result;

use crate::run::{run_method, EstimatorKind, Method, RunSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Inventory,
    Network,
}

/// One competitor: an optimizer paired with a scenario source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entrant {
    pub label: &'static str,
    pub method: Method,
    pub estimator: EstimatorKind,
    /// Multiplier on the per-iteration sample count.
    pub sample_factor: usize,
}

/// Stream for the shared starting point of a cell.
pub const X0_STREAM: u64 = 0x5_7a27;

/// The reference method savings are reported for.
pub const REFERENCE: &str = "ixor-pgd";

/// Competitors in report order; the MCMC and BP baselines get
/// `baseline_factor` times as many samples per iteration.
pub fn entrants(baseline_factor: usize) -> Vec<Entrant> {
    let e = |label, method, estimator, sample_factor| Entrant {
        label,
        method,
        estimator,
        sample_factor,
    };
    vec![
        e(REFERENCE, Method::IxorPgd, EstimatorKind::Xor, 1),
        e("xor-pgd", Method::XorPgd, EstimatorKind::Xor, 1),
        e("xor-sgd-penalty", Method::XorSgdPenalty, EstimatorKind::Xor, 1),
        e("gibbs-sgd-penalty", Method::XorSgdPenalty, EstimatorKind::Gibbs, baseline_factor),
        e("bp-sgd-penalty", Method::XorSgdPenalty, EstimatorKind::Bp, baseline_factor),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub size: String,
    pub seed: u64,
    pub method: String,
    /// Exact expected cost of the output (without the regularizer).
    pub objective: f64,
    pub residual: f64,
    pub attempts: usize,
    /// `(obj(this) − obj(reference)) / obj(this)` in percent.
    pub savings_pct: f64,
}

impl CellResult {
    pub fn feasible(&self) -> bool {
        self.residual <= FEASIBILITY_TOL
    }
}

/// Instance for one benchmark size: `n` materials, or a network family.
pub fn make_instance(suite: Suite, size: &str, seed: u64) -> Result<Instance> {
    match suite {
        Suite::Inventory => {
            let n = size.parse().map_err(|_| {
                xorpgd::Error::InvalidConfig(format!("inventory size must be an integer, got `{size}`"))
            })?;
            Ok(Instance::Inventory(gen_inventory(n, seed)?))
        }
        Suite::Network => {
            let kind: NetworkKind = size.parse()?;
            Ok(Instance::Network(gen_network(kind, seed)?))
        }
    }
}

/// Savings of `reference` over `other`, in percent.
pub fn savings_pct(other: f64, reference: f64) -> f64 {
    100.0 * (other - reference) / other
}

/// Runs every entrant on one generated instance from the same start.
pub fn run_cell(
    suite: Suite,
    size: &str,
    seed: u64,
    percent: f64,
    settings: &RunSettings,
    baseline_factor: usize,
) -> Result<Vec<CellResult>> {
    let inst = make_instance(suite, size, seed)?;
    let constraints = inst.constraints(percent)?;
    let x0 = inst.initial_point(&constraints, &mut seeded(derive_seed(seed, X0_STREAM)))?;
    let mut out = Vec::new();
    for e in entrants(baseline_factor) {
        let (x, trace) = run_method(
            inst.problem(),
            &constraints,
            x0.clone(),
            e.method,
            e.estimator,
            settings.samples * e.sample_factor,
            settings,
            seed,
        )?;
        out.push(CellResult {
            size: size.to_string(),
            seed,
            method: e.label.to_string(),
            objective: evaluate_objective_exact(inst.problem(), &x)?,
            residual: trace.output_residual,
            attempts: trace.total_attempts,
            savings_pct: 0.0,
        });
    }
    let reference = out[0].objective;
    for r in &mut out {
        r.savings_pct = savings_pct(r.objective, reference);
    }
    Ok(out)
}

/// All `(size, seed)` cells, run concurrently and returned in grid order.
pub fn run_suite(
    suite: Suite,
    sizes: &[String],
    seeds: &[u64],
    percent: f64,
    settings: &RunSettings,
    baseline_factor: usize,
) -> Result<Vec<CellResult>> {
    let cells: Vec<(&String, u64)> = sizes
        .iter()
        .flat_map(|s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let results: Vec<Result<Vec<CellResult>>> = cells
        .par_iter()
        .map(|(size, seed)| run_cell(suite, size, *seed, percent, settings, baseline_factor))
        .collect();
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

pub const RESULTS_HEADER: &str = "size,seed,method,objective,residual,feasible,attempts,savings_pct";
pub const SUMMARY_HEADER: &str = "size,method,runs,mean_objective,mean_savings_pct,satisfaction_pct";

pub fn results_csv(rows: &[CellResult]) -> String {
    let mut s = format!("{RESULTS_HEADER}\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.size,
            r.seed,
            r.method,
            r.objective,
            r.residual,
            r.feasible(),
            r.attempts,
            r.savings_pct
        )
        .unwrap();
    }
    s
}

/// Per `(size, method)`: mean objective, mean savings of the reference
/// method against it, and the share of feasible outputs.
pub fn summary_csv(rows: &[CellResult]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        let k = (r.size.as_str(), r.method.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    for (size, method) in keys {
        let group: Vec<&CellResult> = rows
            .iter()
            .filter(|r| r.size == size && r.method == method)
            .collect();
        let n = group.len() as f64;
        let mean_obj = group.iter().map(|r| r.objective).sum::<f64>() / n;
        let mean_sav = group.iter().map(|r| r.savings_pct).sum::<f64>() / n;
        let sat = 100.0 * group.iter().filter(|r| r.feasible()).count() as f64 / n;
        writeln!(s, "{size},{method},{},{mean_obj},{mean_sav},{sat}", group.len()).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn savings_against_self_is_zero() {
        assert_eq!(savings_pct(12.5, 12.5), 0.0);
        assert_eq!(savings_pct(10.0, 9.0), 10.0);
    }

    #[test]
    fn bad_sizes_rejected() {
        assert!(make_instance(Suite::Inventory, "ten", 0).is_err());
        assert!(make_instance(Suite::Network, "ring", 0).is_err());
    }
}
