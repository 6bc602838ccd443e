use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use xorpgd::factor_graph::{load_uai, Enumeration, FactorGraph};
use xorpgd::optimizers::{ConstraintSet, GradientEstimator, RunSummary, RunTrace, FEASIBILITY_TOL};
use xorpgd::problems::{evaluate_objective_exact, Instance};
use xorpgd::rng::{derive_seed, seeded};

use crate::bench::{results_csv, run_suite, summary_csv, Suite};
use crate::output::{config_hash, with_hash, write_file, write_json};
use crate::run::{run_method, EstimatorKind, Method, RunSettings};

/// Bad flags or values; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn validated(r: xorpgd::Result<()>) -> Result<()> {
    r.map_err(|e| usage(e.to_string()))
}

#[derive(Debug, Parser)]
#[command(name = "xorpgd", version, about = "Stochastic optimization with XOR-sampled gradients")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw samples from a UAI model and compare frequencies to exact probabilities.
    Sample(SampleArgs),
    /// Run one optimizer on one instance.
    Optimize(OptimizeArgs),
    /// Compare all optimizers on generated instances.
    Bench(BenchArgs),
    /// Write a generated benchmark instance as JSON.
    Generate(GenerateArgs),
}

/// XOR sampler knobs.
#[derive(Debug, Clone, Args, Serialize)]
pub struct XorArgs {
    /// Pivot: target number of solutions per accepted cell.
    #[arg(long, default_value_t = 100)]
    pub pivot: usize,
    /// Bits per weight bucket.
    #[arg(long, default_value_t = 7)]
    pub b: u32,
    /// Probability mass allowed in the dropped tail.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Product ρκ; must lie in [1, √2].
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    pub rho_kappa: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    #[serde(skip)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = EstimatorKind::Xor)]
    pub estimator: EstimatorKind,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub xor: XorArgs,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OptimizeArgs {
    /// Instance JSON.
    #[arg(long)]
    #[serde(skip)]
    pub instance: PathBuf,
    /// UAI file replacing the instance's scenario model.
    #[arg(long)]
    #[serde(skip)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long, value_enum, default_value_t = EstimatorKind::Xor)]
    pub estimator: EstimatorKind,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    #[command(flatten)]
    pub xor: XorArgs,
    /// Declared strong-convexity constant used by the step rules.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Weight of the added ½μ‖x‖² term; 0 for quadratic instances, 1e-3 otherwise.
    #[arg(long)]
    pub mu_reg: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub sgd_step: f64,
    /// Augmented Lagrangian penalty β.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Storage limit as a percentage (inventory instances).
    #[arg(long)]
    pub storage_pct: Option<f64>,
    /// Budget limit as a percentage (network instances).
    #[arg(long)]
    pub budget_pct: Option<f64>,
    /// Wall-clock budget; the best exactly evaluated iterate is reported.
    #[arg(long)]
    pub time_limit_s: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Material counts, or network families (grid, grid-RxC, weak, strong).
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<String>>,
    /// Number of seeds per size, starting at `--seed`.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    /// Sample multiplier for the Gibbs and BP baselines.
    #[arg(long, default_value_t = 10)]
    pub baseline_factor: usize,
    #[command(flatten)]
    pub xor: XorArgs,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub mu_reg: f64,
    #[arg(long)]
    pub storage_pct: Option<f64>,
    #[arg(long)]
    pub budget_pct: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Material count, or a network family.
    #[arg(long)]
    pub size: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Sample(a) => cmd_sample(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Generate(a) => cmd_generate(a),
    }
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let inst = crate::bench::make_instance(a.suite, &a.size, a.seed).map_err(|e| usage(e.to_string()))?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_out(dir)?;
    }
    let mut text = serde_json::to_string_pretty(&inst)?;
    text.push('\n');
    fs::write(&a.out, text).with_context(|| format!("writing {}", a.out.display()))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn parse_model(bytes: &[u8], path: &Path) -> Result<FactorGraph> {
    let text = std::str::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    load_uai(text).with_context(|| format!("parsing {}", path.display()))
}

fn xor_settings(x: &XorArgs) -> RunSettings {
    RunSettings {
        pivot: x.pivot,
        b: x.b,
        epsilon: x.epsilon,
        rho_kappa: x.rho_kappa,
        ..RunSettings::default()
    }
}

/// Models up to this size also get a frequency report.
const FREQUENCY_REPORT_VARS: usize = 16;

#[derive(Serialize)]
struct SampleReport<'a> {
    config_hash: &'a str,
    estimator: EstimatorKind,
    samples: usize,
    attempts: usize,
}

pub fn cmd_sample(a: &SampleArgs) -> Result<()> {
    if a.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    let settings = xor_settings(&a.xor);
    let mode = settings.estimator_mode(a.estimator).map_err(|e| usage(e.to_string()))?;
    let bytes = read(&a.model)?;
    let fg = parse_model(&bytes, &a.model)?;
    let hash = config_hash(a, &[&bytes]);

    let mut rng = seeded(derive_seed(a.seed, 0x5a_4d01));
    let mut est = GradientEstimator::new(&mode, a.samples, &fg, &mut rng)?.with_workers(a.workers);
    let (draws, attempts) = est.draw(&mut rng)?;

    prepare_out(&a.out)?;
    let mut lines = String::with_capacity(draws.len() * (fg.num_vars() + 1));
    for d in &draws {
        lines.push_str(&d.to_string());
        lines.push('\n');
    }
    write_file(&a.out, "samples.txt", &lines)?;

    if fg.num_vars() <= FREQUENCY_REPORT_VARS {
        let dist = Enumeration::default().distribution(&fg)?;
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for d in &draws {
            *counts.entry(d.index()).or_default() += 1;
        }
        let mut csv = String::from("assignment,exact_p,empirical_p,ratio\n");
        for idx in 0..(1u64 << fg.num_vars()) {
            let p = dist.prob(idx);
            let q = counts.get(&idx).copied().unwrap_or(0) as f64 / draws.len() as f64;
            let label = xorpgd::factor_graph::Assignment::from_index(idx, fg.num_vars());
            csv.push_str(&format!("{label},{p},{q},{}\n", q / p));
        }
        write_file(&a.out, "frequencies.csv", &with_hash(&hash, &csv))?;
    }
    write_json(
        &a.out,
        "sample_summary.json",
        &SampleReport {
            config_hash: &hash,
            estimator: a.estimator,
            samples: draws.len(),
            attempts,
        },
    )
}

fn percent(storage: Option<f64>, budget: Option<f64>, inst_kind: &str) -> Result<f64> {
    match (inst_kind, storage, budget) {
        (_, Some(_), Some(_)) => Err(usage("pass at most one of --storage-pct and --budget-pct")),
        ("network", Some(_), _) => Err(usage("--storage-pct applies to inventory instances")),
        ("inventory", _, Some(_)) => Err(usage("--budget-pct applies to network instances")),
        ("quadratic", Some(_), _) | ("quadratic", _, Some(_)) => {
            Err(usage("quadratic instances carry their own constraint set"))
        }
        (_, s, b) => {
            let p = s.or(b).unwrap_or(100.0);
            if !(p.is_finite() && p >= 0.0) {
                return Err(usage(format!("percentage must be >= 0, got {p}")));
            }
            Ok(p)
        }
    }
}

#[derive(Debug, Serialize)]
struct BestIterate {
    /// Iteration index, or `None` for the averaged output.
    k: Option<usize>,
    objective: f64,
    x: Vec<f64>,
}

#[derive(Serialize)]
struct OptimizeReport {
    config_hash: String,
    instance: &'static str,
    estimator: EstimatorKind,
    #[serde(flatten)]
    summary: RunSummary,
    /// Exact expected objective at the output, regularizer excluded.
    exact_objective: Option<f64>,
    known_optimum: Option<f64>,
    gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_iterate: Option<BestIterate>,
}

fn exact_or_none(inst: &Instance, x: &[f64]) -> Result<Option<f64>> {
    match evaluate_objective_exact(inst.problem(), x) {
        Ok(v) => Ok(Some(v)),
        Err(xorpgd::Error::CapExceeded { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Best feasible point among the iterates and the output.
fn best_iterate(inst: &Instance, constraints: &ConstraintSet, trace: &RunTrace) -> Result<Option<BestIterate>> {
    let mut best: Option<BestIterate> = None;
    let candidates = trace
        .records
        .iter()
        .map(|r| (Some(r.k), &r.x))
        .chain(std::iter::once((None, &trace.output)));
    for (k, x) in candidates {
        if !constraints.contains(x, FEASIBILITY_TOL) {
            continue;
        }
        let Some(v) = exact_or_none(inst, x)? else {
            return Ok(None);
        };
        if best.as_ref().is_none_or(|b| v < b.objective) {
            best = Some(BestIterate { k, objective: v, x: x.clone() });
        }
    }
    Ok(best)
}

pub fn cmd_optimize(a: &OptimizeArgs) -> Result<()> {
    let inst_bytes = read(&a.instance)?;
    let mut inst: Instance = serde_json::from_slice(&inst_bytes)
        .with_context(|| format!("parsing instance {}", a.instance.display()))?;
    let mut inputs = vec![inst_bytes.clone()];
    if let Some(path) = &a.model {
        let bytes = read(path)?;
        let fg = parse_model(&bytes, path)?;
        match &mut inst {
            Instance::Inventory(p) => p.model = fg,
            Instance::Network(p) => p.model = fg,
            Instance::Quadratic { problem, .. } => problem.model = fg,
        }
        inputs.push(bytes);
    }
    inst.validate().context("invalid instance")?;

    let mu_reg = a
        .mu_reg
        .unwrap_or(if matches!(inst, Instance::Quadratic { .. }) { 0.0 } else { 1e-3 });
    let settings = RunSettings {
        iters: a.iters,
        samples: a.samples,
        mu: a.mu,
        mu_reg,
        sgd_step: a.sgd_step,
        beta: a.beta,
        workers: a.workers,
        time_limit_s: a.time_limit_s,
        ..xor_settings(&a.xor)
    };
    validated(settings.validate(a.method, a.estimator))?;
    let pct = percent(a.storage_pct, a.budget_pct, inst.kind())?;
    let constraints = inst.constraints(pct)?;
    if a.method == Method::AlPrimalDual && !matches!(constraints, ConstraintSet::EqualityAffine { .. }) {
        return Err(usage("al-primal-dual needs an equality-constrained instance"));
    }

    let input_refs: Vec<&[u8]> = inputs.iter().map(Vec::as_slice).collect();
    let hash = config_hash(a, &input_refs);
    let x0 = inst.initial_point(&constraints, &mut seeded(derive_seed(a.seed, crate::bench::X0_STREAM)))?;

    let start = Instant::now();
    let (x, trace) = run_method(
        inst.problem(),
        &constraints,
        x0,
        a.method,
        a.estimator,
        a.samples,
        &settings,
        a.seed,
    )?;
    let wall = start.elapsed().as_secs_f64();

    let exact_objective = exact_or_none(&inst, &x)?;
    let known_optimum = inst.known_optimum()?;
    let gap = match (exact_objective, known_optimum) {
        (Some(v), Some(o)) => Some(v - o),
        _ => None,
    };
    let best = if a.time_limit_s.is_some() {
        best_iterate(&inst, &constraints, &trace)?
    } else {
        None
    };
    let report = OptimizeReport {
        config_hash: hash.clone(),
        instance: inst.kind(),
        estimator: a.estimator,
        summary: trace.summary(serde_json::to_value(a)?),
        exact_objective,
        known_optimum,
        gap,
        best_iterate: best,
    };

    prepare_out(&a.out)?;
    write_file(&a.out, "trace.csv", &trace.to_csv(Some(&format!("config-hash: {hash}"))))?;
    write_json(&a.out, "summary.json", &report)?;
    write_json(&a.out, "timing.json", &serde_json::json!({ "wall_time_s": wall }))
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let sizes = match &a.sizes {
        Some(s) if s.is_empty() => return Err(usage("--sizes must not be empty")),
        Some(s) => s.clone(),
        None => match a.suite {
            Suite::Inventory => vec!["6".into(), "8".into(), "10".into()],
            Suite::Network => vec!["grid".into(), "weak".into(), "strong".into()],
        },
    };
    if a.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    if a.baseline_factor == 0 {
        return Err(usage("--baseline-factor must be at least 1"));
    }
    let kind = match a.suite {
        Suite::Inventory => "inventory",
        Suite::Network => "network",
    };
    let pct = percent(a.storage_pct, a.budget_pct, kind)?;
    let settings = RunSettings {
        iters: a.iters,
        samples: a.samples,
        mu: a.mu,
        mu_reg: a.mu_reg,
        workers: a.workers,
        ..xor_settings(&a.xor)
    };
    for m in [Method::IxorPgd, Method::XorSgdPenalty] {
        validated(settings.validate(m, EstimatorKind::Xor))?;
    }
    for s in &sizes {
        crate::bench::make_instance(a.suite, s, a.seed).map_err(|e| usage(e.to_string()))?;
    }

    let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
    let mut resolved = a.clone();
    resolved.sizes = Some(sizes.clone());
    let hash = config_hash(&resolved, &[]);
    let rows = run_suite(a.suite, &sizes, &seeds, pct, &settings, a.baseline_factor)?;

    prepare_out(&a.out)?;
    write_file(&a.out, "bench.csv", &with_hash(&hash, &results_csv(&rows)))?;
    write_file(&a.out, "bench_summary.csv", &with_hash(&hash, &summary_csv(&rows)))
}
