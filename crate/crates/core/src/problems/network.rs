use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::uniform_open_closed;
use crate::error::{Error, Result};
use crate::factor_graph::{Assignment, Factor, FactorGraph};
use crate::numerics::{Cholesky, DenseMatrix};
use crate::optimizers::{ConstraintSet, StochasticProblem};
use crate::rng::{derive_seed, seeded};

pub const DEFAULT_DISCONNECTION_PENALTY: f64 = 1e6;
pub const DEFAULT_BUDGET: f64 = 1000.0;
pub const MAX_GENERATED_EDGES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    /// Cost per unit of added conductance.
    pub cost: f64,
    /// Conductance before any upgrade.
    pub base: f64,
}

/// Undirected network whose edges survive (`θ_e = 1`) or fail at random.
///
/// The decision is the upgrade `Δg ≥ 0`, giving conductances
/// `g = g0 + Δg`, and the scenario cost is the average commute time
/// `4(1ᵀg)/(m−1) · (Tr (L + 11ᵀ/m)⁻¹ − 1)` of the surviving graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkInstance {
    pub nodes: usize,
    pub edges: Vec<Edge>,
    /// Budget `B` at the 100% level.
    pub budget: f64,
    /// Cost reported for scenarios whose surviving graph is disconnected.
    pub disconnection_penalty: f64,
    pub model: FactorGraph,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    /// Returns whether the sets were distinct.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
        ra != rb
    }
}

impl NetworkInstance {
    pub fn new(nodes: usize, edges: Vec<Edge>, model: FactorGraph, budget: f64) -> Result<Self> {
        let inst = NetworkInstance {
            nodes,
            edges,
            budget,
            disconnection_penalty: DEFAULT_DISCONNECTION_PENALTY,
            model,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::InvalidModel("network needs at least 2 nodes".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.u == e.v || e.u >= self.nodes || e.v >= self.nodes {
                return Err(Error::InvalidModel(format!("edge {i} ({}, {}) is invalid", e.u, e.v)));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return Err(Error::InvalidModel(format!("duplicate edge ({}, {})", e.u, e.v)));
            }
            if !(e.cost.is_finite() && e.cost > 0.0) || !(e.base.is_finite() && e.base >= 0.0) {
                return Err(Error::InvalidModel(format!("edge {i} needs cost > 0 and base >= 0")));
            }
        }
        if self.model.num_vars() != self.edges.len() {
            return Err(Error::Dimension(format!(
                "failure model has {} variables for {} edges",
                self.model.num_vars(),
                self.edges.len()
            )));
        }
        if !self.is_connected(&vec![1.0; self.edges.len()], None) {
            return Err(Error::InvalidModel("intact network is disconnected".into()));
        }
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(Error::InvalidModel("budget must be positive".into()));
        }
        if !(self.disconnection_penalty.is_finite() && self.disconnection_penalty > 0.0) {
            return Err(Error::InvalidModel("disconnection penalty must be positive".into()));
        }
        Ok(())
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// `g0 + Δg`.
    pub fn conductances(&self, delta: &[f64]) -> Vec<f64> {
        self.edges.iter().zip(delta).map(|(e, d)| e.base + d).collect()
    }

    /// Whether edges with `θ_e = 1` and `g_e > 0` connect every node.
    /// `theta = None` means every edge survives.
    pub fn is_connected(&self, g: &[f64], theta: Option<&Assignment>) -> bool {
        let mut uf = UnionFind::new(self.nodes);
        let mut components = self.nodes;
        for (i, e) in self.edges.iter().enumerate() {
            let alive = theta.is_none_or(|t| t.get(i)) && g[i] > 0.0;
            if alive && uf.union(e.u, e.v) {
                components -= 1;
            }
        }
        components == 1
    }

    /// `L + 11ᵀ/m` over surviving edges.
    fn regularized_laplacian(&self, g: &[f64], theta: Option<&Assignment>) -> DenseMatrix {
        let m = self.nodes;
        let mut l = DenseMatrix::from_vec(m, m, vec![1.0 / m as f64; m * m]).unwrap();
        for (i, e) in self.edges.iter().enumerate() {
            if theta.is_none_or(|t| t.get(i)) {
                l[(e.u, e.u)] += g[i];
                l[(e.v, e.v)] += g[i];
                l[(e.u, e.v)] -= g[i];
                l[(e.v, e.u)] -= g[i];
            }
        }
        l
    }

    /// `Tr (L + 11ᵀ/m)⁻¹`, or `None` when the surviving graph is
    /// disconnected.
    pub fn resistance_trace(&self, g: &[f64], theta: Option<&Assignment>) -> Option<f64> {
        if !self.is_connected(g, theta) {
            return None;
        }
        let chol = Cholesky::factor(&self.regularized_laplacian(g, theta)).ok()?;
        Some(chol.inverse().trace())
    }

    /// Average commute time at conductances `g`, or the disconnection
    /// penalty.
    pub fn commute_time(&self, g: &[f64], theta: &Assignment) -> f64 {
        match self.resistance_trace(g, Some(theta)) {
            Some(tr) => self.scale(g) * (tr - 1.0),
            None => self.disconnection_penalty,
        }
    }

    fn scale(&self, g: &[f64]) -> f64 {
        4.0 * g.iter().sum::<f64>() / (self.nodes - 1) as f64
    }

    /// Gradient of [`Self::commute_time`] in `g`; zero (and flagged `true`)
    /// on a disconnected sample, where the penalty is flat.
    pub fn commute_gradient(&self, g: &[f64], theta: &Assignment) -> (Vec<f64>, bool) {
        let zero = || (vec![0.0; self.edges.len()], true);
        if !self.is_connected(g, Some(theta)) {
            return zero();
        }
        let Ok(chol) = Cholesky::factor(&self.regularized_laplacian(g, Some(theta))) else {
            return zero();
        };
        let inv = chol.inverse();
        let m = self.nodes;
        let base = 4.0 / (m - 1) as f64 * (inv.trace() - 1.0);
        let scale = self.scale(g);
        let grad = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| {
                if !theta.get(i) {
                    return base;
                }
                // ‖M⁻¹ b_e‖² with b_e = e_u − e_v
                let sq: f64 = (0..m).map(|r| (inv[(r, e.u)] - inv[(r, e.v)]).powi(2)).sum();
                base - scale * sq
            })
            .collect();
        (grad, false)
    }

    /// `{Δg ≥ 0, Σ c_e Δg_e ≤ percent/100 · B}`.
    pub fn budget_constraint(&self, percent: f64) -> Result<ConstraintSet> {
        if !(percent.is_finite() && percent >= 0.0) {
            return Err(Error::InvalidConfig(format!("budget percent must be >= 0, got {percent}")));
        }
        let w = self.edges.iter().map(|e| e.cost).collect();
        ConstraintSet::nonneg_halfspace(w, self.budget * percent / 100.0)
    }

    /// `|N(0, 1)|` per edge, projected onto `constraints`.
    pub fn initial_point<R: rand::Rng + ?Sized>(
        &self,
        constraints: &ConstraintSet,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let normal = Normal::new(0.0, 1.0).expect("valid normal");
        let x: Vec<f64> = (0..self.edges.len()).map(|_| Distribution::<f64>::sample(&normal, rng).abs()).collect();
        constraints.project(&x)
    }

    /// Whitespace edge list, one `u v c_e g0_e` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for e in &self.edges {
            writeln!(s, "{} {} {:?} {:?}", e.u, e.v, e.cost, e.base).unwrap();
        }
        s
    }
}

impl StochasticProblem for NetworkInstance {
    fn dim(&self) -> usize {
        self.edges.len()
    }

    fn model(&self) -> &FactorGraph {
        &self.model
    }

    fn value(&self, x: &[f64], theta: &Assignment) -> f64 {
        self.commute_time(&self.conductances(x), theta)
    }

    fn gradient(&self, x: &[f64], theta: &Assignment) -> Vec<f64> {
        self.commute_gradient(&self.conductances(x), theta).0
    }

    fn flagged(&self, x: &[f64], theta: &Assignment) -> bool {
        !self.is_connected(&self.conductances(x), Some(theta))
    }
}

/// Parses `u v c_e g0_e` lines (`#` starts a comment). Returns the node
/// count (largest index + 1) and the edges.
pub fn parse_edge_list(text: &str) -> Result<(usize, Vec<Edge>)> {
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 4 {
            return Err(err(format!("expected `u v c_e g0_e`, got {} fields", tok.len())));
        }
        let node = |s: &str| s.parse::<usize>().map_err(|e| err(format!("bad node `{s}`: {e}")));
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("bad number `{s}`: {e}")));
        edges.push(Edge {
            u: node(tok[0])?,
            v: node(tok[1])?,
            cost: num(tok[2])?,
            base: num(tok[3])?,
        });
    }
    let nodes = edges.iter().map(|e| e.u.max(e.v) + 1).max().unwrap_or(0);
    Ok((nodes, edges))
}

/// Desk-scale network families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkKind {
    Grid { rows: usize, cols: usize },
    /// Two ring-like communities of `size` nodes joined by `bridges` edges.
    TwoCommunity { size: usize, bridges: usize },
}

impl FromStr for NetworkKind {
    type Err = Error;

    /// `grid` (3×3), `grid-RxC`, `weak` (one bridge) or `strong` (three).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(NetworkKind::Grid { rows: 3, cols: 3 }),
            "weak" => Ok(NetworkKind::TwoCommunity { size: 4, bridges: 1 }),
            "strong" => Ok(NetworkKind::TwoCommunity { size: 4, bridges: 3 }),
            _ => {
                let dims = s.strip_prefix("grid-").and_then(|d| d.split_once('x'));
                match dims.map(|(r, c)| (r.parse(), c.parse())) {
                    Some((Ok(rows), Ok(cols))) => Ok(NetworkKind::Grid { rows, cols }),
                    _ => Err(Error::InvalidConfig(format!(
                        "unknown network kind `{s}` (expected grid, grid-RxC, weak, strong)"
                    ))),
                }
            }
        }
    }
}

fn topology<R: rand::Rng + ?Sized>(kind: NetworkKind, rng: &mut R) -> Result<(usize, Vec<(usize, usize)>)> {
    match kind {
        NetworkKind::Grid { rows, cols } => {
            if rows * cols < 2 {
                return Err(Error::InvalidConfig("grid needs at least 2 nodes".into()));
            }
            let mut pairs = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    let i = r * cols + c;
                    if c + 1 < cols {
                        pairs.push((i, i + 1));
                    }
                    if r + 1 < rows {
                        pairs.push((i, i + cols));
                    }
                }
            }
            Ok((rows * cols, pairs))
        }
        NetworkKind::TwoCommunity { size, bridges } => {
            if size < 3 || bridges == 0 || bridges > size * size {
                return Err(Error::InvalidConfig(
                    "two-community networks need size >= 3 and 1..=size² bridges".into(),
                ));
            }
            let mut pairs = Vec::new();
            for off in [0, size] {
                for i in 0..size {
                    let (a, b) = (off + i, off + (i + 1) % size);
                    pairs.push((a.min(b), a.max(b)));
                }
                if size > 3 {
                    // one chord inside each community
                    let a = rng.random_range(0..size);
                    let b = (a + 2 + rng.random_range(0..size - 3)) % size;
                    pairs.push(((off + a).min(off + b), (off + a).max(off + b)));
                }
            }
            let mut cross = Vec::new();
            while cross.len() < bridges {
                let p = (rng.random_range(0..size), size + rng.random_range(0..size));
                if !cross.contains(&p) {
                    cross.push(p);
                }
            }
            pairs.extend(cross);
            Ok((2 * size, pairs))
        }
    }
}

const NETWORK_STREAM: u64 = 0x0e7_0002;

/// Random instance of `kind`: base conductance 1, upgrade costs in
/// `(0, 10)`, budget 1000. Each edge survives with probability in
/// `(0.75, 0.95]`, and edges sharing a node fail together more often than
/// independently.
pub fn gen_network(kind: NetworkKind, seed: u64) -> Result<NetworkInstance> {
    let mut rng = seeded(derive_seed(seed, NETWORK_STREAM));
    let (nodes, pairs) = topology(kind, &mut rng)?;
    if pairs.len() > MAX_GENERATED_EDGES {
        return Err(Error::InvalidConfig(format!(
            "{} edges exceed the generator limit of {MAX_GENERATED_EDGES}",
            pairs.len()
        )));
    }
    let edges: Vec<Edge> = pairs
        .iter()
        .map(|&(u, v)| {
            let cost = loop {
                let c = uniform_open_closed(&mut rng, 10.0);
                if c < 10.0 {
                    break c;
                }
            };
            Edge { u, v, cost, base: 1.0 }
        })
        .collect();
    let mut factors = Vec::new();
    for i in 0..edges.len() {
        let p = 0.75 + uniform_open_closed(&mut rng, 0.2);
        factors.push(Factor::new(vec![i], vec![1.0 - p, p])?);
    }
    for i in 0..edges.len() {
        for j in i + 1..edges.len() {
            let (a, b) = (edges[i], edges[j]);
            let adjacent = a.u == b.u || a.u == b.v || a.v == b.u || a.v == b.v;
            if adjacent && rng.random_bool(0.5) {
                let s = 1.0 + uniform_open_closed(&mut rng, 1.0);
                factors.push(Factor::new(vec![i, j], vec![s, 1.0, 1.0, s])?);
            }
        }
    }
    let model = FactorGraph::new(edges.len(), factors)?;
    NetworkInstance::new(nodes, edges, model, DEFAULT_BUDGET)
}
