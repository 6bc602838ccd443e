//! Comparison samplers: systematic-scan Gibbs and loopy belief propagation.
//!
//! BP-based sampling draws every variable independently from its belief.
//! That product-of-marginals rule ignores correlations the beliefs cannot
//! express, which is exactly the weakness the XOR sampler is compared
//! against.


use crate::error::{Error, Result};
use crate::factor_graph::{Assignment, FactorGraph};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GibbsConfig {
    /// Sweeps discarded before the first emitted sample.
    pub burn_in: usize,
    /// Sweeps between consecutive emitted samples.
    pub thin: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            burn_in: 100,
            thin: 30,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidConfig("Gibbs thinning must be at least 1".into()));
        }
        Ok(())
    }
}

/// `Pr(θ_i = 1 | θ_{−i})` using only the factors that touch `i`.
pub fn gibbs_conditional(fg: &FactorGraph, a: &Assignment, i: usize) -> f64 {
    conditional_from_index(fg, a.index(), i)
}

fn conditional_from_index(fg: &FactorGraph, index: u64, i: usize) -> f64 {
    let one = index | (1u64 << i);
    let zero = index & !(1u64 << i);
    let mut diff = 0.0;
    for &fi in fg.factors_of(i) {
        let f = &fg.factors()[fi];
        diff += f.log_value(one) - f.log_value(zero);
    }
    1.0 / (1.0 + (-diff).exp())
}

/// A persistent Gibbs chain.
#[derive(Debug, Clone)]
pub struct GibbsChain<'a> {
    fg: &'a FactorGraph,
    config: GibbsConfig,
    state: u64,
    emitted: bool,
}

impl<'a> GibbsChain<'a> {
    /// Starts from a uniformly random state and runs the burn-in.
    pub fn new<R: rand::Rng + ?Sized>(fg: &'a FactorGraph, config: GibbsConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if fg.num_vars() > 64 {
            return Err(Error::InvalidModel("Gibbs chain supports at most 64 variables".into()));
        }
        let mut state = 0u64;
        for i in 0..fg.num_vars() {
            if rng.random::<bool>() {
                state |= 1 << i;
            }
        }
        let mut chain = GibbsChain {
            fg,
            config,
            state,
            emitted: false,
        };
        for _ in 0..config.burn_in {
            chain.sweep(rng);
        }
        Ok(chain)
    }

    /// One systematic sweep over variables `0..n`.
    pub fn sweep<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) {
        for i in 0..self.fg.num_vars() {
            let p = conditional_from_index(self.fg, self.state, i);
            if rng.random::<f64>() < p {
                self.state |= 1 << i;
            } else {
                self.state &= !(1 << i);
            }
        }
    }

    pub fn state(&self) -> Assignment {
        Assignment::from_index(self.state, self.fg.num_vars())
    }

    /// The next thinned sample. The first call returns the post-burn-in
    /// state; later calls advance `thin` sweeps first.
    pub fn next_sample<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> Assignment {
        if self.emitted {
            for _ in 0..self.config.thin {
                self.sweep(rng);
            }
        }
        self.emitted = true;
        self.state()
    }

    pub fn samples<R: rand::Rng + ?Sized>(&mut self, count: usize, rng: &mut R) -> Vec<Assignment> {
        (0..count).map(|_| self.next_sample(rng)).collect()
    }
}

/// `count` thinned samples from a fresh chain.
pub fn gibbs_sample<R: rand::Rng + ?Sized>(
    fg: &FactorGraph,
    config: GibbsConfig,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Assignment>> {
    if count == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    Ok(GibbsChain::new(fg, config, rng)?.samples(count, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BpConfig {
    pub max_iters: usize,
    /// Weight on the previous message, in `[0, 1)`.
    pub damping: f64,
    pub tolerance: f64,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig {
            max_iters: 20,
            damping: 0.0,
            tolerance: 1e-8,
        }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("BP needs at least one iteration".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidConfig(format!(
                "damping must be in [0, 1), got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpResult {
    /// Belief `Pr(θ_i = 1)` per variable.
    pub marginals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Flooding sum-product with messages stored as log-odds
/// `ln m(1) − ln m(0)`.
pub fn bp_marginals(fg: &FactorGraph, config: BpConfig) -> Result<BpResult> {
    config.validate()?;
    let factors = fg.factors();
    // var_to_fac[a][j], fac_to_var[a][j] for scope position j of factor a
    let mut var_to_fac: Vec<Vec<f64>> = factors.iter().map(|f| vec![0.0; f.scope().len()]).collect();
    let mut fac_to_var = var_to_fac.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        iterations += 1;
        let mut delta: f64 = 0.0;
        // factor -> variable
        for (ai, f) in factors.iter().enumerate() {
            let k = f.scope().len();
            for j in 0..k {
                let (mut l0, mut l1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for t in 0..f.table().len() {
                    let mut s = f.log_table()[t];
                    for (jj, &m) in var_to_fac[ai].iter().enumerate() {
                        if jj != j && (t >> (k - 1 - jj)) & 1 == 1 {
                            s += m;
                        }
                    }
                    if (t >> (k - 1 - j)) & 1 == 1 {
                        l1 = logaddexp(l1, s);
                    } else {
                        l0 = logaddexp(l0, s);
                    }
                }
                let new = (1.0 - config.damping) * (l1 - l0) + config.damping * fac_to_var[ai][j];
                delta = delta.max((new - fac_to_var[ai][j]).abs());
                fac_to_var[ai][j] = new;
            }
        }
        // variable -> factor
        let mut totals = vec![0.0; fg.num_vars()];
        for (ai, f) in factors.iter().enumerate() {
            for (j, &v) in f.scope().iter().enumerate() {
                totals[v] += fac_to_var[ai][j];
            }
        }
        for (ai, f) in factors.iter().enumerate() {
            for (j, &v) in f.scope().iter().enumerate() {
                let new = totals[v] - fac_to_var[ai][j];
                delta = delta.max((new - var_to_fac[ai][j]).abs());
                var_to_fac[ai][j] = new;
            }
        }
        if delta < config.tolerance {
            converged = true;
            break;
        }
    }
    let mut totals = vec![0.0; fg.num_vars()];
    for (ai, f) in factors.iter().enumerate() {
        for (j, &v) in f.scope().iter().enumerate() {
            totals[v] += fac_to_var[ai][j];
        }
    }
    Ok(BpResult {
        marginals: totals.into_iter().map(sigmoid).collect(),
        iterations,
        converged,
    })
}

/// Independent per-variable draws from the given beliefs.
pub fn bp_sample<R: rand::Rng + ?Sized>(
    marginals: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Vec<Assignment>> {
    if let Some(p) = marginals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidConfig(format!("belief {p} outside [0, 1]")));
    }
    Ok((0..count)
        .map(|_| Assignment::new(marginals.iter().map(|&p| rng.random::<f64>() < p).collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_graph::{exact_marginals, Factor};
    use crate::rng::seeded;

    fn single() -> FactorGraph {
        FactorGraph::new(1, vec![Factor::new(vec![0], vec![1.0, 3.0]).unwrap()]).unwrap()
    }

    fn pairwise() -> FactorGraph {
        FactorGraph::new(
            2,
            vec![Factor::new(vec![0, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap()],
        )
        .unwrap()
    }

    /// Chain 0-1-2-3 plus unary factors and a 3-ary leaf factor on {3,4,5}.
    fn tree() -> FactorGraph {
        let f = |s: Vec<usize>, t: Vec<f64>| Factor::new(s, t).unwrap();
        FactorGraph::new(
            6,
            vec![
                f(vec![0], vec![1.0, 2.5]),
                f(vec![0, 1], vec![3.0, 0.5, 1.0, 2.0]),
                f(vec![1, 2], vec![1.0, 4.0, 2.0, 0.7]),
                f(vec![2, 3], vec![0.2, 1.0, 1.5, 1.0]),
                f(vec![3, 4, 5], vec![1.0, 2.0, 0.5, 0.1, 3.0, 1.0, 1.0, 6.0]),
                f(vec![5], vec![2.0, 1.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn conditional_examples() {
        let p = gibbs_conditional(&single(), &Assignment::new(vec![false]), 0);
        assert!((p - 0.75).abs() < 1e-12);
        let p = gibbs_conditional(&pairwise(), &Assignment::new(vec![true, false]), 1);
        assert!((p - 4.0 / 7.0).abs() < 1e-12);
        let p = gibbs_conditional(&FactorGraph::uniform(3), &Assignment::zeros(3), 1);
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gibbs_single_var_frequency() {
        let s = gibbs_sample(&single(), GibbsConfig::default(), 20_000, &mut seeded(1)).unwrap();
        let f = s.iter().filter(|a| a.get(0)).count() as f64 / 20_000.0;
        assert!((f - 0.75).abs() < 0.01, "{f}");
    }

    #[test]
    fn gibbs_uniform_marginals() {
        let s = gibbs_sample(&FactorGraph::uniform(3), GibbsConfig::default(), 20_000, &mut seeded(2)).unwrap();
        for i in 0..3 {
            let f = s.iter().filter(|a| a.get(i)).count() as f64 / 20_000.0;
            assert!((f - 0.5).abs() < 0.01, "{f}");
        }
    }

    #[test]
    fn gibbs_deterministic() {
        let a = gibbs_sample(&pairwise(), GibbsConfig::default(), 50, &mut seeded(3)).unwrap();
        let b = gibbs_sample(&pairwise(), GibbsConfig::default(), 50, &mut seeded(3)).unwrap();
        assert_eq!(a, b);
        assert!(gibbs_sample(&pairwise(), GibbsConfig::default(), 0, &mut seeded(3)).is_err());
        assert!(GibbsConfig { burn_in: 0, thin: 0 }.validate().is_err());
    }

    #[test]
    fn bp_exact_on_tree() {
        let fg = tree();
        let exact = exact_marginals(&fg).unwrap().marginals;
        let bp = bp_marginals(&fg, BpConfig::default()).unwrap();
        assert!(bp.converged);
        for (a, b) in bp.marginals.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn bp_single_factor_one_iteration() {
        let bp = bp_marginals(&pairwise(), BpConfig { max_iters: 1, ..Default::default() }).unwrap();
        assert!((bp.marginals[0] - 0.7).abs() < 1e-12);
        assert!((bp.marginals[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn bp_uniform_and_damping() {
        let bp = bp_marginals(&FactorGraph::uniform(4), BpConfig::default()).unwrap();
        assert!(bp.marginals.iter().all(|p| (p - 0.5).abs() < 1e-12));
        let damped = bp_marginals(&tree(), BpConfig { damping: 0.5, max_iters: 200, ..Default::default() }).unwrap();
        let exact = exact_marginals(&tree()).unwrap().marginals;
        for (a, b) in damped.marginals.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(BpConfig { damping: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn bp_sampling() {
        let s = bp_sample(&[1.0, 0.0], 100, &mut seeded(4)).unwrap();
        assert!(s.iter().all(|a| a.bits() == [true, false]));
        let s = bp_sample(&[0.5, 0.5], 10_000, &mut seeded(5)).unwrap();
        let mut counts = [0usize; 4];
        for a in &s {
            counts[a.index() as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() < 0.02);
        }
        assert!(bp_sample(&[1.5], 1, &mut seeded(0)).is_err());
    }

    #[test]
    fn bp_sample_matches_tree_beliefs() {
        let bp = bp_marginals(&tree(), BpConfig::default()).unwrap();
        let s = bp_sample(&bp.marginals, 20_000, &mut seeded(6)).unwrap();
        for (i, p) in bp.marginals.iter().enumerate() {
            let f = s.iter().filter(|a| a.get(i)).count() as f64 / 20_000.0;
            assert!((f - p).abs() < 0.01);
        }
    }
}
