use proptest::prelude::*;
use xorpgd::factor_graph::{load_uai, to_uai, Enumeration};
use xorpgd::numerics::fd_gradient;
use xorpgd::optimizers::{average, Averaging, ConstraintSet, StepSchedule, StochasticProblem};
use xorpgd::problems::{gen_inventory, gen_network, random_clique_model, NetworkKind};
use xorpgd::rng::seeded;
use xorpgd::xor_sampling::{
    discretize, draw_parity_constraints, BranchAndBoundOracle, DiscretizationConfig,
    ExhaustiveOracle, Oracle, SliceSet,
};
use xorpgd::{Assignment, FactorGraph};

fn model(n: usize, seed: u64) -> FactorGraph {
    random_clique_model(n, &mut seeded(seed)).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn constraint_set() -> impl Strategy<Value = ConstraintSet> {
    let halfspace = (1usize..5)
        .prop_flat_map(|d| (prop::collection::vec(0.1f64..5.0, d), 0.0f64..10.0))
        .prop_map(|(w, cap)| ConstraintSet::nonneg_halfspace(w, cap).unwrap());
    let boxed = prop::collection::vec((-5.0f64..5.0, 0.0f64..5.0), 1..5).prop_map(|v| {
        ConstraintSet::Box {
            lower: v.iter().map(|(l, _)| *l).collect(),
            upper: v.iter().map(|(l, w)| l + w).collect(),
        }
    });
    prop_oneof![halfspace, boxed]
}

fn points(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0f64..20.0, dim)
}

fn set_and_points() -> impl Strategy<Value = (ConstraintSet, Vec<f64>, Vec<f64>)> {
    constraint_set().prop_flat_map(|c| {
        let d = c.dim();
        (Just(c), points(d), points(d))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_is_feasible_and_idempotent((c, x, _) in set_and_points()) {
        let p = c.project(&x).unwrap();
        prop_assert!(c.contains(&p, 1e-9));
        let pp = c.project(&p).unwrap();
        prop_assert!(dist(&p, &pp) <= 1e-9);
    }

    #[test]
    fn projection_is_nonexpansive((c, x, y) in set_and_points()) {
        let (px, py) = (c.project(&x).unwrap(), c.project(&y).unwrap());
        prop_assert!(dist(&px, &py) <= dist(&x, &y) + 1e-9);
    }

    /// `⟨x − P(x), z − P(x)⟩ ≤ 0` for every feasible `z`.
    #[test]
    fn projection_satisfies_variational_inequality((c, x, y) in set_and_points()) {
        let p = c.project(&x).unwrap();
        let z = c.project(&y).unwrap();
        let r: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
        let s: Vec<f64> = z.iter().zip(&p).map(|(a, b)| a - b).collect();
        prop_assert!(dot(&r, &s) <= 1e-8 * (1.0 + dist(&x, &p) * dist(&z, &p)));
    }

    #[test]
    fn assignment_index_round_trip(n in 1usize..20, raw in any::<u64>()) {
        let idx = raw & ((1u64 << n) - 1);
        prop_assert_eq!(Assignment::from_index(idx, n).index(), idx);
    }

    #[test]
    fn schedules_are_positive_and_nonincreasing(k in 1usize..10_000, mu in 0.01f64..10.0) {
        for s in [StepSchedule::Plain, StepSchedule::Improved, StepSchedule::Piecewise { initial: 0.1 }] {
            let (a, b) = (s.step(k, mu, 1.2), s.step(k + 1, mu, 1.2));
            prop_assert!(a > 0.0 && b <= a);
        }
    }

    #[test]
    fn averages_stay_in_the_hull(v in prop::collection::vec(-5.0f64..5.0, 1..50)) {
        let pts: Vec<Vec<f64>> = v.iter().map(|x| vec![*x]).collect();
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
        for rule in [Averaging::Uniform, Averaging::Weighted, Averaging::Last] {
            let a = average(&pts, rule)[0];
            prop_assert!(a >= lo - 1e-12 && a <= hi + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn uai_round_trip(n in 1usize..7, seed in any::<u64>()) {
        let fg = model(n, seed);
        prop_assert_eq!(load_uai(&to_uai(&fg)).unwrap(), fg);
    }

    #[test]
    fn discretization_sandwich(n in 1usize..9, seed in any::<u64>(), b in 1u32..9, eps in 0.001f64..0.5) {
        let fg = model(n, seed);
        let cfg = DiscretizationConfig::new(b, eps).unwrap();
        let dw = discretize(&fg, cfg).unwrap();
        let p = Enumeration::default().distribution(&fg).unwrap();
        let q = dw.distribution();
        let rho = cfg.rho();
        for i in 0..1u64 << n {
            if dw.is_tail(i) {
                continue;
            }
            let ratio = q[i as usize] / p.prob(i);
            prop_assert!(ratio >= 1.0 / rho - 1e-12 && ratio <= rho + 1e-12, "ratio {} rho {}", ratio, rho);
        }
    }

    #[test]
    fn oracles_agree(n in 1usize..7, counts_seed in any::<u64>(), q in 0usize..8, max_k in 1u64..64) {
        let mut rng = seeded(counts_seed);
        let counts: Vec<u64> = (0..1usize << n).map(|_| rand::Rng::random_range(&mut rng, 0..=max_k)).collect();
        let slices = SliceSet::from_counts(n, counts).unwrap();
        prop_assume!(slices.total_bits() <= 18);
        let parities = draw_parity_constraints(slices.total_bits(), q, &mut rng);
        let limit = 1 << 18;
        let mut a = ExhaustiveOracle::default().solve(&slices, &parities, limit).unwrap().solutions;
        let mut b = BranchAndBoundOracle.solve(&slices, &parities, limit).unwrap().solutions;
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn inventory_expected_cost_is_convex(seed in any::<u64>(), lam in 0.0f64..1.0, xs in prop::collection::vec(0.0f64..12.0, 8)) {
        let inst = gen_inventory(4, seed).unwrap();
        let (x, y) = (&xs[..4], &xs[4..]);
        let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        let f = |v: &[f64]| inst.expected_value(v).unwrap();
        prop_assert!(f(&mid) <= lam * f(x) + (1.0 - lam) * f(y) + 1e-9);
    }

    /// `f(y) ≥ f(x) + gᵀ(y − x)` for the per-scenario subgradient.
    #[test]
    fn inventory_subgradient_inequality(seed in any::<u64>(), xs in prop::collection::vec(0.0f64..12.0, 8), t in any::<u64>()) {
        let inst = gen_inventory(4, seed).unwrap();
        let theta = Assignment::from_index(t & 0xf, 4);
        let (x, y) = (&xs[..4], &xs[4..]);
        let g = inst.gradient(x, &theta);
        let step: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        prop_assert!(inst.value(y, &theta) >= inst.value(x, &theta) + dot(&g, &step) - 1e-9);
    }

    #[test]
    fn commute_gradient_matches_differences(seed in any::<u64>(), gs in prop::collection::vec(0.2f64..3.0, 12), t in any::<u64>()) {
        let net = gen_network(NetworkKind::Grid { rows: 3, cols: 3 }, seed).unwrap();
        let m = net.num_edges();
        let theta = Assignment::from_index(t & ((1 << m) - 1), m);
        let g = &gs[..m];
        prop_assume!(net.is_connected(g, Some(&theta)));
        let (an, flagged) = net.commute_gradient(g, &theta);
        prop_assert!(!flagged);
        let fd = fd_gradient(|x| net.commute_time(x, &theta), g).unwrap();
        for (a, b) in an.iter().zip(&fd) {
            prop_assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0), "{} vs {}", a, b);
        }
    }

    /// Adding conductance never increases `Tr (L + 11ᵀ/m)⁻¹`.
    #[test]
    fn resistance_trace_is_monotone(seed in any::<u64>(), gs in prop::collection::vec(0.2f64..3.0, 12), e in 0usize..12, bump in 0.01f64..2.0) {
        let net = gen_network(NetworkKind::Grid { rows: 3, cols: 3 }, seed).unwrap();
        let g = &gs[..net.num_edges()];
        let mut h = g.to_vec();
        h[e % g.len()] += bump;
        let (before, after) = (net.resistance_trace(g, None).unwrap(), net.resistance_trace(&h, None).unwrap());
        prop_assert!(after <= before + 1e-12);
    }
}

/// The commute-time objective is not monotone in a single conductance:
/// the `1ᵀg` factor grows faster than the trace shrinks on some edges.
#[test]
fn commute_time_can_grow_with_conductance() {
    let net = gen_network(NetworkKind::Grid { rows: 3, cols: 3 }, 0).unwrap();
    let m = net.num_edges();
    let theta = Assignment::new(vec![true; m]);
    let g = vec![1.0; m];
    let base = net.commute_time(&g, &theta);
    let grew = (0..m).any(|e| {
        let mut h = g.clone();
        h[e] += 0.5;
        net.commute_time(&h, &theta) > base
    });
    assert!(grew);
}
