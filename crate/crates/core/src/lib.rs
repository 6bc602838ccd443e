//! Constrained stochastic convex optimization with XOR-sampled gradients.
//!
//! The crate is organised around the pipeline
//!
//! 1. a binary Markov random field ([`factor_graph`]) describing the
//!    uncertainty `θ`,
//! 2. a hashing-based sampler ([`xor_sampling`]) that draws `θ` with a
//!    constant-factor guarantee, next to the usual baselines
//!    ([`baseline_samplers`]),
//! 3. projected stochastic gradient methods ([`optimizers`]) that average
//!    per-sample gradients and project back onto the feasible set,
//! 4. benchmark problems ([`problems`]) with exact, enumeration-based
//!    objective evaluation.
//!
//! The guide under `book/` walks through each stage; its code listings are
//! compiled as doctests of this crate.

pub mod baseline_samplers;
pub mod error;
pub mod factor_graph;
pub mod numerics;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod xor_sampling;

pub use error::{Error, Result};
pub use factor_graph::{Assignment, Factor, FactorGraph};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/factor_graphs.md")]
    mod factor_graphs {}
    #[doc = include_str!("../../../book/src/xor_sampling.md")]
    mod xor_sampling {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/projected_descent.md")]
    mod projected_descent {}
    #[doc = include_str!("../../../book/src/augmented_lagrangian.md")]
    mod augmented_lagrangian {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
