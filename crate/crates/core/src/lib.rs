//! Local sparsification for stochastic bipartite matching.
//!
//! Each arriving request keeps at most `k` of its compatible edges, chosen by
//! VarOpt sampling over a fractional solution of the expected-instance LP. A
//! central coordinator then runs an exact maximum matching on the sparse graph.
//!
//! The crate is organised bottom-up:
//!
//! - [`instance`]: stochastic instances, realized graphs and seeded RNG streams
//! - [`varopt`]: fixed-size dependent sampling with inverse-probability weights
//! - [`matching`]: Hopcroft–Karp and the scaled fractional matching diagnostic
//! - [`weights`]: fractional solutions (max-flow LP, Monte Carlo, spreading)
//! - [`strategies`]: the five evaluated algorithms
//! - [`generators`]: synthetic adversarial families and taxi-trip instances
//! - [`bounds`]: closed-form guarantee evaluators
//! - [`harness`]: trial orchestration, metrics and result files

pub mod bounds;
pub mod error;
pub mod generators;
pub mod harness;
pub mod instance;
pub mod matching;
pub mod strategies;
pub mod varopt;
pub mod weights;

pub use error::{Error, Result};
pub use instance::{DemandType, RealizedGraph, RngStream, StochasticInstance};
pub use matching::{BipartiteEdgeList, FractionalLoadReport, MatchingResult};
pub use strategies::{SparsifierReport, Strategy, StrategyConfig, StrategyOutcome, WeightSource};
pub use varopt::{VarOptSample, WeightedItem};
pub use weights::{FractionalSolution, HeavyLightSplit};
