//! Expected-utility portfolio optimization with an uncertain, discrete
//! investment horizon in a one-asset Black-Scholes market.
//!
//! * [`market`]: state-price density, exact path sampling, conditional
//!   moment factors `f` and `g`.
//! * [`payoff`]: participating-contract utility and its concave envelope.
//! * [`concave`]: closed-form Merton solution with random horizon.
//! * [`nonconcave`]: fixed-horizon and two-date solvers for the contract
//!   utility, plus wealth and strategy evaluation.
//! * [`analytics`]: expected utility, certainty equivalents, variances and
//!   the fixed-vs-uncertain comparisons.

// negated float comparisons deliberately treat NaN as invalid input
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod concave;
pub mod error;
pub mod experiments;
pub mod market;
pub mod nonconcave;
pub mod normal;
pub mod payoff;
pub mod roots;
pub mod stats;

pub use analytics::{
    certainty_equivalent, compare_to_fixed, expected_utility, stopped_variance, Comparison, StoppedSample,
    StoppedSampleSet,
};
pub use concave::{merton_wealth, solve_merton, MertonSolution};
pub use error::{Error, Result};
pub use market::{
    f_factor, g_factor, simulate_paths, state_price_density, HorizonDistribution, MarketParams, PathSet, PathState,
};
pub use nonconcave::{
    solve_fixed_horizon, solve_inner_nu_t, solve_uncertain_horizon, FixedHorizonSolution, InnerSolution, ProblemSpec,
    SolverOptions, SolverSolution,
};
pub use payoff::{ContractUtility, ExtendedReal, PowerUtility, Subgradient};
pub use stats::Estimate;
