//! Delay-optimal policies through the convex transformed problem.

mod barrier;
mod kkt;
mod problem;

pub use barrier::{solve_transformed, SolveOutcome, SolverOptions};
pub use kkt::{kkt_residuals, Duals, ResidualReport};
pub use problem::{
    build_transformed_problem, build_weighted_throughput_problem, TransformedProblem,
};

use crate::error::Result;
use crate::model::{RateFunction, ScenarioInstance};
use crate::transform::{canonical_transform, map_policy};

/// Solves the average-queue-length minimization for `instance`.
///
/// Builds the transformed problem, runs the barrier method, and maps the
/// optimal rates back to powers with `p_t = r_{g_t}^{-1}(q_t)`.
pub fn solve_delay_minimization(
    instance: &ScenarioInstance,
    rate: &dyn RateFunction,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    let problem = build_transformed_problem(instance, rate);
    let mut outcome = solve_transformed(&problem, opts)?;
    outcome.powers = map_policy(&canonical_transform(instance, rate), &outcome.rates)?;
    Ok(outcome)
}

/// Maximizes `sum (T + 1 - t) r_{g_t}(p_t)` under battery constraints only.
pub fn solve_weighted_throughput(
    instance: &ScenarioInstance,
    rate: &dyn RateFunction,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    let problem = build_weighted_throughput_problem(instance, rate);
    solve_transformed(&problem, opts)
}
