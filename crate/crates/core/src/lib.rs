//! Offline delay-optimal transmission for an energy-harvesting transmitter.
//!
//! The crate computes power schedules that minimize the time-average data
//! queue length of a transmitter powered by harvested energy, given full
//! advance knowledge of energy arrivals, data arrivals and channel gains.
//!
//! - [`model`]: scenarios, rate functions, battery/queue dynamics, feasibility.
//! - [`transform`]: the change of variables that makes the problem convex.
//! - [`solver`]: log-barrier interior-point solver with KKT certification.
//! - [`waterfill`]: weighted and unweighted directional water-filling.
//! - [`oracle`]: brute-force lattice search for tiny horizons.
//! - [`montecarlo`]: random scenarios, inversion numbers, experiment pipelines.
//! - [`cli`]: the subcommands behind the `ehdo` binary.
//!
//! ```
//! use ehdo::model::{LogRate, ScenarioInstance};
//! use ehdo::solver::{solve_delay_minimization, SolverOptions};
//!
//! let s = ScenarioInstance::new(2.0, 5.0, vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
//! let out = solve_delay_minimization(&s, &LogRate, &SolverOptions::default()).unwrap();
//! assert!((out.powers[0] - 5.0 / 3.0).abs() < 1e-6);
//! assert!((out.objective - 3.87533).abs() < 1e-5);
//! ```

// `!(x > 0.0)` style comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod oracle;
pub mod solver;
pub mod transform;
pub mod waterfill;

pub use error::{Error, Result};
