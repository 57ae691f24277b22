//! Cross-check the barrier solver and the water-filling against lattice
//! searches on three-slot problems.

use ehdo::model::{LogRate, ScenarioInstance};
use ehdo::oracle::{grid_search_delay, grid_search_weighted_throughput, GridSpec};
use ehdo::solver::{solve_delay_minimization, SolverOptions};
use ehdo::waterfill::weighted_dwf;

pub fn run(points: usize) -> ehdo::Result<()> {
    let instance = ScenarioInstance::new(
        0.6,
        1.2,
        vec![0.3, 0.9, 0.2],
        vec![0.5, 0.1, 0.8],
        vec![1.4, 0.6, 1.1],
    )?;
    let grid = GridSpec::new(points)?;

    let lattice = grid_search_delay(&instance, &LogRate, &grid)?;
    let solved = solve_delay_minimization(&instance, &LogRate, &SolverOptions::default())?;
    println!(
        "delay:      solver {:.6}  lattice {:.6}  bound {:.2e}",
        solved.objective, lattice.objective, lattice.error_bound
    );

    let lattice = grid_search_weighted_throughput(&instance, &grid)?;
    let (p, _) = weighted_dwf(&instance);
    let filled: f64 = (0..3)
        .map(|t| instance.weight(t + 1) * (instance.gains()[t] * p[t]).ln_1p())
        .sum();
    println!(
        "throughput: filling {:.6}  lattice {:.6}  bound {:.2e}",
        filled, lattice.objective, lattice.error_bound
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> ehdo::Result<()> {
    let points = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(401);
    run(points)
}
