//! Solve one scenario and print the optimal schedule.
//!
//! ```text
//! cargo run --example solve_scenario [-- path/to/scenario.json]
//! ```

use ehdo::model::{check_feasibility, simulate_trajectory, LogRate, ScenarioInstance};
use ehdo::solver::{solve_delay_minimization, SolverOptions};

pub fn run(path: Option<String>) -> ehdo::Result<f64> {
    let path = path.unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/data/scenario_two_slot.json").to_string()
    });
    let instance = ScenarioInstance::from_json(&std::fs::read_to_string(path)?)?;
    let out = solve_delay_minimization(&instance, &LogRate, &SolverOptions::default())?;
    let traj = simulate_trajectory(&instance, &out.powers, &LogRate)?;
    let feas = check_feasibility(&instance, &out.powers, &LogRate, 1e-9)?;

    println!(" t        p_t        r_t        E_t        Q_t");
    for t in 0..instance.horizon() {
        println!(
            "{:2} {:10.6} {:10.6} {:10.6} {:10.6}",
            t + 1,
            out.powers[t],
            out.rates[t],
            traj.energy[t + 1],
            traj.queue[t + 1]
        );
    }
    println!("average queue length {:.8}", out.objective);
    println!("KKT residuals        {}", out.residuals);
    println!("newton iterations    {}", out.newton_iterations);
    println!("feasible             {}", feas.feasible);
    Ok(out.objective)
}

#[allow(dead_code)]
fn main() -> ehdo::Result<()> {
    run(std::env::args().nth(1)).map(|_| ())
}
