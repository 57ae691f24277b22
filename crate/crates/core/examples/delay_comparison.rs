//! Delay of the optimal policy against the throughput baseline under
//! Nakagami-2 fading.

use ehdo::montecarlo::{run_delay_comparison, ExperimentConfig, Policy};

pub fn run(runs: usize) -> ehdo::Result<()> {
    let mut config = ExperimentConfig::delay_defaults();
    config.mean_energy = vec![0.0, 1.0, 2.5, 5.0];
    config.mean_data = vec![1.0];
    config.runs = runs;
    let result = run_delay_comparison(&config)?;
    println!("E[H]  E[D]   L_DM      L_TM      gap    violations");
    for d in &result.dominance {
        let dm = result
            .cell(d.mean_energy, d.mean_data, Policy::DelayMinimizing)
            .unwrap();
        let tm = result
            .cell(d.mean_energy, d.mean_data, Policy::ThroughputMaximizing)
            .unwrap();
        println!(
            "{:4.1}  {:4.1}  {:8.5}  {:8.5}  {:7.5}  {}",
            d.mean_energy, d.mean_data, dm.average, tm.average, d.mean_gap, d.violations
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> ehdo::Result<()> {
    let runs = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(500);
    run(runs)
}
