//! Average inversion number of the delay-optimal powers over a small
//! grid of mean arrivals (constant gains).
//!
//! ```text
//! cargo run --release --example inversion_experiment [-- runs]
//! ```

use ehdo::montecarlo::{run_inversion_experiment, ExperimentConfig, Policy};

pub fn run(runs: usize) -> ehdo::Result<()> {
    let mut config = ExperimentConfig::inversion_defaults();
    config.mean_energy = vec![0.0, 1.0, 2.0, 5.0];
    config.runs = runs;
    config.policies = vec![Policy::DelayMinimizing, Policy::ThroughputMaximizing];
    let result = run_inversion_experiment(&config)?;
    println!("E[H]  E[D]  policy  avg inversions  stderr");
    for c in &result.cells {
        println!(
            "{:4.1}  {:4.1}  {:6}  {:14.3}  {:.3}",
            c.mean_energy,
            c.mean_data,
            c.policy.label(),
            c.average,
            c.stderr
        );
    }
    println!("rng: {}", result.rng_algorithm);
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
