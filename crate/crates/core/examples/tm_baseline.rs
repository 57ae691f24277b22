//! Throughput-maximizing schedule versus the delay-optimal one.

use ehdo::model::{LogRate, ScenarioInstance};
use ehdo::solver::{solve_delay_minimization, SolverOptions};
use ehdo::waterfill::throughput_baseline;

pub fn run() -> ehdo::Result<(f64, f64)> {
    let instance = ScenarioInstance::new(
        1.0,
        1.0,
        vec![0.5, 1.5, 0.0, 2.0, 1.0],
        vec![0.8, 0.2, 1.1, 0.0, 0.4],
        vec![0.7, 1.3, 1.0, 0.4, 1.8],
    )?;
    let tm = throughput_baseline(&instance, &LogRate);
    let dm = solve_delay_minimization(&instance, &LogRate, &SolverOptions::default())?;
    println!(" t  TM scheduled  TM sent   DM power");
    for t in 0..instance.horizon() {
        println!(
            "{:2} {:12.5} {:9.5} {:10.5}",
            t + 1,
            tm.scheduled[t],
            tm.transmitted[t],
            dm.powers[t]
        );
    }
    println!("average delay: TM {:.6}, DM {:.6}", tm.delay, dm.objective);
    Ok((tm.delay, dm.objective))
}

#[allow(dead_code)]
fn main() -> ehdo::Result<()> {
    run().map(|_| ())
}
