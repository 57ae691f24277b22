//! Weighted directional water-filling on a small tank, with the
//! monotone water-level check.

use ehdo::model::ScenarioInstance;
use ehdo::waterfill::{fill, verify_level_monotonicity, weighted_dwf, WaterTank};

pub fn run() -> ehdo::Result<Vec<f64>> {
    // energy arrives late, so the first wall holds the level down
    let instance = ScenarioInstance::new(
        0.5,
        10.0,
        vec![0.0, 2.0, 0.0, 1.0],
        vec![0.0; 4],
        vec![1.0, 0.5, 2.0, 1.0],
    )?;
    let tank = WaterTank::weighted(&instance);
    let filled = fill(&tank);
    println!(" t   width   ground  inflow   power   level");
    for t in 0..tank.len() {
        println!(
            "{:2} {:7.3} {:8.4} {:7.3} {:7.4} {:7.4}",
            t + 1,
            tank.widths[t],
            tank.grounds[t],
            tank.inflows[t],
            filled.powers[t],
            tank.grounds[t] + filled.depths[t]
        );
    }
    for s in &filled.segments {
        println!(
            "segment slots {}..={} level {:.4}",
            s.start + 1,
            s.end,
            s.level
        );
    }

    let (policy, levels) = weighted_dwf(&instance);
    let nu: Vec<f64> = levels.iter().map(|l| l.level).collect();
    let report = verify_level_monotonicity(&nu, &policy, &instance, 1e-8)?;
    println!(
        "levels non-decreasing and equal across slack walls: {}",
        report.passed()
    );
    Ok(filled.powers)
}

#[allow(dead_code)]
fn main() -> ehdo::Result<()> {
    run().map(|_| ())
}
