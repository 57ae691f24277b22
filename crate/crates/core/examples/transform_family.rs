//! The affine family of rate transforms: every member turns the delay
//! problem convex, and pulling back through any of them recovers the
//! same powers.

use ehdo::model::ScenarioInstance;
use ehdo::model::{LogRate, RateFunction, RatePolicy};
use ehdo::transform::{build_transform, canonical_transform, map_policy};

pub fn run() -> ehdo::Result<()> {
    let instance = ScenarioInstance::new(1.0, 2.0, vec![0.5, 0.5], vec![0.0, 1.0], vec![0.8, 1.5])?;
    let canonical = canonical_transform(&instance, &LogRate);
    let scaled = build_transform(
        vec![2.0, 0.5],
        vec![0.1, -0.2],
        &LogRate,
        instance.gains().to_vec(),
    )?;

    let rates = RatePolicy::new(vec![0.4, 0.9])?;
    let p = map_policy(&canonical, &rates)?;
    println!(
        "canonical pull-back of r = (0.4, 0.9): p = ({:.6}, {:.6})",
        p[0], p[1]
    );

    // the same powers reached through the other member
    for t in 0..2 {
        let q = scaled.pullback(t, p[t]);
        let back = scaled.forward(t, q)?;
        println!(
            "slot {}: q = {:.6}, phi(q) = {:.6}, r(phi(q)) = {:.6}",
            t + 1,
            q,
            back,
            LogRate.rate(back, instance.gains()[t])
        );
    }

    // second differences of the composed rate stay at or above zero
    let h = 1e-3;
    let worst = (1..200)
        .map(|k| {
            let x = k as f64 * 0.01;
            let f = |y: f64| scaled.forward(0, y).unwrap();
            (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
        })
        .fold(f64::INFINITY, f64::min);
    println!("smallest second difference of phi_1 on (0, 2): {worst:.4}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> ehdo::Result<()> {
    run()
}
