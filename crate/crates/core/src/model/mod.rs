//! Domain types and system dynamics.
//!
//! The battery and data queue evolve as
//! `E_t = E_{t-1} + H_t - p_t` and `Q_t = Q_{t-1} + D_t - r_{g_t}(p_t)`.
//! The delay metric is the time-average queue length, which can be written
//! either as the mean of the simulated `Q_t` or as a weighted sum over
//! per-slot net arrivals with weights `T + 1 - t`.

mod policy;
mod rate;
mod scenario;

pub use policy::{PowerPolicy, RatePolicy};
pub use rate::{LogRate, RateFunction};
pub(crate) use scenario::CompensatedSum;
pub use scenario::ScenarioInstance;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default absolute tolerance for feasibility checks.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;

/// Battery levels and queue lengths `E_0..E_T`, `Q_0..Q_T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub energy: Vec<f64>,
    pub queue: Vec<f64>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.queue.len().saturating_sub(1)
    }
}

fn check_len(instance: &ScenarioInstance, policy: &PowerPolicy) -> Result<()> {
    if policy.len() != instance.horizon() {
        return Err(Error::Input(format!(
            "policy has {} slots but the instance has T = {}",
            policy.len(),
            instance.horizon()
        )));
    }
    Ok(())
}

/// Runs the battery and queue recursions. Levels are allowed to go negative.
pub fn simulate_trajectory(
    instance: &ScenarioInstance,
    policy: &PowerPolicy,
    rate: &dyn RateFunction,
) -> Result<Trajectory> {
    check_len(instance, policy)?;
    let t_len = instance.horizon();
    let mut energy = Vec::with_capacity(t_len + 1);
    let mut queue = Vec::with_capacity(t_len + 1);
    energy.push(instance.initial_energy());
    queue.push(instance.initial_queue());
    for t in 0..t_len {
        let p = policy[t];
        energy.push(energy[t] + instance.energy_arrivals()[t] - p);
        queue.push(queue[t] + instance.data_arrivals()[t] - rate.rate(p, instance.gains()[t]));
    }
    Ok(Trajectory { energy, queue })
}

/// `(1/T) * sum_{t=1..T} Q_t`.
pub fn average_queue_length(trajectory: &Trajectory) -> Result<f64> {
    let t_len = trajectory.horizon();
    if t_len == 0 {
        return Err(Error::Input("trajectory has no slots after Q_0".into()));
    }
    let mut acc = CompensatedSum::default();
    for &q in &trajectory.queue[1..] {
        acc.add(q);
    }
    Ok(acc.value() / t_len as f64)
}

/// `Q0 + (1/T) * sum_t (T + 1 - t) * (D_t - r_{g_t}(p_t))`.
pub fn weighted_objective(
    instance: &ScenarioInstance,
    policy: &PowerPolicy,
    rate: &dyn RateFunction,
) -> Result<f64> {
    check_len(instance, policy)?;
    let t_len = instance.horizon();
    let mut acc = CompensatedSum::default();
    for t in 0..t_len {
        let net = instance.data_arrivals()[t] - rate.rate(policy[t], instance.gains()[t]);
        acc.add(instance.weight(t + 1) * net);
    }
    Ok(instance.initial_queue() + acc.value() / t_len as f64)
}

/// Per-slot outcome of [`check_feasibility`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotFeasibility {
    /// `E0 + sum H - sum p` through this slot.
    pub battery_slack: f64,
    /// `Q0 + sum D - sum r(p)` through this slot.
    pub queue_slack: f64,
    pub battery_ok: bool,
    pub queue_ok: bool,
    pub nonnegative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub tol: f64,
    pub slots: Vec<SlotFeasibility>,
    pub feasible: bool,
}

impl FeasibilityReport {
    /// 1-based slots whose cumulative battery constraint holds with slack at most `tol`.
    pub fn tight_battery_slots(&self, tol: f64) -> Vec<usize> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.battery_slack.abs() <= tol)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn violations(&self) -> Vec<usize> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| !(s.battery_ok && s.queue_ok && s.nonnegative))
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Checks the cumulative battery and queue constraints and `p >= 0`, each within `tol`.
pub fn check_feasibility(
    instance: &ScenarioInstance,
    policy: &PowerPolicy,
    rate: &dyn RateFunction,
    tol: f64,
) -> Result<FeasibilityReport> {
    check_len(instance, policy)?;
    if !(tol >= 0.0) {
        return Err(Error::Input(format!("tolerance {tol} must be nonnegative")));
    }
    let energy_budget = instance.energy_budget();
    let data_budget = instance.data_budget();
    let mut used_energy = CompensatedSum::default();
    let mut sent_data = CompensatedSum::default();
    let mut slots = Vec::with_capacity(instance.horizon());
    for t in 0..instance.horizon() {
        let p = policy[t];
        used_energy.add(p);
        sent_data.add(rate.rate(p.max(0.0), instance.gains()[t]));
        let battery_slack = energy_budget[t] - used_energy.value();
        let queue_slack = data_budget[t] - sent_data.value();
        slots.push(SlotFeasibility {
            battery_slack,
            queue_slack,
            battery_ok: battery_slack >= -tol,
            queue_ok: queue_slack >= -tol,
            nonnegative: p >= -tol,
        });
    }
    let feasible = slots
        .iter()
        .all(|s| s.battery_ok && s.queue_ok && s.nonnegative);
    Ok(FeasibilityReport {
        tol,
        slots,
        feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn inst(e0: f64, q0: f64, h: &[f64], d: &[f64], g: &[f64]) -> ScenarioInstance {
        ScenarioInstance::new(e0, q0, h.to_vec(), d.to_vec(), g.to_vec()).unwrap()
    }

    fn pol(p: &[f64]) -> PowerPolicy {
        PowerPolicy::new(p.to_vec()).unwrap()
    }

    #[test]
    fn zero_power_changes_nothing() {
        let s = inst(1.0, 1.0, &[0.0], &[0.0], &[1.0]);
        let tr = simulate_trajectory(&s, &pol(&[0.0]), &LogRate).unwrap();
        assert_eq!(tr.energy, vec![1.0, 1.0]);
        assert_eq!(tr.queue, vec![1.0, 1.0]);
    }

    #[test]
    fn single_step_recursion() {
        let s = inst(1.0, 1.0, &[0.0], &[0.0], &[1.0]);
        let tr = simulate_trajectory(&s, &pol(&[1.0]), &LogRate).unwrap();
        assert_eq!(tr.energy, vec![1.0, 0.0]);
        assert_abs_diff_eq!(tr.queue[1], 1.0 - 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(tr.queue[1], 0.30685, epsilon = 1e-5);
    }

    #[test]
    fn two_slot_trajectory_and_both_objectives() {
        let s = inst(2.0, 5.0, &[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]);
        let p = pol(&[5.0 / 3.0, 1.0 / 3.0]);
        let tr = simulate_trajectory(&s, &p, &LogRate).unwrap();
        let q1 = 5.0 - (8.0f64 / 3.0).ln();
        let q2 = q1 - (4.0f64 / 3.0).ln();
        assert_abs_diff_eq!(tr.queue[1], q1, epsilon = 1e-14);
        assert_abs_diff_eq!(tr.queue[2], q2, epsilon = 1e-14);
        assert_abs_diff_eq!(tr.queue[2], 3.73149, epsilon = 1e-5);
        let avg = average_queue_length(&tr).unwrap();
        assert_abs_diff_eq!(avg, 3.87533, epsilon = 1e-5);
        let w = weighted_objective(&s, &p, &LogRate).unwrap();
        assert_abs_diff_eq!(w, avg, epsilon = 1e-14);
    }

    #[test]
    fn average_examples() {
        let tr = Trajectory {
            energy: vec![0.0; 3],
            queue: vec![1.0, 1.0, 1.0],
        };
        assert_eq!(average_queue_length(&tr).unwrap(), 1.0);
        let tr = Trajectory {
            energy: vec![0.0; 3],
            queue: vec![0.0, 2.0, 4.0],
        };
        assert_eq!(average_queue_length(&tr).unwrap(), 3.0);
        let empty = Trajectory {
            energy: vec![0.0],
            queue: vec![0.0],
        };
        assert!(average_queue_length(&empty).is_err());
    }

    #[test]
    fn weighted_objective_examples() {
        let s = inst(0.0, 3.5, &[0.0; 4], &[0.0; 4], &[1.0; 4]);
        assert_eq!(
            weighted_objective(&s, &PowerPolicy::zeros(4), &LogRate).unwrap(),
            3.5
        );
        let s = inst(0.0, 0.0, &[0.0; 3], &[1.0; 3], &[1.0; 3]);
        assert_abs_diff_eq!(
            weighted_objective(&s, &PowerPolicy::zeros(3), &LogRate).unwrap(),
            2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn length_mismatch_is_input_error() {
        let s = inst(1.0, 1.0, &[0.0], &[0.0], &[1.0]);
        let p = pol(&[0.0, 0.0]);
        assert!(matches!(
            simulate_trajectory(&s, &p, &LogRate),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            weighted_objective(&s, &p, &LogRate),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            check_feasibility(&s, &p, &LogRate, 0.0),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn feasibility_examples() {
        let s = inst(1.0, 1.0, &[0.0], &[0.0], &[1.0]);
        let rep = check_feasibility(&s, &pol(&[1.5]), &LogRate, DEFAULT_FEASIBILITY_TOL).unwrap();
        assert!(!rep.feasible);
        assert!(!rep.slots[0].battery_ok);
        assert_eq!(rep.violations(), vec![1]);

        let s = inst(1.0, 5.0, &[0.0, 1.0], &[0.0, 0.0], &[1.0, 1.0]);
        let rep =
            check_feasibility(&s, &pol(&[1.0, 1.0]), &LogRate, DEFAULT_FEASIBILITY_TOL).unwrap();
        assert!(rep.feasible);
        assert_eq!(rep.tight_battery_slots(1e-12), vec![1, 2]);

        let rep = check_feasibility(
            &s,
            &PowerPolicy::new_unchecked(vec![-0.1, 0.0]),
            &LogRate,
            DEFAULT_FEASIBILITY_TOL,
        )
        .unwrap();
        assert!(!rep.slots[0].nonnegative);
    }

    fn instance_and_policy() -> impl Strategy<Value = (ScenarioInstance, PowerPolicy)> {
        (1usize..12).prop_flat_map(|t| {
            (
                0.0f64..5.0,
                0.0f64..5.0,
                prop::collection::vec(0.0f64..3.0, t),
                prop::collection::vec(0.0f64..3.0, t),
                prop::collection::vec(0.05f64..4.0, t),
                prop::collection::vec(0.0f64..4.0, t),
            )
                .prop_map(|(e0, q0, h, d, g, p)| {
                    (inst(e0, q0, &h, &d, &g), PowerPolicy::new(p).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn objective_forms_agree((s, p) in instance_and_policy()) {
            let tr = simulate_trajectory(&s, &p, &LogRate).unwrap();
            let a = average_queue_length(&tr).unwrap();
            let b = weighted_objective(&s, &p, &LogRate).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn unrolled_queue_matches_recursion((s, p) in instance_and_policy()) {
            let tr = simulate_trajectory(&s, &p, &LogRate).unwrap();
            let mut net = CompensatedSum::new(s.initial_queue());
            for t in 0..s.horizon() {
                net.add(s.data_arrivals()[t] - LogRate.rate(p[t], s.gains()[t]));
                prop_assert!((net.value() - tr.queue[t + 1]).abs() <= 1e-12 * (1.0 + net.value().abs()));
            }
        }

        #[test]
        fn zero_policy_is_always_feasible((s, _p) in instance_and_policy()) {
            let rep = check_feasibility(&s, &PowerPolicy::zeros(s.horizon()), &LogRate, 0.0).unwrap();
            prop_assert!(rep.feasible);
        }
    }
}
