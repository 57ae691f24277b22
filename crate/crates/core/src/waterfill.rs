//! Directional water-filling for the battery-only throughput problems.
//!
//! When the queue never empties, delay minimization reduces to maximizing
//! `sum_t w_t log(1 + g_t p_t)` under cumulative energy constraints with
//! `w_t = T + 1 - t`. Its solution is a water-filling over a tank whose slot
//! `t` has width `w_t` and ground `delta_t = 1 / (w_t g_t)`. The walls
//! between slots let water flow right (energy saved for later) but never
//! left (energy cannot be spent before it arrives).
//!
//! The fill runs left to right over a stack of equal-level segments. Each
//! slot's inflow is poured into its own column; while the segment to the
//! left stands higher than the newest one, the two are merged and levelled.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    average_queue_length, simulate_trajectory, PowerPolicy, RateFunction, ScenarioInstance,
    Trajectory,
};

/// Tank geometry and per-slot inflows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaterTank {
    pub widths: Vec<f64>,
    pub grounds: Vec<f64>,
    /// `E0 + H_1` in slot 1, `H_t` afterwards.
    pub inflows: Vec<f64>,
}

impl WaterTank {
    /// Widths `T + 1 - t`, grounds `1 / ((T + 1 - t) g_t)`.
    pub fn weighted(instance: &ScenarioInstance) -> Self {
        let widths: Vec<f64> = (1..=instance.horizon())
            .map(|t| instance.weight(t))
            .collect();
        let grounds = widths
            .iter()
            .zip(instance.gains())
            .map(|(w, g)| 1.0 / (w * g))
            .collect();
        Self {
            widths,
            grounds,
            inflows: inflows(instance),
        }
    }

    /// Unit widths, grounds `1 / g_t`.
    pub fn unweighted(instance: &ScenarioInstance) -> Self {
        Self {
            widths: vec![1.0; instance.horizon()],
            grounds: instance.gains().iter().map(|g| 1.0 / g).collect(),
            inflows: inflows(instance),
        }
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    pub fn total_volume(&self) -> f64 {
        self.inflows.iter().sum()
    }
}

fn inflows(instance: &ScenarioInstance) -> Vec<f64> {
    let mut v = instance.energy_arrivals().to_vec();
    v[0] += instance.initial_energy();
    v
}

/// Contiguous run of slots sharing one water level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    /// 0-based, inclusive.
    pub start: usize,
    /// 0-based, exclusive.
    pub end: usize,
    pub volume: f64,
    pub level: f64,
}

/// Result of a fill: powers plus the geometry needed to draw it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaterFilling {
    pub tank: WaterTank,
    pub segments: Vec<Segment>,
    pub powers: Vec<f64>,
    /// Depth `p_t / w_t` of each column.
    pub depths: Vec<f64>,
    /// Water surface of the segment containing each slot.
    pub surface: Vec<f64>,
}

/// Smallest level `nu` with `sum_{t in range} w_t (nu - delta_t)^+ = volume`.
fn level_for(tank: &WaterTank, start: usize, end: usize, volume: f64) -> f64 {
    let mut members: Vec<(f64, f64)> = (start..end)
        .map(|t| (tank.grounds[t], tank.widths[t]))
        .collect();
    members.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut width = 0.0;
    let mut weighted_ground = 0.0;
    for (k, &(ground, w)) in members.iter().enumerate() {
        width += w;
        weighted_ground += w * ground;
        let level = (volume + weighted_ground) / width;
        match members.get(k + 1) {
            Some(&(next, _)) if level > next => continue,
            _ => return level,
        }
    }
    unreachable!("segments are never empty")
}

/// Runs the forward segment-merging fill over `tank`.
pub fn fill(tank: &WaterTank) -> WaterFilling {
    let mut stack: Vec<Segment> = Vec::with_capacity(tank.len());
    for t in 0..tank.len() {
        let volume = tank.inflows[t];
        let mut top = Segment {
            start: t,
            end: t + 1,
            volume,
            level: level_for(tank, t, t + 1, volume),
        };
        while let Some(prev) = stack.last() {
            if prev.level <= top.level {
                break;
            }
            let prev = stack.pop().expect("checked non-empty");
            let volume = prev.volume + top.volume;
            top = Segment {
                start: prev.start,
                end: top.end,
                volume,
                level: level_for(tank, prev.start, top.end, volume),
            };
        }
        stack.push(top);
    }

    let mut powers = vec![0.0; tank.len()];
    let mut depths = vec![0.0; tank.len()];
    let mut surface = vec![0.0; tank.len()];
    for seg in &stack {
        for t in seg.start..seg.end {
            // ties at the ground get no power
            let depth = (seg.level - tank.grounds[t]).max(0.0);
            depths[t] = depth;
            powers[t] = tank.widths[t] * depth;
            surface[t] = seg.level;
        }
    }
    WaterFilling {
        tank: tank.clone(),
        segments: stack,
        powers,
        depths,
        surface,
    }
}

/// Weighted directional water-filling: the unique maximizer of
/// `sum_t (T + 1 - t) log(1 + g_t p_t)` under the battery constraints.
///
/// Returns the powers and the per-slot water levels `delta_t + d_t`.
pub fn weighted_dwf(instance: &ScenarioInstance) -> (PowerPolicy, Vec<WaterLevel>) {
    let filled = fill(&WaterTank::weighted(instance));
    let policy = PowerPolicy::new_unchecked(filled.powers);
    let levels = water_levels(instance, &policy).expect("fill output is nonnegative and sized T");
    (policy, levels)
}

/// Classic directional water-filling maximizing `sum_t log(1 + g_t p_t)`.
pub fn unweighted_dwf(instance: &ScenarioInstance) -> PowerPolicy {
    PowerPolicy::new_unchecked(fill(&WaterTank::unweighted(instance)).powers)
}

/// Throughput-maximizing baseline evaluated for delay.
///
/// The baseline schedule ignores the data queue. A slot whose scheduled rate
/// exceeds the queue content sends only what is queued; the surplus energy
/// stays unused rather than being reallocated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Baseline {
    pub scheduled: PowerPolicy,
    pub transmitted: PowerPolicy,
    pub trajectory: Trajectory,
    pub delay: f64,
}

pub fn throughput_baseline(instance: &ScenarioInstance, rate: &dyn RateFunction) -> Baseline {
    let scheduled = unweighted_dwf(instance);
    let gains = instance.gains();
    let mut backlog = instance.initial_queue();
    let mut sent = Vec::with_capacity(scheduled.len());
    for (t, &p) in scheduled.as_slice().iter().enumerate() {
        let available = backlog + instance.data_arrivals()[t];
        let r = rate.rate(p, gains[t]);
        if r > available {
            sent.push(rate.inverse(available, gains[t]).min(p));
            backlog = 0.0;
        } else {
            sent.push(p);
            backlog = available - r;
        }
    }
    let transmitted = PowerPolicy::new_unchecked(sent);
    let mut trajectory =
        simulate_trajectory(instance, &transmitted, rate).expect("baseline policy is sized T");
    // the inverse rate may leave a rounding residue of either sign
    for q in trajectory.queue.iter_mut() {
        *q = q.max(0.0);
    }
    let delay = average_queue_length(&trajectory).expect("T >= 1");
    Baseline {
        scheduled,
        transmitted,
        trajectory,
        delay,
    }
}

/// Water level of one slot. Dry slots report their ground level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaterLevel {
    pub level: f64,
    pub dry: bool,
}

/// `nu_t = delta_t + p_t / (T + 1 - t)` on the weighted tank.
pub fn water_levels(instance: &ScenarioInstance, policy: &PowerPolicy) -> Result<Vec<WaterLevel>> {
    if policy.len() != instance.horizon() {
        return Err(Error::Input(format!(
            "policy has {} slots but T = {}",
            policy.len(),
            instance.horizon()
        )));
    }
    let tank = WaterTank::weighted(instance);
    policy
        .as_slice()
        .iter()
        .enumerate()
        .map(|(t, &p)| {
            if !(p >= 0.0) {
                return Err(Error::Input(format!("p[{}] = {p} is negative", t + 1)));
            }
            Ok(WaterLevel {
                level: tank.grounds[t] + p / tank.widths[t],
                dry: p == 0.0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LevelViolationKind {
    /// `nu_{t+1} < nu_t - tol`.
    Decreasing,
    /// Battery slack at `t` exceeds `tol` but `|nu_{t+1} - nu_t| > tol`.
    UnequalAtSlack,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelViolation {
    /// 1-based slot `t` of the pair `(t, t + 1)`.
    pub slot: usize,
    pub kind: LevelViolationKind,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub pairs_checked: usize,
    pub equality_checks: usize,
    pub violations: Vec<LevelViolation>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that water levels never drop between consecutive wet slots and
/// stay equal wherever the battery is not exhausted.
///
/// Slots with `p_t <= tol` count as dry and are excluded.
pub fn verify_level_monotonicity(
    levels: &[f64],
    policy: &PowerPolicy,
    instance: &ScenarioInstance,
    tol: f64,
) -> Result<MonotonicityReport> {
    let t_len = instance.horizon();
    if levels.len() != t_len || policy.len() != t_len {
        return Err(Error::Input(
            "levels, policy and instance must share length T".into(),
        ));
    }
    let budget = instance.energy_budget();
    let mut used = 0.0;
    let mut report = MonotonicityReport {
        pairs_checked: 0,
        equality_checks: 0,
        violations: Vec::new(),
    };
    for t in 0..t_len.saturating_sub(1) {
        used += policy[t];
        if policy[t] <= tol || policy[t + 1] <= tol {
            continue;
        }
        report.pairs_checked += 1;
        let gap = levels[t + 1] - levels[t];
        if gap < -tol {
            report.violations.push(LevelViolation {
                slot: t + 1,
                kind: LevelViolationKind::Decreasing,
                gap,
            });
        }
        if budget[t] - used > tol {
            report.equality_checks += 1;
            if gap.abs() > tol {
                report.violations.push(LevelViolation {
                    slot: t + 1,
                    kind: LevelViolationKind::UnequalAtSlack,
                    gap,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LogRate;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn inst(e0: f64, h: &[f64], g: &[f64]) -> ScenarioInstance {
        let n = h.len();
        ScenarioInstance::new(e0, 0.0, h.to_vec(), vec![0.0; n], g.to_vec()).unwrap()
    }

    fn levels_of(v: &[WaterLevel]) -> Vec<f64> {
        v.iter().map(|l| l.level).collect()
    }

    #[test]
    fn two_slot_equal_levels() {
        let s = inst(2.0, &[0.0, 0.0], &[1.0, 1.0]);
        let (p, nu) = weighted_dwf(&s);
        assert_abs_diff_eq!(p[0], 5.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p[1], 1.0 / 3.0, epsilon = 1e-14);
        let f = fill(&WaterTank::weighted(&s));
        assert_abs_diff_eq!(f.depths[0], 5.0 / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.depths[1], 1.0 / 3.0, epsilon = 1e-14);
        assert_eq!(f.tank.grounds, vec![0.5, 1.0]);
        assert_abs_diff_eq!(nu[0].level, 4.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(nu[1].level, 4.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn wall_blocks_backflow() {
        let s = inst(1.0, &[0.0, 1.0], &[1.0, 1.0]);
        let (p, nu) = weighted_dwf(&s);
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p[1], 1.0, epsilon = 1e-14);
        assert_eq!(levels_of(&nu), vec![1.0, 2.0]);
        let rep = verify_level_monotonicity(&levels_of(&nu), &p, &s, 1e-8).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.equality_checks, 0);
    }

    #[test]
    fn no_water() {
        let s = inst(0.0, &[0.0; 3], &[1.0, 2.0, 0.5]);
        let (p, nu) = weighted_dwf(&s);
        assert!(p.as_slice().iter().all(|&x| x == 0.0));
        let tank = WaterTank::weighted(&s);
        for (l, g) in nu.iter().zip(&tank.grounds) {
            assert!(l.dry);
            assert_eq!(l.level, *g);
        }
    }

    #[test]
    fn unweighted_examples() {
        let s = inst(2.0, &[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(unweighted_dwf(&s).as_slice(), &[1.0, 1.0]);
        let s = inst(0.0, &[2.0, 0.0], &[1.0, 1.0]);
        assert_eq!(unweighted_dwf(&s).as_slice(), &[1.0, 1.0]);
        let s = inst(0.0, &[0.0, 2.0], &[1.0, 1.0]);
        assert_eq!(unweighted_dwf(&s).as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn water_levels_examples() {
        let s = inst(0.0, &[0.0, 0.0], &[1.0, 1.0]);
        let nu = water_levels(&s, &PowerPolicy::new(vec![5.0 / 3.0, 1.0 / 3.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(nu[0].level, 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(nu[1].level, 4.0 / 3.0, epsilon = 1e-15);
        let nu = water_levels(&s, &PowerPolicy::new(vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(levels_of(&nu), vec![1.0, 2.0]);
        let nu = water_levels(&s, &PowerPolicy::zeros(2)).unwrap();
        assert!(nu.iter().all(|l| l.dry));
        assert_eq!(levels_of(&nu), vec![0.5, 1.0]);
    }

    #[test]
    fn monotonicity_examples() {
        // slack after slot 1 (5/3 < 2): equality clause applies and holds
        let s = inst(2.0, &[0.0, 0.0], &[1.0, 1.0]);
        let p = PowerPolicy::new(vec![5.0 / 3.0, 1.0 / 3.0]).unwrap();
        let rep = verify_level_monotonicity(&[4.0 / 3.0, 4.0 / 3.0], &p, &s, 1e-8).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.equality_checks, 1);

        let p = PowerPolicy::new(vec![1.0, 1.0]).unwrap();
        let rep = verify_level_monotonicity(&[2.0, 1.0], &p, &s, 1e-8).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.violations[0].kind, LevelViolationKind::Decreasing);
    }

    #[test]
    fn dry_middle_slot_passes_energy_through() {
        // slot 2 has a terrible channel; energy from slot 1 still reaches slot 3
        let s = inst(0.0, &[3.0, 0.0, 0.0], &[1.0, 1e-6, 1.0]);
        let p = unweighted_dwf(&s);
        assert_eq!(p[1], 0.0);
        assert_abs_diff_eq!(p[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn single_harvest_linear_decrease() {
        let mut h = vec![0.0; 10];
        h[0] = 0.0;
        let s = inst(1.0, &h, &[1.0; 10]);
        let (p, _) = weighted_dwf(&s);
        let support: Vec<f64> = p
            .as_slice()
            .iter()
            .copied()
            .take_while(|&x| x > 0.0)
            .collect();
        assert_eq!(support.len(), 4);
        assert!(p.as_slice()[4..].iter().all(|&x| x == 0.0));
        for w in support.windows(2) {
            assert!(w[1] < w[0]);
        }
        for w in support.windows(3) {
            assert!((w[2] - 2.0 * w[1] + w[0]).abs() <= 1e-12);
        }
        // nu = 5/34 on the support {1..4}
        assert_abs_diff_eq!(support[0], 10.0 * 5.0 / 34.0 - 1.0, epsilon = 1e-14);
    }

    fn random_instance() -> impl Strategy<Value = ScenarioInstance> {
        (1usize..12).prop_flat_map(|t| {
            (
                0.0f64..3.0,
                prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..3.0], t),
                prop::collection::vec(0.05f64..4.0, t),
            )
                .prop_map(|(e0, h, g)| inst(e0, &h, &g))
        })
    }

    proptest! {
        #[test]
        fn energy_is_conserved_and_causal(s in random_instance()) {
            let (p, nu) = weighted_dwf(&s);
            let total = s.total_energy();
            let spent: f64 = p.as_slice().iter().sum();
            prop_assert!(spent <= total + 1e-9);
            prop_assert!((spent - total).abs() <= 1e-9 * (1.0 + total));
            let budget = s.energy_budget();
            let mut used = 0.0;
            for t in 0..s.horizon() {
                used += p[t];
                prop_assert!(used <= budget[t] + 1e-9);
            }
            let rep = verify_level_monotonicity(&levels_of(&nu), &p, &s, 1e-8).unwrap();
            prop_assert!(rep.passed(), "{:?}", rep);
        }

        #[test]
        fn fill_is_deterministic(s in random_instance()) {
            let a = weighted_dwf(&s).0;
            let b = weighted_dwf(&s).0;
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn baseline_caps_at_queue() {
        let s = ScenarioInstance::new(10.0, 1.0, vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0])
            .unwrap();
        let b = throughput_baseline(&s, &LogRate);
        assert_abs_diff_eq!(b.scheduled[0], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.transmitted[0], 1f64.exp_m1(), epsilon = 1e-12);
        assert_eq!(b.transmitted[1], 0.0);
        assert_eq!(b.delay, 0.0);
    }
}
