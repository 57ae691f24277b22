//! Brute-force lattice search for horizons of at most four slots.
//!
//! These routines share nothing with the interior-point solver or the
//! water-filling code beyond the scenario type, and exist to check both.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{RateFunction, ScenarioInstance};

pub const MAX_ORACLE_HORIZON: usize = 4;

/// Lattice resolution: `points` evenly spaced values per axis including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    pub points: usize,
}

impl GridSpec {
    pub fn new(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Input(format!(
                "grid needs at least 2 points per axis, got {points}"
            )));
        }
        Ok(Self { points })
    }

    /// Lattice containing this one with half the spacing.
    pub fn refined(&self) -> Self {
        Self {
            points: 2 * self.points - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// Best lattice point (rates for the delay search, powers for throughput).
    pub point: Vec<f64>,
    pub objective: f64,
    /// A-priori bound on the distance between `objective` and the true optimum.
    pub error_bound: f64,
}

fn check_horizon(instance: &ScenarioInstance) -> Result<()> {
    if instance.horizon() > MAX_ORACLE_HORIZON {
        return Err(Error::Refused(format!(
            "T = {} exceeds the lattice search limit of {MAX_ORACLE_HORIZON}",
            instance.horizon()
        )));
    }
    Ok(())
}

/// Generic lattice sweep over axes `0..T` with `points` values in `[0, upper]`.
///
/// `feasible(prefix_len, indices)` must be monotone: raising any index never
/// restores feasibility. For a fixed prefix the best completion is always the
/// largest feasible last index, because both objectives increase in every
/// coordinate. `last_guess` only affects speed.
struct Sweep<'a> {
    t_len: usize,
    points: usize,
    feasible: &'a dyn Fn(usize, &[usize]) -> bool,
    score: &'a dyn Fn(&[usize]) -> f64,
    /// Estimate of the largest feasible last index given the prefix.
    last_guess: &'a dyn Fn(&[usize]) -> usize,
}

impl Sweep<'_> {
    fn run(&self) -> (Vec<usize>, f64) {
        let mut idx = vec![0usize; self.t_len];
        let mut best = (idx.clone(), (self.score)(&idx));
        self.recurse(0, &mut idx, &mut best);
        best
    }

    fn recurse(&self, axis: usize, idx: &mut Vec<usize>, best: &mut (Vec<usize>, f64)) {
        if axis + 1 == self.t_len {
            // start from the closed-form guess, then settle on the exact boundary
            idx[axis] = (self.last_guess)(idx).min(self.points - 1);
            while idx[axis] > 0 && !(self.feasible)(axis + 1, idx) {
                idx[axis] -= 1;
            }
            if !(self.feasible)(axis + 1, idx) {
                return;
            }
            while idx[axis] + 1 < self.points {
                idx[axis] += 1;
                if !(self.feasible)(axis + 1, idx) {
                    idx[axis] -= 1;
                    break;
                }
            }
            let s = (self.score)(idx);
            // strict improvement keeps the lexicographically smallest tie
            if s > best.1 {
                *best = (idx.clone(), s);
            }
            return;
        }
        for k in 0..self.points {
            idx[axis] = k;
            if !(self.feasible)(axis + 1, idx) {
                break;
            }
            self.recurse(axis + 1, idx, best);
        }
        idx[axis] = 0;
    }
}

fn lattice_value(k: usize, upper: f64, points: usize) -> f64 {
    k as f64 * upper / (points - 1) as f64
}

/// Best lattice point of the delay problem in rate space `q in [0, Q0 + sum D]^T`.
pub fn grid_search_delay(
    instance: &ScenarioInstance,
    rate: &dyn RateFunction,
    grid: &GridSpec,
) -> Result<OracleResult> {
    check_horizon(instance)?;
    let t_len = instance.horizon();
    let n = grid.points;
    let upper = instance.total_data();
    let energy = instance.energy_budget();
    let data = instance.data_budget();
    let gains = instance.gains();

    let feasible = |len: usize, idx: &[usize]| {
        let mut used = 0.0;
        let mut sent = 0usize;
        for t in 0..len {
            used += rate.inverse(lattice_value(idx[t], upper, n), gains[t]);
            sent += idx[t];
            if used > energy[t] || lattice_value(sent, upper, n) > data[t] {
                return false;
            }
        }
        true
    };
    // integer weighted index sum; larger is better and ties compare exactly
    let score = |idx: &[usize]| {
        idx.iter()
            .enumerate()
            .map(|(t, &k)| ((t_len - t) * k) as f64)
            .sum::<f64>()
    };
    let h = upper / (n - 1) as f64;
    let last = t_len - 1;
    let last_guess = |idx: &[usize]| {
        if h <= 0.0 {
            return 0;
        }
        let used: f64 = (0..last)
            .map(|t| rate.inverse(lattice_value(idx[t], upper, n), gains[t]))
            .sum();
        let sent = lattice_value(idx[..last].iter().sum(), upper, n);
        let by_energy = rate.rate((energy[last] - used).max(0.0), gains[last]);
        let by_data = data[last] - sent;
        (by_energy.min(by_data).max(0.0) / h) as usize
    };
    let (best, _) = Sweep {
        t_len,
        points: n,
        feasible: &feasible,
        score: &score,
        last_guess: &last_guess,
    }
    .run();

    let point: Vec<f64> = best.iter().map(|&k| lattice_value(k, upper, n)).collect();
    let t_f = t_len as f64;
    let mut objective = instance.initial_queue();
    for (t, (&d, &q)) in instance.data_arrivals().iter().zip(&point).enumerate() {
        objective += instance.weight(t + 1) * (d - q) / t_f;
    }
    // slots forced to zero by an empty budget carry no rounding error
    let error_bound: f64 = (0..t_len)
        .filter(|&t| energy[t] > 0.0 && data[t] > 0.0)
        .map(|t| instance.weight(t + 1) / t_f * h)
        .sum();
    Ok(OracleResult {
        point,
        objective,
        error_bound,
    })
}

/// Best lattice point of `max sum (T + 1 - t) log(1 + g_t p_t)` in
/// `p in [0, E0 + sum H]^T` under the battery constraints.
pub fn grid_search_weighted_throughput(
    instance: &ScenarioInstance,
    grid: &GridSpec,
) -> Result<OracleResult> {
    check_horizon(instance)?;
    let t_len = instance.horizon();
    let n = grid.points;
    let upper = instance.total_energy();
    let energy = instance.energy_budget();
    let gains = instance.gains();

    let feasible = |len: usize, idx: &[usize]| {
        let mut used = 0usize;
        for t in 0..len {
            used += idx[t];
            if lattice_value(used, upper, n) > energy[t] {
                return false;
            }
        }
        true
    };
    let score = |idx: &[usize]| {
        idx.iter()
            .enumerate()
            .map(|(t, &k)| (t_len - t) as f64 * (gains[t] * lattice_value(k, upper, n)).ln_1p())
            .sum::<f64>()
    };
    let h = upper / (n - 1) as f64;
    let last_guess = |idx: &[usize]| {
        if h <= 0.0 {
            return 0;
        }
        let used = lattice_value(idx[..t_len - 1].iter().sum(), upper, n);
        ((energy[t_len - 1] - used).max(0.0) / h) as usize
    };
    let (best, objective) = Sweep {
        t_len,
        points: n,
        feasible: &feasible,
        score: &score,
        last_guess: &last_guess,
    }
    .run();

    let error_bound = (0..t_len)
        .filter(|&t| energy[t] > 0.0)
        .map(|t| (t_len - t) as f64 * gains[t] * h)
        .sum();
    Ok(OracleResult {
        point: best.iter().map(|&k| lattice_value(k, upper, n)).collect(),
        objective,
        error_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LogRate;
    use approx::assert_abs_diff_eq;

    fn inst(e0: f64, q0: f64, h: &[f64], d: &[f64], g: &[f64]) -> ScenarioInstance {
        ScenarioInstance::new(e0, q0, h.to_vec(), d.to_vec(), g.to_vec()).unwrap()
    }

    #[test]
    fn no_energy_single_slot() {
        let s = inst(0.0, 1.5, &[0.0], &[0.5], &[1.0]);
        let r = grid_search_delay(&s, &LogRate, &GridSpec::new(101).unwrap()).unwrap();
        assert_eq!(r.point, vec![0.0]);
        assert_abs_diff_eq!(r.objective, 2.0, epsilon = 1e-15);
        assert_eq!(r.error_bound, 0.0);
    }

    #[test]
    fn two_slot_delay_value() {
        let s = inst(2.0, 5.0, &[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]);
        let r = grid_search_delay(&s, &LogRate, &GridSpec::new(2001).unwrap()).unwrap();
        let exact = 5.0 - (2.0 * (8.0f64 / 3.0).ln() + (4.0f64 / 3.0).ln()) / 2.0;
        assert!(r.objective >= exact - 1e-12);
        assert!(r.objective - exact <= r.error_bound);
        assert!((r.objective - 3.87533).abs() < r.error_bound);
    }

    #[test]
    fn abundant_energy_lattice_hits_optimum() {
        let s = inst(100.0, 1.0, &[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]);
        let r = grid_search_delay(&s, &LogRate, &GridSpec::new(11).unwrap()).unwrap();
        assert_eq!(r.point, vec![1.0, 0.0]);
        assert_abs_diff_eq!(r.objective, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn refuses_long_horizons() {
        let s = inst(1.0, 1.0, &[0.0; 5], &[0.0; 5], &[1.0; 5]);
        let g = GridSpec::new(3).unwrap();
        assert!(matches!(
            grid_search_delay(&s, &LogRate, &g),
            Err(Error::Refused(_))
        ));
        assert!(matches!(
            grid_search_weighted_throughput(&s, &g),
            Err(Error::Refused(_))
        ));
        assert!(GridSpec::new(1).is_err());
    }

    #[test]
    fn weighted_throughput_examples() {
        let s = inst(2.0, 0.0, &[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]);
        let r = grid_search_weighted_throughput(&s, &GridSpec::new(601).unwrap()).unwrap();
        assert_abs_diff_eq!(r.point[0], 5.0 / 3.0, epsilon = 2.0 / 600.0);
        assert_abs_diff_eq!(r.point[1], 1.0 / 3.0, epsilon = 2.0 / 600.0);

        let s = inst(0.0, 0.0, &[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]);
        let r = grid_search_weighted_throughput(&s, &GridSpec::new(5).unwrap()).unwrap();
        assert_eq!(r.point, vec![0.0, 0.0]);
        assert_eq!(r.objective, 0.0);

        let s = inst(0.0, 0.0, &[0.0, 2.0], &[0.0, 0.0], &[1.0, 1.0]);
        let r = grid_search_weighted_throughput(&s, &GridSpec::new(101).unwrap()).unwrap();
        assert_eq!(r.point, vec![0.0, 2.0]);
    }

    #[test]
    fn refinement_never_worsens() {
        let cases = [
            inst(
                0.7,
                1.3,
                &[0.2, 0.9, 0.1],
                &[0.4, 0.0, 1.1],
                &[1.7, 0.3, 0.9],
            ),
            inst(2.0, 5.0, &[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]),
        ];
        for s in &cases {
            let mut grid = GridSpec::new(9).unwrap();
            let mut prev = grid_search_delay(s, &LogRate, &grid).unwrap().objective;
            let mut prev_tp = grid_search_weighted_throughput(s, &grid).unwrap().objective;
            for _ in 0..4 {
                grid = grid.refined();
                let cur = grid_search_delay(s, &LogRate, &grid).unwrap().objective;
                let cur_tp = grid_search_weighted_throughput(s, &grid).unwrap().objective;
                assert!(cur <= prev + 1e-12);
                assert!(cur_tp >= prev_tp - 1e-12);
                prev = cur;
                prev_tp = cur_tp;
            }
        }
    }
}
