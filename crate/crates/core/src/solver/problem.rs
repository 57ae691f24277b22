use crate::model::{CompensatedSum, RateFunction, ScenarioInstance};

/// The delay problem in transformed variables `q_t = r_{g_t}(p_t)`:
///
/// ```text
/// minimize    constant + sum_t c_t q_t,           c_t = -(T + 1 - t) / T
/// subject to  sum_{i<=t} r_{g_i}^{-1}(q_i) <= E0 + sum_{i<=t} H_i
///             sum_{i<=t} q_i               <= Q0 + sum_{i<=t} D_i
///             q_t >= 0
/// ```
///
/// The queue rows can be dropped, which gives the weighted-throughput
/// problem used for the water-filling comparison.
#[derive(Clone)]
pub struct TransformedProblem<'r> {
    pub(crate) instance: ScenarioInstance,
    pub(crate) rate: &'r dyn RateFunction,
    pub(crate) cost: Vec<f64>,
    pub(crate) constant: f64,
    pub(crate) energy_budget: Vec<f64>,
    pub(crate) data_budget: Option<Vec<f64>>,
}

impl std::fmt::Debug for TransformedProblem<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformedProblem")
            .field("cost", &self.cost)
            .field("constant", &self.constant)
            .field("energy_budget", &self.energy_budget)
            .field("data_budget", &self.data_budget)
            .finish_non_exhaustive()
    }
}

pub fn build_transformed_problem<'r>(
    instance: &ScenarioInstance,
    rate: &'r dyn RateFunction,
) -> TransformedProblem<'r> {
    let mut problem = build_weighted_throughput_problem(instance, rate);
    problem.data_budget = Some(instance.data_budget());
    problem
}

/// Same objective and battery rows, no queue rows.
pub fn build_weighted_throughput_problem<'r>(
    instance: &ScenarioInstance,
    rate: &'r dyn RateFunction,
) -> TransformedProblem<'r> {
    let t_len = instance.horizon() as f64;
    let cost = (1..=instance.horizon())
        .map(|t| -instance.weight(t) / t_len)
        .collect();
    let mut acc = CompensatedSum::default();
    for (t, &d) in instance.data_arrivals().iter().enumerate() {
        acc.add(instance.weight(t + 1) * d);
    }
    TransformedProblem {
        instance: instance.clone(),
        rate,
        cost,
        constant: instance.initial_queue() + acc.value() / t_len,
        energy_budget: instance.energy_budget(),
        data_budget: None,
    }
}

impl TransformedProblem<'_> {
    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn instance(&self) -> &ScenarioInstance {
        &self.instance
    }

    pub fn rate(&self) -> &dyn RateFunction {
        self.rate
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn energy_budget(&self) -> &[f64] {
        &self.energy_budget
    }

    pub fn data_budget(&self) -> Option<&[f64]> {
        self.data_budget.as_deref()
    }

    pub fn has_queue_constraints(&self) -> bool {
        self.data_budget.is_some()
    }

    /// Inequality rows (battery plus queue) excluding the `q >= 0` bounds.
    pub fn num_inequalities(&self) -> usize {
        self.num_vars() * if self.has_queue_constraints() { 2 } else { 1 }
    }

    pub fn objective(&self, q: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new(self.constant);
        for (c, x) in self.cost.iter().zip(q) {
            acc.add(c * x);
        }
        acc.value()
    }

    #[inline]
    pub(crate) fn power(&self, t: usize, q: f64) -> f64 {
        self.rate.inverse(q, self.instance.gains()[t])
    }

    /// Cumulative battery slacks `E0 + sum H - sum r^{-1}(q)` per slot.
    pub fn battery_slacks(&self, q: &[f64]) -> Vec<f64> {
        let mut used = CompensatedSum::default();
        self.energy_budget
            .iter()
            .enumerate()
            .map(|(t, &b)| {
                used.add(self.power(t, q[t]));
                b - used.value()
            })
            .collect()
    }

    /// Cumulative queue slacks `Q0 + sum D - sum q`, or `None` without queue rows.
    pub fn queue_slacks(&self, q: &[f64]) -> Option<Vec<f64>> {
        self.data_budget.as_ref().map(|budget| {
            let mut sent = CompensatedSum::default();
            budget
                .iter()
                .zip(q)
                .map(|(&c, &x)| {
                    sent.add(x);
                    c - sent.value()
                })
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LogRate;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_slot_substitution() {
        let s = ScenarioInstance::new(1.0, 1.0, vec![0.0], vec![0.0], vec![1.0]).unwrap();
        let p = build_transformed_problem(&s, &LogRate);
        assert_eq!(p.num_inequalities(), 2);
        assert_eq!(p.cost(), &[-1.0]);
        // e^q - 1 <= 1 and q <= 1
        let q = [2f64.ln()];
        assert_abs_diff_eq!(p.battery_slacks(&q)[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            p.queue_slacks(&q).unwrap()[0],
            1.0 - 2f64.ln(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn two_slot_substitution() {
        let s = ScenarioInstance::new(2.0, 5.0, vec![0.0; 2], vec![0.0; 2], vec![1.0; 2]).unwrap();
        let p = build_transformed_problem(&s, &LogRate);
        assert_eq!(p.energy_budget(), &[2.0, 2.0]);
        assert_eq!(p.data_budget().unwrap(), &[5.0, 5.0]);
        assert_eq!(p.num_inequalities(), 4);
        let q = [1.0, 0.5];
        let b = p.battery_slacks(&q);
        assert_abs_diff_eq!(b[0], 2.0 - (1f64.exp() - 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(
            b[1],
            2.0 - (1f64.exp() - 1.0) - (0.5f64.exp() - 1.0),
            epsilon = 1e-15
        );
        assert_eq!(p.queue_slacks(&q).unwrap(), vec![4.0, 3.5]);
    }

    #[test]
    fn objective_constant_uses_weights() {
        let s = ScenarioInstance::new(0.0, 0.0, vec![0.0; 3], vec![1.0; 3], vec![1.0; 3]).unwrap();
        let p = build_transformed_problem(&s, &LogRate);
        assert_abs_diff_eq!(p.constant(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.objective(&[0.0; 3]), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn throughput_variant_has_no_queue_rows() {
        let s = ScenarioInstance::new(2.0, 5.0, vec![0.0; 2], vec![0.0; 2], vec![1.0; 2]).unwrap();
        let p = build_weighted_throughput_problem(&s, &LogRate);
        assert!(!p.has_queue_constraints());
        assert!(p.queue_slacks(&[0.0, 0.0]).is_none());
        assert_eq!(p.num_inequalities(), 2);
    }
}
