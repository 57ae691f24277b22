use serde::Serialize;

use super::problem::TransformedProblem;
use crate::error::{Error, Result};
use crate::model::RatePolicy;

/// Lagrange multipliers for the three constraint families.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Duals {
    pub battery: Vec<f64>,
    /// Empty when the problem has no queue rows.
    pub queue: Vec<f64>,
    pub bounds: Vec<f64>,
}

impl Duals {
    pub fn zeros(problem: &TransformedProblem<'_>) -> Self {
        let n = problem.num_vars();
        Self {
            battery: vec![0.0; n],
            queue: if problem.has_queue_constraints() {
                vec![0.0; n]
            } else {
                Vec::new()
            },
            bounds: vec![0.0; n],
        }
    }
}

/// Max-norm residuals of the four KKT blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.stationarity <= tol
            && self.primal <= tol
            && self.dual <= tol
            && self.complementarity <= tol
    }
}

impl std::fmt::Display for ResidualReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "stationarity {:.3e}, primal {:.3e}, dual {:.3e}, complementarity {:.3e}",
            self.stationarity, self.primal, self.dual, self.complementarity
        )
    }
}

fn suffix_sums(values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len() + 1];
    for i in (0..values.len()).rev() {
        out[i] = out[i + 1] + values[i];
    }
    out
}

/// KKT residuals of `q` with multipliers `duals` on the transformed problem.
///
/// The Lagrangian gradient is `c_t + (r^{-1})'(q_t) * sum_{k>=t} lambda_k
/// + sum_{k>=t} y_k - z_t`.
pub fn kkt_residuals(
    problem: &TransformedProblem<'_>,
    q: &RatePolicy,
    duals: &Duals,
) -> Result<ResidualReport> {
    let n = problem.num_vars();
    let queue_len = if problem.has_queue_constraints() {
        n
    } else {
        0
    };
    if q.len() != n
        || duals.battery.len() != n
        || duals.bounds.len() != n
        || duals.queue.len() != queue_len
    {
        return Err(Error::Input(
            "dimension mismatch between problem, point and duals".into(),
        ));
    }
    let q = q.as_slice();
    let gains = problem.instance().gains();
    let lambda_tail = suffix_sums(&duals.battery);
    let y_tail = suffix_sums(&duals.queue);

    let mut stationarity = 0.0f64;
    for t in 0..n {
        let dphi = problem.rate().inverse_derivative(q[t], gains[t]);
        let y = if queue_len > 0 { y_tail[t] } else { 0.0 };
        let g = problem.cost()[t] + dphi * lambda_tail[t] + y - duals.bounds[t];
        stationarity = stationarity.max(g.abs());
    }

    let battery = problem.battery_slacks(q);
    let queue = problem.queue_slacks(q).unwrap_or_default();

    let mut primal = 0.0f64;
    for &s in battery.iter().chain(&queue) {
        primal = primal.max(-s);
    }
    for &x in q {
        primal = primal.max(-x);
    }

    let mut dual = 0.0f64;
    for &m in duals
        .battery
        .iter()
        .chain(&duals.queue)
        .chain(&duals.bounds)
    {
        dual = dual.max(-m);
    }

    let mut complementarity = 0.0f64;
    for (m, s) in duals
        .battery
        .iter()
        .zip(&battery)
        .chain(duals.queue.iter().zip(&queue))
        .chain(duals.bounds.iter().zip(q))
    {
        complementarity = complementarity.max((m * s).abs());
    }

    Ok(ResidualReport {
        stationarity,
        primal,
        dual,
        complementarity,
    })
}
