//! Log-barrier interior-point method with damped Newton steps.
//!
//! Each iteration takes a Newton step on the barrier-perturbed KKT system
//! (complementarity `lambda_i * s_i = mu`) and then lowers `mu` to the
//! surrogate duality gap divided by `m * barrier_factor`. The multipliers are
//! carried as iterates of their own. Deriving them as `mu / s` from the
//! primal slack caps stationarity at about `ulp(q) * lambda^2 / mu`, which
//! sits above 1e-8 once `mu` reaches that scale. The battery rows also
//! carry explicit slacks with an equality residual, so every sign constraint
//! is linear in the step and the fraction-to-boundary rule is exact. Without
//! them the convex rows stop long steps near a tight battery and the method
//! crawls when some gain is small.
//!
//! Slots whose cumulative budget is exactly zero are fixed at `q = 0`
//! before iterating, which leaves a reduced problem with a strictly
//! interior start. The cumulative rows make the reduced Newton matrix a sum
//! of nested rank-one blocks, assembled here through suffix sums.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kkt::{kkt_residuals, Duals, ResidualReport};
use super::problem::TransformedProblem;
use crate::error::{Error, Result};
use crate::model::{PowerPolicy, RatePolicy};

const SUFFICIENT_DECREASE: f64 = 0.01;
const FRACTION_TO_BOUNDARY: f64 = 0.99;
const MAX_BACKTRACKS: usize = 80;
const SHORT_STEP: f64 = 0.1;
/// The primal barrier phase hands over to primal-dual steps below this `mu`.
const PRIMAL_PHASE_END: f64 = 1e-6;
const MAX_CENTERING: usize = 50;
const CENTERING_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Max-norm bound on every KKT residual block.
    pub tolerance: f64,
    /// Budget of Newton steps.
    pub max_iterations: usize,
    /// Target barrier parameter is the surrogate gap over `m * barrier_factor`.
    pub barrier_factor: f64,
    pub initial_barrier: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 200,
            barrier_factor: 10.0,
            initial_barrier: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Input(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        if !(self.barrier_factor > 1.0) {
            return Err(Error::Input(format!(
                "barrier factor {} must exceed 1",
                self.barrier_factor
            )));
        }
        if !(self.initial_barrier > 0.0) {
            return Err(Error::Input(
                "initial barrier parameter must be positive".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::Input("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of a successful solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutcome {
    pub rates: RatePolicy,
    pub powers: PowerPolicy,
    /// Average queue length at the returned point.
    pub objective: f64,
    pub duals: Duals,
    pub residuals: ResidualReport,
    pub newton_iterations: usize,
    /// Barrier parameter of the last Newton step.
    pub barrier_parameter: f64,
    /// Leading slots fixed at zero by presolve.
    pub fixed_slots: usize,
}

struct Iterate {
    /// Full-length rates; the first `fixed` entries stay zero.
    q: Vec<f64>,
    /// Explicit battery slacks, one per free row.
    slack: Vec<f64>,
    battery: Vec<f64>,
    queue: Vec<f64>,
    bounds: Vec<f64>,
}

struct Slacks {
    battery: Vec<f64>,
    queue: Vec<f64>,
    /// `sum_{i<=k} phi(q_i) + s_k - B_k`, zero when the explicit slack matches q.
    primal: Vec<f64>,
}

impl Slacks {
    fn interior(&self, q: &[f64]) -> bool {
        self.battery
            .iter()
            .chain(&self.queue)
            .chain(q)
            .all(|&s| s > 0.0 && s.is_finite())
            && self.primal.iter().all(|r| r.is_finite())
    }
}

struct Direction {
    q: Vec<f64>,
    slack: Vec<f64>,
    battery: Vec<f64>,
    queue: Vec<f64>,
    bounds: Vec<f64>,
}

struct PrimalDual<'p, 'r> {
    problem: &'p TransformedProblem<'r>,
    fixed: usize,
    has_queue: bool,
}

impl PrimalDual<'_, '_> {
    fn n(&self) -> usize {
        self.problem.num_vars()
    }

    fn free(&self) -> usize {
        self.n() - self.fixed
    }

    fn rows(&self) -> usize {
        self.free() * if self.has_queue { 3 } else { 2 }
    }

    /// Slacks of the rows that involve at least one free variable.
    fn slacks(&self, it: &Iterate) -> Slacks {
        let k = self.fixed;
        let implied = self.problem.battery_slacks(&it.q).split_off(k);
        let primal = it.slack.iter().zip(&implied).map(|(s, b)| s - b).collect();
        let queue = self
            .problem
            .queue_slacks(&it.q)
            .map(|mut v| v.split_off(k))
            .unwrap_or_default();
        Slacks {
            battery: it.slack.clone(),
            queue,
            primal,
        }
    }

    fn derivatives(&self, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let rate = self.problem.rate();
        let gains = self.problem.instance().gains();
        (self.fixed..self.n())
            .map(|t| {
                (
                    rate.inverse_derivative(q[t], gains[t]),
                    rate.inverse_second_derivative(q[t], gains[t]),
                )
            })
            .unzip()
    }

    /// Stationarity and perturbed complementarity residuals.
    fn residual(&self, it: &Iterate, sl: &Slacks, d1: &[f64], mu: f64) -> (Vec<f64>, f64) {
        let m = self.free();
        let k0 = self.fixed;
        let mut dual = vec![0.0; m];
        let mut lambda_tail = 0.0;
        let mut y_tail = 0.0;
        for i in (0..m).rev() {
            lambda_tail += it.battery[i];
            if self.has_queue {
                y_tail += it.queue[i];
            }
            dual[i] = self.problem.cost()[k0 + i] + d1[i] * lambda_tail + y_tail - it.bounds[i];
        }
        let mut norm2: f64 = dual.iter().chain(&sl.primal).map(|r| r * r).sum();
        for (l, s) in it
            .battery
            .iter()
            .zip(&sl.battery)
            .chain(it.queue.iter().zip(&sl.queue))
            .chain(it.bounds.iter().zip(&it.q[k0..]))
        {
            let r = l * s - mu;
            norm2 += r * r;
        }
        (dual, norm2.sqrt())
    }

    fn gap(&self, it: &Iterate, sl: &Slacks) -> f64 {
        it.battery
            .iter()
            .zip(&sl.battery)
            .chain(it.queue.iter().zip(&sl.queue))
            .chain(it.bounds.iter().zip(&it.q[self.fixed..]))
            .map(|(l, s)| l * s)
            .sum()
    }

    fn direction(
        &self,
        it: &Iterate,
        sl: &Slacks,
        d1: &[f64],
        d2: &[f64],
        dual_res: &[f64],
        mu: f64,
    ) -> Option<Direction> {
        let m = self.free();
        let k0 = self.fixed;
        let x = &it.q[k0..];

        // suffix sums over rows k >= i
        let mut lam = vec![0.0; m + 1];
        let mut lam_w = vec![0.0; m + 1];
        let mut lam_c = vec![0.0; m + 1];
        let mut lam_r = vec![0.0; m + 1];
        let mut y_w = vec![0.0; m + 1];
        let mut y_c = vec![0.0; m + 1];
        for i in (0..m).rev() {
            let (l, s) = (it.battery[i], sl.battery[i]);
            lam[i] = lam[i + 1] + l;
            lam_w[i] = lam_w[i + 1] + l / s;
            lam_c[i] = lam_c[i + 1] + (l - mu / s);
            lam_r[i] = lam_r[i + 1] + l * sl.primal[i] / s;
            if self.has_queue {
                let (y, u) = (it.queue[i], sl.queue[i]);
                y_w[i] = y_w[i + 1] + y / u;
                y_c[i] = y_c[i + 1] + (y - mu / u);
            }
        }

        let mut mat = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for i in 0..m {
            for j in 0..=i {
                // rows covering both i and j start at max(i, j) = i
                let h = d1[i] * d1[j] * lam_w[i] + y_w[i];
                mat[(i, j)] = h;
                mat[(j, i)] = h;
            }
            mat[(i, i)] += d2[i] * lam[i] + it.bounds[i] / x[i];
            rhs[i] =
                -dual_res[i] + d1[i] * (lam_c[i] - lam_r[i]) + y_c[i] - (it.bounds[i] - mu / x[i]);
        }

        let dq = match mat.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                let scale = mat.diagonal().amax().max(1.0);
                (mat + DMatrix::identity(m, m) * (1e-12 * scale))
                    .cholesky()?
                    .solve(&rhs)
            }
        };

        let mut d_slack = vec![0.0; m];
        let mut d_battery = vec![0.0; m];
        let mut d_queue = vec![0.0; if self.has_queue { m } else { 0 }];
        let mut d_bounds = vec![0.0; m];
        let mut along_battery = 0.0;
        let mut along_queue = 0.0;
        for i in 0..m {
            along_battery += d1[i] * dq[i];
            along_queue += dq[i];
            let (l, s) = (it.battery[i], sl.battery[i]);
            d_slack[i] = -sl.primal[i] - along_battery;
            d_battery[i] = -l + mu / s + l * (along_battery + sl.primal[i]) / s;
            if self.has_queue {
                let (y, u) = (it.queue[i], sl.queue[i]);
                d_queue[i] = -y + mu / u + y * along_queue / u;
            }
            let z = it.bounds[i];
            d_bounds[i] = -z + mu / x[i] - z * dq[i] / x[i];
        }
        Some(Direction {
            q: dq.iter().copied().collect(),
            slack: d_slack,
            battery: d_battery,
            queue: d_queue,
            bounds: d_bounds,
        })
    }

    /// Multipliers over all rows, with the presolved rows absorbing the
    /// stationarity of the fixed slots.
    fn full_duals(&self, it: &Iterate) -> Duals {
        let n = self.n();
        let k0 = self.fixed;
        let mut battery = vec![0.0; n];
        let mut queue = if self.has_queue {
            vec![0.0; n]
        } else {
            Vec::new()
        };
        let mut bounds = vec![0.0; n];
        battery[k0..].copy_from_slice(&it.battery);
        if self.has_queue {
            queue[k0..].copy_from_slice(&it.queue);
        }
        bounds[k0..].copy_from_slice(&it.bounds);

        if k0 > 0 {
            let lambda_tail: f64 = it.battery.iter().sum();
            let y_tail: f64 = it.queue.iter().sum();
            let rate = self.problem.rate();
            let gains = self.problem.instance().gains();
            let base: Vec<(f64, f64)> = (0..k0)
                .map(|t| {
                    let d = rate.inverse_derivative(0.0, gains[t]);
                    (self.problem.cost()[t] + d * lambda_tail + y_tail, d)
                })
                .collect();
            let row = k0 - 1;
            if self.problem.energy_budget()[row] <= 0.0 {
                let extra = base.iter().map(|&(b, d)| -b / d).fold(0.0f64, f64::max);
                battery[row] = extra;
                for (t, &(b, d)) in base.iter().enumerate() {
                    bounds[t] = (b + d * extra).max(0.0);
                }
            } else {
                let extra = base.iter().map(|&(b, _)| -b).fold(0.0f64, f64::max);
                queue[row] = extra;
                for (t, &(b, _)) in base.iter().enumerate() {
                    bounds[t] = (b + extra).max(0.0);
                }
            }
        }
        Duals {
            battery,
            queue,
            bounds,
        }
    }

    fn start(&self, mu: f64) -> Iterate {
        let n = self.n();
        let mut eps = 1.0;
        loop {
            let mut q = vec![0.0; n];
            for x in &mut q[self.fixed..] {
                *x = eps;
            }
            let slack = self.problem.battery_slacks(&q).split_off(self.fixed);
            let it = Iterate {
                q,
                slack,
                battery: vec![],
                queue: vec![],
                bounds: vec![],
            };
            let sl = self.slacks(&it);
            if sl.interior(&it.q[self.fixed..]) || eps < 1e-300 {
                return Iterate {
                    battery: sl.battery.iter().map(|s| mu / s).collect(),
                    queue: sl.queue.iter().map(|u| mu / u).collect(),
                    bounds: it.q[self.fixed..].iter().map(|x| mu / x).collect(),
                    ..it
                };
            }
            eps *= 0.5;
        }
    }

    /// Iterate at `q` with slacks implied by `q` and multipliers `mu / slack`.
    fn centred(&self, q: Vec<f64>, mu: f64) -> Iterate {
        let slack = self.problem.battery_slacks(&q).split_off(self.fixed);
        let queue = self
            .problem
            .queue_slacks(&q)
            .map(|mut v| v.split_off(self.fixed))
            .unwrap_or_default();
        Iterate {
            battery: slack.iter().map(|s| mu / s).collect(),
            queue: queue.iter().map(|u| mu / u).collect(),
            bounds: q[self.fixed..].iter().map(|x| mu / x).collect(),
            slack,
            q,
        }
    }

    /// `c . q - mu * (sum of log slacks)`, or `None` outside the interior.
    fn barrier_value(&self, q: &[f64], mu: f64) -> Option<f64> {
        let k0 = self.fixed;
        let battery = self.problem.battery_slacks(q);
        let queue = self.problem.queue_slacks(q).unwrap_or_default();
        let mut logs = 0.0;
        for &s in battery[k0..]
            .iter()
            .chain(queue.get(k0..).unwrap_or(&[]))
            .chain(&q[k0..])
        {
            if !(s > 0.0 && s.is_finite()) {
                return None;
            }
            logs += s.ln();
        }
        let linear: f64 = self.problem.cost()[k0..]
            .iter()
            .zip(&q[k0..])
            .map(|(c, x)| c * x)
            .sum();
        Some(linear - mu * logs)
    }

    /// Primal barrier method: Newton on the barrier function with an Armijo
    /// line search, lowering `mu` by `factor` after each centring. Spends at
    /// most `budget` Newton steps and reports how many it used.
    fn primal_phase(
        &self,
        q: Vec<f64>,
        mut mu: f64,
        factor: f64,
        budget: usize,
    ) -> (Vec<f64>, f64, usize) {
        let mut q = q;
        let mut used = 0;
        while mu > PRIMAL_PHASE_END && used < budget {
            for _ in 0..MAX_CENTERING {
                if used == budget {
                    break;
                }
                let it = self.centred(q.clone(), mu);
                let sl = self.slacks(&it);
                let (d1, d2) = self.derivatives(&it.q);
                let (grad, _) = self.residual(&it, &sl, &d1, mu);
                let Some(dir) = self.direction(&it, &sl, &d1, &d2, &grad, mu) else {
                    return (q, mu, used);
                };
                used += 1;
                let slope: f64 = grad.iter().zip(&dir.q).map(|(g, d)| g * d).sum();
                if -slope / 2.0 <= CENTERING_TOL {
                    break;
                }
                let Some(current) = self.barrier_value(&q, mu) else {
                    return (q, mu, used);
                };
                let mut alpha = 1.0;
                let mut moved = false;
                for _ in 0..MAX_BACKTRACKS {
                    let mut trial = q.clone();
                    for (x, d) in trial[self.fixed..].iter_mut().zip(&dir.q) {
                        *x += alpha * d;
                    }
                    if let Some(v) = self.barrier_value(&trial, mu) {
                        if v <= current + SUFFICIENT_DECREASE * alpha * slope {
                            q = trial;
                            moved = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            mu /= factor;
        }
        (q, mu, used)
    }

    fn step(&self, it: &Iterate, dir: &Direction, alpha: f64) -> Iterate {
        let k0 = self.fixed;
        let mut q = it.q.clone();
        for (x, d) in q[k0..].iter_mut().zip(&dir.q) {
            *x += alpha * d;
        }
        let axpy = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, d)| x + alpha * d).collect();
        Iterate {
            q,
            slack: axpy(&it.slack, &dir.slack),
            battery: axpy(&it.battery, &dir.battery),
            queue: axpy(&it.queue, &dir.queue),
            bounds: axpy(&it.bounds, &dir.bounds),
        }
    }
}

fn presolve(problem: &TransformedProblem<'_>) -> usize {
    let lead = |v: &[f64]| v.iter().take_while(|&&x| x <= 0.0).count();
    let battery = lead(problem.energy_budget());
    let queue = problem.data_budget().map(lead).unwrap_or(0);
    battery.max(queue)
}

fn outcome(
    problem: &TransformedProblem<'_>,
    q: Vec<f64>,
    duals: Duals,
    residuals: ResidualReport,
    newton_iterations: usize,
    barrier_parameter: f64,
    fixed_slots: usize,
) -> SolveOutcome {
    let gains = problem.instance().gains();
    let powers = q
        .iter()
        .zip(gains)
        .map(|(&x, &g)| problem.rate().inverse(x, g).max(0.0))
        .collect();
    SolveOutcome {
        objective: problem.objective(&q),
        rates: RatePolicy::new_unchecked(q),
        powers: PowerPolicy::new_unchecked(powers),
        duals,
        residuals,
        newton_iterations,
        barrier_parameter,
        fixed_slots,
    }
}

/// Solves a transformed problem to the requested KKT tolerance.
pub fn solve_transformed(
    problem: &TransformedProblem<'_>,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    opts.validate()?;
    let fixed = presolve(problem);
    let pd = PrimalDual {
        problem,
        fixed,
        has_queue: problem.has_queue_constraints(),
    };
    let n = problem.num_vars();

    let certify = |it: &Iterate, newton: usize, mu: f64| -> Result<SolveOutcome> {
        let duals = pd.full_duals(it);
        let residuals = kkt_residuals(problem, &RatePolicy::new_unchecked(it.q.clone()), &duals)?;
        Ok(outcome(
            problem,
            it.q.clone(),
            duals,
            residuals,
            newton,
            mu,
            fixed,
        ))
    };

    if fixed == n {
        let it = Iterate {
            q: vec![0.0; n],
            slack: vec![],
            battery: vec![],
            queue: vec![],
            bounds: vec![],
        };
        return certify(&it, 0, 0.0);
    }

    let rows = pd.rows() as f64;
    let start = pd.start(opts.initial_barrier);
    let (q, mut mu, warmup) = pd.primal_phase(
        start.q,
        opts.initial_barrier,
        opts.barrier_factor,
        opts.max_iterations,
    );
    let mut it = pd.centred(q, mu);
    let mut best: Option<SolveOutcome> = None;
    let mut last_alpha = 1.0;

    for newton in warmup..=opts.max_iterations {
        let current = certify(&it, newton, mu)?;
        let done = current.residuals.within(opts.tolerance);
        if done
            || best
                .as_ref()
                .is_none_or(|b| current.residuals.max() < b.residuals.max())
        {
            best = Some(current);
        }
        if done {
            break;
        }
        if newton == opts.max_iterations {
            let best = best.expect("at least one iterate certified");
            return Err(Error::NotConverged {
                iterations: newton,
                residuals: best.residuals,
                best: Box::new(best),
            });
        }

        let sl = pd.slacks(&it);
        // after a short step, aim at the current gap to recentre first
        let factor = if last_alpha < SHORT_STEP {
            1.0
        } else {
            opts.barrier_factor
        };
        mu = pd.gap(&it, &sl) / (rows * factor);
        let (d1, d2) = pd.derivatives(&it.q);
        let (dual_res, norm) = pd.residual(&it, &sl, &d1, mu);
        let Some(dir) = pd.direction(&it, &sl, &d1, &d2, &dual_res, mu) else {
            break;
        };

        // largest step keeping every multiplier positive
        let mut alpha: f64 = 1.0;
        for (l, d) in it
            .battery
            .iter()
            .zip(&dir.battery)
            .chain(it.queue.iter().zip(&dir.queue))
            .chain(it.bounds.iter().zip(&dir.bounds))
        {
            if *d < 0.0 {
                alpha = alpha.min(-l / d);
            }
        }
        // with explicit battery slacks every sign constraint is linear in the step
        for (s, d) in it.slack.iter().zip(&dir.slack) {
            if *d < 0.0 {
                alpha = alpha.min(-s / d);
            }
        }
        let mut along = 0.0;
        for (i, (x, d)) in it.q[fixed..].iter().zip(&dir.q).enumerate() {
            if *d < 0.0 {
                alpha = alpha.min(-x / d);
            }
            along += d;
            if pd.has_queue && along > 0.0 {
                alpha = alpha.min(sl.queue[i] / along);
            }
        }
        alpha = (FRACTION_TO_BOUNDARY * alpha).min(1.0);

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = pd.step(&it, &dir, alpha);
            let tsl = pd.slacks(&trial);
            if tsl.interior(&trial.q[fixed..]) {
                let (td1, _) = pd.derivatives(&trial.q);
                let (_, tnorm) = pd.residual(&trial, &tsl, &td1, mu);
                if tnorm <= (1.0 - SUFFICIENT_DECREASE * alpha) * norm {
                    accepted = Some(trial);
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some(next) => {
                it = next;
                last_alpha = alpha;
            }
            None => break,
        }
        log::trace!("newton {newton}: mu = {mu:.2e}, alpha = {alpha:.2e}, residual = {norm:.2e}");
    }

    let best = best.expect("at least one iterate certified");
    if best.residuals.within(opts.tolerance) {
        Ok(best)
    } else {
        Err(Error::NotConverged {
            iterations: best.newton_iterations,
            residuals: best.residuals,
            best: Box::new(best),
        })
    }
}
