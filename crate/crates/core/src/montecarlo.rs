//! Random scenarios, the inversion-number statistic, and the two experiment
//! pipelines (inversion numbers under constant gains, delay comparison under
//! Nakagami-2 fading).
//!
//! Every run draws from its own ChaCha12 stream keyed by the base seed, with
//! stream id `cell << 32 | run`. Runs execute on the current rayon pool and
//! are reduced in index order, so results do not depend on the thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{average_queue_length, simulate_trajectory, LogRate, ScenarioInstance};
use crate::solver::{solve_delay_minimization, SolveOutcome, SolverOptions};
use crate::waterfill::{throughput_baseline, unweighted_dwf};

/// Absolute tolerance below which two powers count as tied.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// Slack allowed when checking that the delay-optimal policy beats the baseline.
pub const DOMINANCE_TOL: f64 = 1e-6;

pub const RNG_ALGORITHM: &str =
    "chacha12/rand_chacha-0.9; key=seed_from_u64(seed), stream=(cell<<32)|run";

/// Number of pairs `t1 < t2` with `p[t1] > p[t2] + tie_tol`.
pub fn inversion_number(p: &[f64], tie_tol: f64) -> usize {
    let mut count = 0;
    for (i, &a) in p.iter().enumerate() {
        count += p[i + 1..].iter().filter(|&&b| a > b + tie_tol).count();
    }
    count
}

/// Number of pairs `t1 < t2` with `|p[t1] - p[t2]| <= tie_tol`.
pub fn tied_pairs(p: &[f64], tie_tol: f64) -> usize {
    let mut count = 0;
    for (i, &a) in p.iter().enumerate() {
        count += p[i + 1..]
            .iter()
            .filter(|&&b| (a - b).abs() <= tie_tol)
            .count();
    }
    count
}

/// I.i.d. draws from `Uniform[0, 2 * mean]`; all zeros when `mean == 0`.
pub fn sample_uniform_trace<R: Rng + ?Sized>(mean: f64, len: usize, rng: &mut R) -> Vec<f64> {
    if mean == 0.0 {
        return vec![0.0; len];
    }
    let dist = Uniform::new_inclusive(0.0, 2.0 * mean).expect("mean is finite and positive");
    (0..len).map(|_| dist.sample(rng)).collect()
}

/// Unit-mean Nakagami-2 power gains, i.e. `Gamma(shape 2, scale 1/2)`.
pub fn sample_nakagami2_gains<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let dist = Gamma::<f64>::new(2.0, 0.5).expect("valid gamma parameters");
    // a zero draw has probability zero but would be rejected downstream
    (0..len)
        .map(|_| dist.sample(rng).max(f64::MIN_POSITIVE))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModel {
    /// `g_t = 1` in every slot.
    Constant,
    Nakagami2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    /// Delay-minimizing policy from the barrier solver.
    #[serde(rename = "DM")]
    DelayMinimizing,
    /// Unweighted directional water-filling.
    #[serde(rename = "TM")]
    ThroughputMaximizing,
}

impl Policy {
    pub fn label(&self) -> &'static str {
        match self {
            Policy::DelayMinimizing => "DM",
            Policy::ThroughputMaximizing => "TM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Inversion,
    Delay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "E0")]
    pub initial_energy: f64,
    #[serde(rename = "Q0")]
    pub initial_queue: f64,
    #[serde(rename = "E_H")]
    pub mean_energy: Vec<f64>,
    #[serde(rename = "E_D")]
    pub mean_data: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    pub channel: ChannelModel,
    pub policies: Vec<Policy>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "default_tie_tol")]
    pub tie_tol: f64,
}

fn default_tie_tol() -> f64 {
    DEFAULT_TIE_TOL
}

fn default_grid() -> (Vec<f64>, Vec<f64>) {
    (
        (0..=10).map(|k| k as f64 * 0.5).collect(),
        vec![0.0, 1.0, 2.0],
    )
}

impl ExperimentConfig {
    /// T = 10, E0 = Q0 = 1, E[H] in {0, 0.5, ..., 5}, E[D] in {0, 1, 2},
    /// 10,000 runs, constant gains, delay-optimal policy only.
    pub fn inversion_defaults() -> Self {
        let (mean_energy, mean_data) = default_grid();
        Self {
            horizon: 10,
            initial_energy: 1.0,
            initial_queue: 1.0,
            mean_energy,
            mean_data,
            runs: 10_000,
            seed: 2012,
            channel: ChannelModel::Constant,
            policies: vec![Policy::DelayMinimizing],
            solver: SolverOptions::default(),
            tie_tol: DEFAULT_TIE_TOL,
        }
    }

    /// Same grid under Nakagami-2 fading, comparing both policies.
    pub fn delay_defaults() -> Self {
        Self {
            channel: ChannelModel::Nakagami2,
            policies: vec![Policy::DelayMinimizing, Policy::ThroughputMaximizing],
            ..Self::inversion_defaults()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.runs > u32::MAX as usize {
            return Err(Error::Config(format!("runs must not exceed {}", u32::MAX)));
        }
        for (name, v) in [("E0", self.initial_energy), ("Q0", self.initial_queue)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} = {v} must be finite and nonnegative"
                )));
            }
        }
        for (name, grid) in [("E_H", &self.mean_energy), ("E_D", &self.mean_data)] {
            if grid.is_empty() {
                return Err(Error::Config(format!("{name} grid is empty")));
            }
            if let Some(v) = grid.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::Config(format!(
                    "{name} mean {v} must be finite and nonnegative"
                )));
            }
        }
        if self.policies.is_empty() {
            return Err(Error::Config("no policies to evaluate".into()));
        }
        if !(self.tie_tol >= 0.0) {
            return Err(Error::Config(format!(
                "tie_tol = {} must be nonnegative",
                self.tie_tol
            )));
        }
        self.solver
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    fn cells(&self) -> Vec<(f64, f64)> {
        let mut cells = Vec::with_capacity(self.mean_energy.len() * self.mean_data.len());
        for &d in &self.mean_data {
            for &h in &self.mean_energy {
                cells.push((h, d));
            }
        }
        cells
    }

    /// Random scenario for run `run` of cell `cell`.
    pub fn draw_scenario(&self, cell: usize, run: usize) -> Result<ScenarioInstance> {
        let (mean_h, mean_d) = *self
            .cells()
            .get(cell)
            .ok_or_else(|| Error::Config(format!("cell index {cell} out of range")))?;
        let mut rng = run_rng(self.seed, cell, run);
        let h = sample_uniform_trace(mean_h, self.horizon, &mut rng);
        let d = sample_uniform_trace(mean_d, self.horizon, &mut rng);
        let g = match self.channel {
            ChannelModel::Constant => vec![1.0; self.horizon],
            ChannelModel::Nakagami2 => sample_nakagami2_gains(self.horizon, &mut rng),
        };
        ScenarioInstance::new(self.initial_energy, self.initial_queue, h, d, g)
    }
}

/// Generator for one run: same key for every run, distinct stream per `(cell, run)`.
pub fn run_rng(seed: u64, cell: usize, run: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(((cell as u64) << 32) | run as u64);
    rng
}

/// Aggregate of one metric for one policy in one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub mean_energy: f64,
    pub mean_data: f64,
    pub policy: Policy,
    pub average: f64,
    /// Sample standard deviation over `sqrt(runs)`.
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
    pub runs: usize,
    /// Runs whose solve did not certify; their best iterate is still averaged.
    pub failed_runs: usize,
    pub flagged: bool,
}

/// Per-cell comparison of the two policies in the delay experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceSummary {
    pub mean_energy: f64,
    pub mean_data: f64,
    /// Runs with `L_DM > L_TM + DOMINANCE_TOL`.
    pub violations: usize,
    /// Largest `L_DM - L_TM` seen.
    pub worst_excess: f64,
    /// Average of `L_TM - L_DM`.
    pub mean_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub rng_algorithm: String,
    pub metric: String,
    pub cells: Vec<CellResult>,
    pub dominance: Vec<DominanceSummary>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    #[serde(rename = "E_H")]
    mean_energy: f64,
    #[serde(rename = "E_D")]
    mean_data: f64,
    policy: &'a str,
    avg_metric: f64,
    stderr: f64,
    #[serde(rename = "R")]
    runs: usize,
    seed: u64,
}

impl ExperimentResult {
    pub fn any_flagged(&self) -> bool {
        self.cells.iter().any(|c| c.flagged) || self.dominance.iter().any(|d| d.violations > 0)
    }

    pub fn cell(&self, mean_energy: f64, mean_data: f64, policy: Policy) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.mean_energy == mean_energy && c.mean_data == mean_data && c.policy == policy
        })
    }

    /// One row per cell and policy: `E_H,E_D,policy,avg_metric,stderr,R,seed`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.cells {
            w.serialize(CsvRow {
                mean_energy: c.mean_energy,
                mean_data: c.mean_data,
                policy: c.policy.label(),
                avg_metric: c.average,
                stderr: c.stderr,
                runs: c.runs,
                seed: self.seed,
            })?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Sample {
    value: f64,
    failed: bool,
}

fn aggregate(mean_energy: f64, mean_data: f64, policy: Policy, samples: &[Sample]) -> CellResult {
    let n = samples.len();
    let average = samples.iter().map(|s| s.value).sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let ss: f64 = samples.iter().map(|s| (s.value - average).powi(2)).sum();
        (ss / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    let failed_runs = samples.iter().filter(|s| s.failed).count();
    CellResult {
        mean_energy,
        mean_data,
        policy,
        average,
        stderr,
        min: samples
            .iter()
            .map(|s| s.value)
            .fold(f64::INFINITY, f64::min),
        max: samples
            .iter()
            .map(|s| s.value)
            .fold(f64::NEG_INFINITY, f64::max),
        runs: n,
        failed_runs,
        flagged: failed_runs > 0 || !average.is_finite(),
    }
}

/// Delay-optimal solve that keeps the best iterate when certification fails.
fn solve_dm(instance: &ScenarioInstance, opts: &SolverOptions) -> Result<(SolveOutcome, bool)> {
    match solve_delay_minimization(instance, &LogRate, opts) {
        Ok(out) => Ok((out, false)),
        Err(Error::NotConverged { best, .. }) => Ok((*best, true)),
        Err(e) => Err(e),
    }
}

/// Runs every `(cell, run)` pair in parallel and returns per-cell samples,
/// one vector per policy, in run order.
fn run_grid<F>(
    config: &ExperimentConfig,
    progress: &mut dyn FnMut(usize, usize),
    eval: F,
) -> Result<Vec<Vec<Vec<Sample>>>>
where
    F: Fn(&ScenarioInstance) -> Result<Vec<Sample>> + Sync,
{
    let cells = config.cells();
    let mut out = Vec::with_capacity(cells.len());
    for cell in 0..cells.len() {
        let per_run: Vec<Vec<Sample>> = (0..config.runs)
            .into_par_iter()
            .map(|run| config.draw_scenario(cell, run).and_then(|s| eval(&s)))
            .collect::<Result<_>>()?;
        let mut per_policy: Vec<Vec<Sample>> = (0..config.policies.len())
            .map(|_| Vec::with_capacity(config.runs))
            .collect();
        for samples in per_run {
            for (k, s) in samples.into_iter().enumerate() {
                per_policy[k].push(s);
            }
        }
        out.push(per_policy);
        progress(cell + 1, cells.len());
    }
    Ok(out)
}

/// Average inversion number of each configured policy per `(E[H], E[D])` cell.
///
/// Requires constant gains.
pub fn run_inversion_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    run_inversion_experiment_with_progress(config, &mut |_, _| {})
}

pub fn run_inversion_experiment_with_progress(
    config: &ExperimentConfig,
    progress: &mut dyn FnMut(usize, usize),
) -> Result<ExperimentResult> {
    config.validate()?;
    if config.channel != ChannelModel::Constant {
        return Err(Error::Config(
            "the inversion experiment requires the constant channel (g = 1)".into(),
        ));
    }
    let samples = run_grid(config, progress, |instance| {
        config
            .policies
            .iter()
            .map(|policy| match policy {
                Policy::DelayMinimizing => {
                    let (out, failed) = solve_dm(instance, &config.solver)?;
                    Ok(Sample {
                        value: inversion_number(out.powers.as_slice(), config.tie_tol) as f64,
                        failed,
                    })
                }
                Policy::ThroughputMaximizing => {
                    let p = unweighted_dwf(instance);
                    Ok(Sample {
                        value: inversion_number(p.as_slice(), config.tie_tol) as f64,
                        failed: false,
                    })
                }
            })
            .collect()
    })?;
    let mut cells = Vec::new();
    for ((h, d), per_policy) in config.cells().into_iter().zip(&samples) {
        for (policy, s) in config.policies.iter().zip(per_policy) {
            cells.push(aggregate(h, d, *policy, s));
        }
    }
    Ok(ExperimentResult {
        kind: ExperimentKind::Inversion,
        config: config.clone(),
        seed: config.seed,
        rng_algorithm: RNG_ALGORITHM.into(),
        metric: "inversion_number".into(),
        cells,
        dominance: Vec::new(),
    })
}

/// Average delay of each configured policy per cell under Nakagami-2 fading.
///
/// When both policies are configured, every run is also checked for
/// `L_DM <= L_TM + DOMINANCE_TOL`.
pub fn run_delay_comparison(config: &ExperimentConfig) -> Result<ExperimentResult> {
    run_delay_comparison_with_progress(config, &mut |_, _| {})
}

pub fn run_delay_comparison_with_progress(
    config: &ExperimentConfig,
    progress: &mut dyn FnMut(usize, usize),
) -> Result<ExperimentResult> {
    config.validate()?;
    if config.channel != ChannelModel::Nakagami2 {
        return Err(Error::Config(
            "the delay comparison requires the nakagami2 channel".into(),
        ));
    }
    let samples = run_grid(config, progress, |instance| {
        config
            .policies
            .iter()
            .map(|policy| match policy {
                Policy::DelayMinimizing => {
                    let (out, failed) = solve_dm(instance, &config.solver)?;
                    let delay = average_queue_length(&simulate_trajectory(
                        instance,
                        &out.powers,
                        &LogRate,
                    )?)?;
                    Ok(Sample {
                        value: delay,
                        failed,
                    })
                }
                Policy::ThroughputMaximizing => Ok(Sample {
                    value: throughput_baseline(instance, &LogRate).delay,
                    failed: false,
                }),
            })
            .collect()
    })?;

    let dm = config
        .policies
        .iter()
        .position(|p| *p == Policy::DelayMinimizing);
    let tm = config
        .policies
        .iter()
        .position(|p| *p == Policy::ThroughputMaximizing);
    let mut cells = Vec::new();
    let mut dominance = Vec::new();
    for ((h, d), per_policy) in config.cells().into_iter().zip(&samples) {
        for (policy, s) in config.policies.iter().zip(per_policy) {
            cells.push(aggregate(h, d, *policy, s));
        }
        if let (Some(i), Some(j)) = (dm, tm) {
            let excess: Vec<f64> = per_policy[i]
                .iter()
                .zip(&per_policy[j])
                .map(|(a, b)| a.value - b.value)
                .collect();
            dominance.push(DominanceSummary {
                mean_energy: h,
                mean_data: d,
                violations: excess.iter().filter(|&&e| e > DOMINANCE_TOL).count(),
                worst_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_gap: -excess.iter().sum::<f64>() / excess.len() as f64,
            });
        }
    }
    Ok(ExperimentResult {
        kind: ExperimentKind::Delay,
        config: config.clone(),
        seed: config.seed,
        rng_algorithm: RNG_ALGORITHM.into(),
        metric: "average_delay".into(),
        cells,
        dominance,
    })
}
