//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 unreadable or invalid input,
//! 3 solver did not converge, 4 a check failed (flagged experiment cell or
//! oracle disagreement), 5 request refused (oracle horizon too long).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    average_queue_length, check_feasibility, simulate_trajectory, LogRate, PowerPolicy,
    RateFunction, ScenarioInstance, Trajectory, DEFAULT_FEASIBILITY_TOL,
};
use crate::montecarlo::{
    run_delay_comparison_with_progress, run_inversion_experiment_with_progress, ExperimentConfig,
    ExperimentResult,
};
use crate::oracle::{grid_search_delay, GridSpec, OracleResult};
use crate::solver::{solve_delay_minimization, ResidualReport, SolverOptions};
use crate::waterfill::{fill, throughput_baseline, WaterTank};

pub const EXIT_IO: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;
pub const EXIT_REFUSED: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "ehdo",
    version,
    about = "Delay-optimal transmission for energy-harvesting links"
)]
pub struct Cli {
    /// Worker threads for experiments (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the delay minimization for one scenario.
    Solve(SolveArgs),
    /// Weighted directional water-filling (battery constraints only).
    Waterfill(IoArgs),
    /// Throughput-maximizing baseline and its queue-capped delay.
    TmBaseline(IoArgs),
    /// Average inversion numbers over a grid of mean arrivals.
    ExperimentInversion(ExperimentArgs),
    /// Delay of the optimal policy against the throughput baseline.
    ExperimentDelay(ExperimentArgs),
    /// Compare the solver with a lattice search (T <= 4).
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
pub struct IoArgs {
    /// Scenario JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct SolverFlags {
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub barrier_factor: Option<f64>,
}

impl SolverFlags {
    fn apply(&self, mut opts: SolverOptions) -> SolverOptions {
        if let Some(t) = self.tol {
            opts.tolerance = t;
        }
        if let Some(n) = self.max_iters {
            opts.max_iterations = n;
        }
        if let Some(f) = self.barrier_factor {
            opts.barrier_factor = f;
        }
        opts
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment config JSON; built-in defaults are used when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Lattice points per axis.
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    #[command(flatten)]
    pub solver: SolverFlags,
}

/// Maps an error to its documented exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
        Error::Refused(_) => EXIT_REFUSED,
        Error::Input(_)
        | Error::Parameter(_)
        | Error::Range(_)
        | Error::Config(_)
        | Error::Json(_)
        | Error::Csv(_) => EXIT_INPUT,
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("EHDO_LOG", "warn"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed invocation. `Ok` carries a nonzero code when a check failed.
pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Waterfill(a) => cmd_waterfill(a),
        Command::TmBaseline(a) => cmd_tm_baseline(a),
        Command::ExperimentInversion(a) => with_threads(cli.threads, || cmd_experiment(a, false)),
        Command::ExperimentDelay(a) => with_threads(cli.threads, || cmd_experiment(a, true)),
        Command::OracleCheck(a) => cmd_oracle(a),
    }
}

fn with_threads<F>(threads: Option<usize>, f: F) -> Result<i32>
where
    F: FnOnce() -> Result<i32> + Send,
{
    match threads {
        None => f(),
        Some(0) => Err(Error::Input("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(f),
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read_scenario(path: &Path) -> Result<ScenarioInstance> {
    ScenarioInstance::from_json(&fs::read_to_string(path)?)
}

fn csv_string<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Serialize)]
pub struct SolutionRecord {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(rename = "L_star")]
    pub l_star: f64,
    pub kkt_residuals: ResidualReport,
    pub iterations: usize,
    pub fixed_slots: usize,
    pub options: SolverOptions,
}

/// One row of the per-slot solution table.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SlotRow {
    pub t: usize,
    #[serde(rename = "H_t")]
    pub h: f64,
    #[serde(rename = "D_t")]
    pub d: f64,
    #[serde(rename = "g_t")]
    pub g: f64,
    #[serde(rename = "p_t")]
    pub p: f64,
    #[serde(rename = "r_t")]
    pub r: f64,
    #[serde(rename = "E_t")]
    pub e: f64,
    #[serde(rename = "Q_t")]
    pub queue: f64,
}

fn slot_rows(
    instance: &ScenarioInstance,
    powers: &PowerPolicy,
    trajectory: &Trajectory,
    rate: &dyn RateFunction,
) -> Vec<SlotRow> {
    (0..instance.horizon())
        .map(|t| SlotRow {
            t: t + 1,
            h: instance.energy_arrivals()[t],
            d: instance.data_arrivals()[t],
            g: instance.gains()[t],
            p: powers[t],
            r: rate.rate(powers[t], instance.gains()[t]),
            e: trajectory.energy[t + 1],
            queue: trajectory.queue[t + 1],
        })
        .collect()
}

fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let instance = read_scenario(&a.io.input)?;
    let opts = a.solver.apply(SolverOptions::default());
    let out = solve_delay_minimization(&instance, &LogRate, &opts)?;
    let trajectory = simulate_trajectory(&instance, &out.powers, &LogRate)?;
    let feas = check_feasibility(&instance, &out.powers, &LogRate, DEFAULT_FEASIBILITY_TOL)?;
    if !feas.feasible {
        log::warn!(
            "solution violates constraints at slots {:?}",
            feas.violations()
        );
    }
    let record = SolutionRecord {
        p: out.powers.as_slice().to_vec(),
        q: out.rates.as_slice().to_vec(),
        l_star: out.objective,
        kkt_residuals: out.residuals,
        iterations: out.newton_iterations,
        fixed_slots: out.fixed_slots,
        options: opts,
    };
    let rows = slot_rows(&instance, &out.powers, &trajectory, &LogRate);
    write_atomic(
        &a.io.output.join("solution.json"),
        serde_json::to_string_pretty(&record)?.as_bytes(),
    )?;
    write_atomic(
        &a.io.output.join("trajectory.csv"),
        csv_string(rows)?.as_bytes(),
    )?;
    println!(
        "L* = {:.10} after {} Newton iterations",
        record.l_star, record.iterations
    );
    Ok(0)
}

#[derive(Serialize)]
struct WaterRow {
    t: usize,
    w_t: f64,
    #[serde(rename = "delta_t")]
    delta: f64,
    inflow: f64,
    p_t: f64,
    d_t: f64,
    nu_t: f64,
}

fn cmd_waterfill(a: &IoArgs) -> Result<i32> {
    let instance = read_scenario(&a.input)?;
    let tank = WaterTank::weighted(&instance);
    let filled = fill(&tank);
    let rows = (0..tank.len()).map(|t| WaterRow {
        t: t + 1,
        w_t: tank.widths[t],
        delta: tank.grounds[t],
        inflow: tank.inflows[t],
        p_t: filled.powers[t],
        d_t: filled.depths[t],
        nu_t: tank.grounds[t] + filled.depths[t],
    });
    write_atomic(
        &a.output.join("waterfill.csv"),
        csv_string(rows)?.as_bytes(),
    )?;
    write_atomic(
        &a.output.join("waterfill.json"),
        serde_json::to_string_pretty(&filled)?.as_bytes(),
    )?;
    Ok(0)
}

fn cmd_tm_baseline(a: &IoArgs) -> Result<i32> {
    let instance = read_scenario(&a.input)?;
    let b = throughput_baseline(&instance, &LogRate);
    let rows = slot_rows(&instance, &b.transmitted, &b.trajectory, &LogRate);
    write_atomic(
        &a.output.join("baseline.json"),
        serde_json::to_string_pretty(&b)?.as_bytes(),
    )?;
    write_atomic(&a.output.join("baseline.csv"), csv_string(rows)?.as_bytes())?;
    println!("TM delay = {:.10}", b.delay);
    Ok(0)
}

fn cmd_experiment(a: &ExperimentArgs, delay: bool) -> Result<i32> {
    let mut config = match &a.input {
        Some(path) => ExperimentConfig::from_json(&fs::read_to_string(path)?)?,
        None if delay => ExperimentConfig::delay_defaults(),
        None => ExperimentConfig::inversion_defaults(),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(runs) = a.runs {
        config.runs = runs;
    }
    config.solver = a.solver.apply(config.solver);
    let mut progress = |done: usize, total: usize| eprintln!("cell {done}/{total} done");
    let result: ExperimentResult = if delay {
        run_delay_comparison_with_progress(&config, &mut progress)?
    } else {
        run_inversion_experiment_with_progress(&config, &mut progress)?
    };
    let stem = if delay { "delay" } else { "inversion" };
    write_atomic(
        &a.output.join(format!("{stem}.csv")),
        result.to_csv()?.as_bytes(),
    )?;
    write_atomic(
        &a.output.join(format!("{stem}.json")),
        result.to_json()?.as_bytes(),
    )?;
    for c in result.cells.iter().filter(|c| c.flagged) {
        eprintln!(
            "flagged: E_H={} E_D={} {}: {} of {} runs failed",
            c.mean_energy,
            c.mean_data,
            c.policy.label(),
            c.failed_runs,
            c.runs
        );
    }
    for d in result.dominance.iter().filter(|d| d.violations > 0) {
        eprintln!(
            "flagged: E_H={} E_D={}: {} runs with L_DM > L_TM (worst excess {:e})",
            d.mean_energy, d.mean_data, d.violations, d.worst_excess
        );
    }
    Ok(if result.any_flagged() {
        EXIT_CHECK_FAILED
    } else {
        0
    })
}

#[derive(Serialize)]
struct OracleRecord {
    solver_objective: f64,
    solver_rates: Vec<f64>,
    oracle: OracleResult,
    grid_points: usize,
    difference: f64,
    agrees: bool,
}

/// Solver and lattice search must agree within the lattice bound plus this.
pub const ORACLE_SLACK: f64 = 1e-6;

fn cmd_oracle(a: &OracleArgs) -> Result<i32> {
    let instance = read_scenario(&a.io.input)?;
    let grid = GridSpec::new(a.points)?;
    let oracle = grid_search_delay(&instance, &LogRate, &grid)?;
    let out = solve_delay_minimization(
        &instance,
        &LogRate,
        &a.solver.apply(SolverOptions::default()),
    )?;
    let solver_delay =
        average_queue_length(&simulate_trajectory(&instance, &out.powers, &LogRate)?)?;
    let difference = (oracle.objective - solver_delay).abs();
    let agrees = difference <= oracle.error_bound + ORACLE_SLACK;
    let record = OracleRecord {
        solver_objective: solver_delay,
        solver_rates: out.rates.as_slice().to_vec(),
        grid_points: a.points,
        difference,
        agrees,
        oracle,
    };
    write_atomic(
        &a.io.output.join("oracle.json"),
        serde_json::to_string_pretty(&record)?.as_bytes(),
    )?;
    println!(
        "solver {:.8}, lattice {:.8}, bound {:.3e}: {}",
        record.solver_objective,
        record.oracle.objective,
        record.oracle.error_bound,
        if agrees { "agree" } else { "DISAGREE" }
    );
    Ok(if agrees { 0 } else { EXIT_CHECK_FAILED })
}
