//! `persuasion`: run simulations, exact enumerations, the design solver and
//! parameter sweeps on JSON scenario files.

mod error;
mod output;
mod scenario_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::{Signed, Zero};
use persuasion_core::oracle::{self, parse_rational, to_decimal_string, to_f64, EnumerateOptions, Rational};
use persuasion_core::sim::{self, SweepResult};
use persuasion_core::solver::{self, PersistenceVerdict};
use persuasion_core::{Comparison, SimConfig};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{sidecar_path, sig12, write_csv, write_json};
use crate::scenario_file::LoadedScenario;

#[derive(Parser, Debug)]
#[command(
    name = "persuasion",
    version,
    about = "Repeated persuasion with Bayes-factor switching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo adoption curve and lifetime utility.
    Simulate(SimulateArgs),
    /// Exact adoption curve by enumeration in rational arithmetic.
    Oracle(OracleArgs),
    /// BP-optimal structure and persistence verdict.
    Solve(SolveArgs),
    /// Terminal adoption and Sender utility over a parameter grid.
    Sweep(SweepArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Strict,
    Weak,
}

impl From<Mode> for Comparison {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Strict => Comparison::Strict,
            Mode::Weak => Comparison::Weak,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Param {
    Alpha,
    Epsilon,
}

fn rational_arg(text: &str) -> Result<Rational, String> {
    parse_rational(text).map_err(|e| e.to_string())
}

/// Options shared by the Monte Carlo commands.
#[derive(Args, Debug)]
struct McArgs {
    /// Number of periods.
    #[arg(long, default_value_t = 200)]
    horizon: usize,
    /// Number of replications.
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Discount factor.
    #[arg(long, default_value = "0.9", value_parser = rational_arg)]
    delta: Rational,
    #[arg(long, value_enum, default_value_t = Mode::Strict)]
    mode: Mode,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "PERSUASION_WORKERS")]
    workers: Option<usize>,
}

impl McArgs {
    fn config(&self, alpha: &Rational) -> SimConfig {
        SimConfig {
            alpha: to_f64(alpha),
            delta: to_f64(&self.delta),
            horizon: self.horizon,
            replications: self.reps,
            seed: self.seed,
            comparison: self.mode.into(),
            workers: self.workers,
            ..SimConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    scenario: PathBuf,
    /// Switching threshold, greater than 1. Accepts rationals like 139/100.
    #[arg(long, default_value = "1.39", value_parser = rational_arg)]
    alpha: Rational,
    #[command(flatten)]
    mc: McArgs,
    /// CSV destination; a JSON summary is written next to it. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    scenario: PathBuf,
    #[arg(long, default_value = "1.39", value_parser = rational_arg)]
    alpha: Rational,
    #[arg(long, default_value_t = 12)]
    horizon: usize,
    #[arg(long, value_enum, default_value_t = Mode::Strict)]
    mode: Mode,
    /// Largest number of distinct histories kept at one depth.
    #[arg(long, default_value_t = oracle::DEFAULT_NODE_BUDGET)]
    budget: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    scenario: PathBuf,
    /// Threshold used for the persistence verdict.
    #[arg(long, default_value = "1.39", value_parser = rational_arg)]
    alpha: Rational,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    scenario: PathBuf,
    #[arg(long, value_enum)]
    param: Param,
    /// Inclusive grid `start:stop:step`, parsed exactly.
    #[arg(long)]
    grid: String,
    /// Threshold for epsilon sweeps.
    #[arg(long, default_value = "1.39", value_parser = rational_arg)]
    alpha: Rational,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct EstimateOut {
    mean: f64,
    stderr: f64,
}

impl From<sim::Estimate> for EstimateOut {
    fn from(e: sim::Estimate) -> Self {
        EstimateOut {
            mean: e.mean,
            stderr: e.stderr,
        }
    }
}

#[derive(Serialize)]
struct SimulationSidecar {
    scenario: String,
    alpha: f64,
    delta: f64,
    horizon: usize,
    replications: usize,
    seed: u64,
    mode: &'static str,
    announced_value: f64,
    alternative_value: f64,
    terminal_adoption: EstimateOut,
    lifetime_plug_in: EstimateOut,
    lifetime_pathwise: EstimateOut,
    truncation_bound: f64,
    within_tail_tolerance: bool,
}

fn mode_name(c: Comparison) -> &'static str {
    match c {
        Comparison::Strict => "strict",
        Comparison::Weak => "weak",
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let loaded = LoadedScenario::load(&args.scenario)?;
    let structure = loaded.float_structure()?;
    let config = args.mc.config(&args.alpha);
    let summary = sim::simulate(&loaded.float, &structure, &config)?;

    let rows: Vec<Vec<String>> = (0..config.horizon)
        .map(|t| {
            let v = summary.period_sender_utility[t];
            vec![
                (t + 1).to_string(),
                sig12(summary.adoption.estimates[t]),
                sig12(summary.adoption.stderrs[t]),
                sig12(v.mean),
                sig12(v.stderr),
            ]
        })
        .collect();
    write_csv(
        args.out.as_deref(),
        &[
            "t",
            "adoption_estimate",
            "adoption_stderr",
            "period_sender_utility_estimate",
            "period_sender_utility_stderr",
        ],
        &rows,
    )?;

    if let Some(out) = &args.out {
        let life = summary.lifetime_utility();
        let sidecar = SimulationSidecar {
            scenario: args.scenario.display().to_string(),
            alpha: config.alpha,
            delta: config.delta,
            horizon: config.horizon,
            replications: config.replications,
            seed: config.seed,
            mode: mode_name(config.comparison),
            announced_value: summary.announced_value,
            alternative_value: summary.alternative_value,
            terminal_adoption: summary.adoption.terminal().into(),
            lifetime_plug_in: life.plug_in.into(),
            lifetime_pathwise: life.pathwise.into(),
            truncation_bound: life.truncation_bound,
            within_tail_tolerance: life.within_tail_tolerance,
        };
        write_json(Some(&sidecar_path(out)), &sidecar)?;
    }
    Ok(())
}

fn run_oracle(args: &OracleArgs) -> Result<(), CliError> {
    let loaded = LoadedScenario::load(&args.scenario)?;
    let structure = loaded.exact_structure()?;
    let options = EnumerateOptions {
        comparison: args.mode.into(),
        budget: args.budget,
    };
    let curve = oracle::enumerate_with(&loaded.exact, &structure, &args.alpha, args.horizon, &options)?;
    let rows: Vec<Vec<String>> = curve
        .adoption
        .iter()
        .zip(&curve.sender_utility)
        .enumerate()
        .map(|(t, (l, v))| vec![(t + 1).to_string(), to_decimal_string(l, 12), to_decimal_string(v, 12)])
        .collect();
    write_csv(
        args.out.as_deref(),
        &["t", "adoption_exact", "sender_utility_exact"],
        &rows,
    )
}

#[derive(Serialize)]
struct VerdictOut {
    classification: String,
    reason: String,
    alpha: f64,
    alpha_hat: Option<f64>,
    adoption_bound: Option<f64>,
    alpha_below_threshold: Option<bool>,
}

impl VerdictOut {
    fn new(v: &PersistenceVerdict, alpha: f64) -> Self {
        VerdictOut {
            classification: format!("{:?}", v.classification),
            reason: format!("{:?}", v.reason),
            alpha,
            alpha_hat: v.alpha_hat,
            adoption_bound: v.adoption_bound,
            alpha_below_threshold: v.alpha_below_threshold,
        }
    }
}

#[derive(Serialize)]
struct SolveReport {
    scenario: String,
    states: Vec<String>,
    actions: Vec<String>,
    kind: String,
    signals: Vec<String>,
    matrix: Vec<Vec<f64>>,
    matrix_exact: Vec<Vec<String>>,
    value: f64,
    value_exact: String,
    mu_star: Option<f64>,
    mu_star_exact: Option<String>,
    x: Option<f64>,
    e: Option<f64>,
    /// Structure the verdict refers to: the file's announced structure.
    announced_signals: Vec<String>,
    announced_matrix: Vec<Vec<f64>>,
    verdict: VerdictOut,
}

fn solve(args: &SolveArgs) -> Result<(), CliError> {
    let loaded = LoadedScenario::load(&args.scenario)?;
    let bp = solver::bp_optimal(&loaded.float)?;
    let exact = oracle::bp_optimal(&loaded.exact)?;
    let mu_star = oracle::receiver_threshold(&loaded.exact)?;
    let announced = loaded.float_structure()?;
    let alpha = to_f64(&args.alpha);
    let verdict = solver::classify_persistence(&loaded.float, &announced, alpha)?;
    let report = SolveReport {
        scenario: args.scenario.display().to_string(),
        states: loaded.file.states.clone(),
        actions: loaded.file.actions.clone(),
        kind: format!("{:?}", bp.kind),
        signals: bp.structure.signals().to_vec(),
        matrix: bp.structure.rows().to_vec(),
        matrix_exact: exact
            .structure
            .rows()
            .iter()
            .map(|r| r.iter().map(|p| p.to_string()).collect())
            .collect(),
        value: bp.value,
        value_exact: exact.value.to_string(),
        mu_star: (!bp.degenerate_threshold).then(|| bp.threshold_mu_star.value()),
        mu_star_exact: mu_star.map(|m| m.to_string()),
        x: bp.x,
        e: bp.e,
        announced_signals: announced.signals().to_vec(),
        announced_matrix: announced.rows().to_vec(),
        verdict: VerdictOut::new(&verdict, alpha),
    };
    write_json(args.out.as_deref(), &report)
}

/// Parses `start:stop:step` into the exact points `start + k·step ≤ stop`.
fn parse_grid(text: &str) -> Result<Vec<Rational>, CliError> {
    const MAX_POINTS: usize = 100_000;
    let bad = |why: &str| CliError::new("usage", format!("invalid grid `{text}`: {why}"));
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(bad("expected start:stop:step"));
    };
    let (start, stop, step) = (parse_rational(start)?, parse_rational(stop)?, parse_rational(step)?);
    if !step.is_positive() {
        if start == stop && step.is_zero() {
            return Ok(vec![start]);
        }
        return Err(bad("step must be positive"));
    }
    if start > stop {
        return Err(bad("start exceeds stop"));
    }
    let mut points = Vec::new();
    let mut x = start;
    while x <= stop {
        if points.len() == MAX_POINTS {
            return Err(bad("too many points"));
        }
        points.push(x.clone());
        x += &step;
    }
    Ok(points)
}

fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let loaded = LoadedScenario::load(&args.scenario)?;
    let grid: Vec<f64> = parse_grid(&args.grid)?.iter().map(to_f64).collect();
    let result: SweepResult = match args.param {
        Param::Alpha => {
            let structure = loaded.float_structure()?;
            sim::sweep_alpha(&loaded.float, &structure, &grid, &args.mc.config(&args.alpha))?
        }
        Param::Epsilon => sim::sweep_epsilon(&loaded.float, &grid, &args.mc.config(&args.alpha))?,
    };
    let rows: Vec<Vec<String>> = result
        .points
        .iter()
        .map(|p| {
            vec![
                sig12(p.value),
                sig12(p.terminal_adoption.mean),
                sig12(p.terminal_adoption.stderr),
                sig12(p.period_sender_utility.mean),
                sig12(p.period_sender_utility.stderr),
                sig12(p.pathwise_period_utility.mean),
                sig12(p.pathwise_period_utility.stderr),
            ]
        })
        .collect();
    write_csv(
        args.out.as_deref(),
        &[
            "param_value",
            "terminal_adoption",
            "terminal_adoption_stderr",
            "period_sender_utility",
            "period_sender_utility_stderr",
            "pathwise_period_sender_utility",
            "pathwise_period_sender_utility_stderr",
        ],
        &rows,
    )
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Oracle(a) => run_oracle(a),
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category, e.message.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
