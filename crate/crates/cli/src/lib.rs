//! Command line driver: deployment, scheduling, simulation and sweeps over
//! scenario files.

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use meco_core::adgraph::{build_ad_graph, Anchoring, GraphError};
use meco_core::deployment::{solve_deployment_with, verify_plan, DeploymentError, DeploymentOptions, RateCheck};
use meco_core::kmst::{kmst_solve, verify_tree, ExactOptions, KmstError, KmstGraph, TreeSolution, DEFAULT_EXACT_LIMIT};
use meco_core::offload::{
    build_offload_matrix, design_queue, evaluate_schedule, integration_priorities, validate_schedule, OffloadError,
    OffloadMatrix, PriorityOrder, Schedule,
};
use meco_core::scenario::{Scenario, ScenarioError};
use meco_core::sim::{slots_to_csv, SimConfig, SimError, SimSummary, Simulator, WindowMode};
use meco_core::DeploymentPlan;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "meco", version, about = "Edge microservice deployment and task offloading")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Choose MEC servers and de-duplicate shared microservices.
    Deploy(DeployArgs),
    /// Build the offloading matrix and queue, then evaluate the schedule.
    Schedule(ScheduleArgs),
    /// Run the time-slotted simulation.
    Simulate(SimulateArgs),
    /// Run the simulation over a grid of one parameter.
    Sweep(SweepArgs),
    /// Check plans, trees and schedules.
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Debug, Args)]
pub struct DeployArgs {
    pub scenario: PathBuf,
    /// Required edge hit rate; defaults to the scenario's `deployment.required_rate`.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub kappa: Option<u64>,
    /// Largest folded instance solved exactly; bigger ones use the heuristic.
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    pub exact_limit: usize,
    #[arg(long, value_enum, default_value_t = RateCheckArg::Distinct)]
    pub rate_check: RateCheckArg,
    /// Use the unanchored reduction.
    #[arg(long)]
    pub literal: bool,
    /// Plan JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// AD-graph in DOT format.
    #[arg(long)]
    pub dot: Option<PathBuf>,
    /// The k-MST instance of the whole graph and its solution, for `verify tree`.
    #[arg(long)]
    pub kmst_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RateCheckArg {
    Proxy,
    Distinct,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    pub scenario: PathBuf,
    /// Deployment plan JSON; the scenario's full placement when absent.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Schedule CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Offloading matrix CSV.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OrderArg::LargerFirst)]
    pub order: OrderArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrderArg {
    LargerFirst,
    SmallerFirst,
}

impl From<OrderArg> for PriorityOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::LargerFirst => PriorityOrder::LargerFirst,
            OrderArg::SmallerFirst => PriorityOrder::SmallerFirst,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub slots: Option<u32>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Per-slot metrics CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    SdAeto,
    RandomDeploy,
    NoPriorityFcfs,
}

impl From<SchemeArg> for meco_core::sim::Scheme {
    fn from(s: SchemeArg) -> Self {
        use meco_core::sim::Scheme;
        match s {
            SchemeArg::SdAeto => Scheme::SdAeto,
            SchemeArg::RandomDeploy => Scheme::RandomDeploy,
            SchemeArg::NoPriorityFcfs => Scheme::NoPriorityFcfs,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub scenario: PathBuf,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma separated values; `a..b:step` expands to an inclusive range.
    #[arg(long)]
    pub values: String,
    #[arg(long)]
    pub seed: u64,
    /// Independent runs per point with seeds `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
    #[arg(long)]
    pub slots: Option<u32>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Service arrival probability.
    Bs,
    /// Task arrival probability.
    Bu,
    Mecs,
    Ues,
    /// Required hit rate.
    Rate,
    /// Fixed window size.
    Window,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Re-derive a plan's storage, rate and capacity claims.
    Plan { scenario: PathBuf, plan: PathBuf },
    /// Validate a schedule CSV against the scenario's offloading matrix.
    Schedule {
        scenario: PathBuf,
        schedule: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Check a tree file written by `deploy --kmst-out`.
    Tree { file: PathBuf },
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_USAGE,
            error: error.into(),
        }
    }

    fn infeasible(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_INFEASIBLE,
            error: error.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self::usage(error)
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Self::usage(e)
    }
}

impl From<DeploymentError> for Failure {
    fn from(e: DeploymentError) -> Self {
        let domain = matches!(
            e,
            DeploymentError::RateUnreachable { .. }
                | DeploymentError::DistinctRateUnreachable { .. }
                | DeploymentError::CapacityInfeasible { .. }
                | DeploymentError::Graph(GraphError::Unreachable { .. })
                | DeploymentError::Kmst(KmstError::Infeasible { .. })
        );
        if domain {
            Self::infeasible(e)
        } else {
            Self::usage(e)
        }
    }
}

impl From<OffloadError> for Failure {
    fn from(e: OffloadError) -> Self {
        match e {
            OffloadError::Unschedulable(_) => Self::infeasible(e),
            _ => Self::usage(e),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Deployment(d) => d.into(),
            SimError::Offload(o) => o.into(),
            other => Self::usage(other),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Diagnostics go to `err`, reports to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {:#}", f.error);
            f.code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> CmdResult {
    match command {
        Command::Deploy(a) => cmd_deploy(a, out),
        Command::Schedule(a) => cmd_schedule(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Verify(v) => cmd_verify(v, out),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> anyhow::Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => out.write_all(text.as_bytes()).context("writing output"),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = read(path)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// The `--kmst-out` artifact.
#[derive(Debug, Serialize, Deserialize)]
pub struct TreeArtifact {
    pub instance: KmstGraph,
    pub solution: TreeSolution,
}

fn cmd_deploy(a: DeployArgs, out: &mut dyn Write) -> CmdResult {
    let scenario = Scenario::load(&a.scenario)?;
    let rate = a.rate.or(scenario.deployment.required_rate).unwrap_or(0.0);
    if !(0.0..=1.0).contains(&rate) {
        return Err(Failure::usage(anyhow::anyhow!("--rate {rate} outside [0, 1]")));
    }
    let kappa = a.kappa.unwrap_or(scenario.deployment.kappa);
    if kappa == 0 {
        return Err(Failure::usage(anyhow::anyhow!("--kappa must be at least 1")));
    }
    let servers = scenario.placement();
    let anchoring = if a.literal {
        Anchoring::Literal
    } else {
        Anchoring::Anchored
    };
    let exact = ExactOptions { limit: a.exact_limit };
    if let Some(path) = &a.dot {
        let graph = build_ad_graph(&servers, &scenario.catalog).map_err(DeploymentError::from)?;
        write_file(path, &graph.to_dot())?;
    }
    if let Some(path) = &a.kmst_out {
        let graph = build_ad_graph(&servers, &scenario.catalog).map_err(DeploymentError::from)?;
        let instance = graph
            .to_kmst_instance_with(rate, kappa, anchoring)
            .map_err(DeploymentError::from)?;
        let solution = kmst_solve(&instance, instance.k_target, exact).map_err(DeploymentError::from)?;
        write_file(path, &to_json(&TreeArtifact { instance, solution }))?;
    }
    let opts = DeploymentOptions {
        kappa,
        exact,
        anchoring,
        rate_check: match a.rate_check {
            RateCheckArg::Proxy => RateCheck::Proxy,
            RateCheckArg::Distinct => RateCheck::Distinct,
        },
    };
    let plan = solve_deployment_with(&scenario.catalog, &servers, rate, opts)?;
    emit(a.out.as_deref(), &to_json(&plan), out)?;
    if a.out.is_some() {
        let theta = plan.theta.map_or("undefined".to_owned(), |t| format!("{t:.4}"));
        writeln!(
            out,
            "servers {} footprint {} hit rate {:.4} theta {theta}",
            plan.chosen_servers.len(),
            plan.footprint,
            plan.hit_rate
        )
        .context("writing output")?;
    }
    Ok(())
}

fn load_plan(scenario: &Scenario, path: Option<&Path>) -> Result<DeploymentPlan, Failure> {
    match path {
        Some(p) => Ok(read_json(p)?),
        None => {
            let rate = scenario.deployment.required_rate.unwrap_or(0.0);
            Ok(DeploymentPlan::from_placement(&scenario.catalog, &scenario.placement(), rate)?)
        }
    }
}

fn scenario_matrix(scenario: &Scenario, plan: &DeploymentPlan) -> Result<OffloadMatrix, Failure> {
    let provider = scenario.latency_provider();
    Ok(build_offload_matrix(
        &scenario.subtasks(),
        &scenario.topology(),
        plan,
        provider.as_ref(),
    )?)
}

fn cmd_schedule(a: ScheduleArgs, out: &mut dyn Write) -> CmdResult {
    let scenario = Scenario::load(&a.scenario)?;
    let plan = load_plan(&scenario, a.plan.as_deref())?;
    let matrix = scenario_matrix(&scenario, &plan)?;
    if let Some(path) = &a.matrix_out {
        write_file(path, &matrix.to_csv()?)?;
    }
    let stranded: Vec<String> = matrix
        .rows
        .iter()
        .filter(|r| r.cells.iter().all(Option::is_none))
        .map(|r| r.subtask.label())
        .collect();
    if !stranded.is_empty() {
        return Err(Failure::infeasible(anyhow::anyhow!(
            "unschedulable subtasks (no target hosts their microservice): {}",
            stranded.join(", ")
        )));
    }
    let order = PriorityOrder::from(a.order);
    let priorities = integration_priorities(&matrix, &scenario.catalog)?;
    let queue = design_queue(&matrix, &priorities, order)?;
    let schedule = evaluate_schedule(&queue, &matrix, &priorities)?;
    emit(a.out.as_deref(), &schedule.to_csv()?, out)?;
    if a.out.is_some() {
        let labels: Vec<String> = queue.iter().map(|&r| matrix.rows[r].subtask.label()).collect();
        writeln!(out, "queue {}", labels.join(" ")).context("writing output")?;
        writeln!(out, "T_total {}", schedule.makespan).context("writing output")?;
    }
    Ok(())
}

fn sim_config(scenario: &Scenario, seed: u64, slots: Option<u32>, scheme: Option<SchemeArg>) -> SimConfig {
    let mut c = scenario.sim_config();
    c.seed = seed;
    if let Some(s) = slots {
        c.slots = s;
    }
    if let Some(s) = scheme {
        c.scheme = s.into();
    }
    c
}

fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write) -> CmdResult {
    let scenario = Scenario::load(&a.scenario)?;
    let config = sim_config(&scenario, a.seed, a.slots, a.scheme);
    let report = Simulator::new(scenario.catalog.clone(), config)?.run()?;
    emit(a.out.as_deref(), &report.to_csv()?, out)?;
    if a.out.is_some() {
        write!(out, "{}", to_json(&report.summary)).context("writing output")?;
    }
    Ok(())
}

/// Expands the `--values` list.
pub fn parse_values(spec: &str) -> anyhow::Result<Vec<String>> {
    let mut values = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((range, step)) = item.split_once(':') {
            let (lo, hi) = range
                .split_once("..")
                .with_context(|| format!("range `{item}` must look like a..b:step"))?;
            let lo: f64 = lo.trim().parse().with_context(|| format!("bad range start in `{item}`"))?;
            let hi: f64 = hi.trim().parse().with_context(|| format!("bad range end in `{item}`"))?;
            let step: f64 = step.trim().parse().with_context(|| format!("bad step in `{item}`"))?;
            anyhow::ensure!(step > 0.0 && hi >= lo, "range `{item}` is empty or has a non-positive step");
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            for i in 0..=n {
                let v = ((lo + i as f64 * step) * 1e9).round() / 1e9;
                values.push(format!("{v}"));
            }
        } else {
            item.parse::<f64>().with_context(|| format!("bad value `{item}`"))?;
            values.push(item.to_owned());
        }
    }
    anyhow::ensure!(!values.is_empty(), "no sweep values given");
    Ok(values)
}

/// Applies one sweep value to a configuration.
pub fn apply_param(config: &mut SimConfig, param: SweepParam, value: &str) -> anyhow::Result<()> {
    let real = || -> anyhow::Result<f64> { value.parse().with_context(|| format!("bad value `{value}`")) };
    let count = || -> anyhow::Result<usize> {
        value
            .parse()
            .with_context(|| format!("`{value}` is not a non-negative integer"))
    };
    match param {
        SweepParam::Bs => config.service_arrival = real()?,
        SweepParam::Bu => config.task_arrival = real()?,
        SweepParam::Rate => config.required_rate = real()?,
        SweepParam::Ues => config.num_ues = count()?,
        SweepParam::Window => config.window = WindowMode::Fixed { size: count()? },
        SweepParam::Mecs => {
            config.num_mecs = count()?;
            if config.capacities.as_ref().is_some_and(|c| c.len() != config.num_mecs) {
                config.capacities = None;
            }
        }
    }
    config.validate().map_err(|e| anyhow::anyhow!("{value}: {e}"))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepManifest {
    pub scenario: String,
    pub param: SweepParam,
    pub seed: u64,
    pub runs: u64,
    pub slots: u32,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: String,
    pub file: String,
    pub summaries: Vec<SimSummary>,
}

fn param_name(p: SweepParam) -> &'static str {
    match p {
        SweepParam::Bs => "bs",
        SweepParam::Bu => "bu",
        SweepParam::Mecs => "mecs",
        SweepParam::Ues => "ues",
        SweepParam::Rate => "rate",
        SweepParam::Window => "window",
    }
}

fn cmd_sweep(a: SweepArgs, out: &mut dyn Write) -> CmdResult {
    let scenario = Scenario::load(&a.scenario)?;
    let values = parse_values(&a.values)?;
    if a.runs == 0 {
        return Err(Failure::usage(anyhow::anyhow!("--runs must be at least 1")));
    }
    let base = sim_config(&scenario, a.seed, a.slots, a.scheme);
    let mut configs = Vec::with_capacity(values.len());
    for v in &values {
        let mut c = base.clone();
        apply_param(&mut c, a.param, v)?;
        configs.push(c);
    }
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let name = param_name(a.param);
    let results: Vec<Result<SweepPoint, Failure>> = values
        .par_iter()
        .zip(configs.par_iter())
        .map(|(value, config)| {
            let mut slots = Vec::new();
            let mut summaries = Vec::new();
            for r in 0..a.runs {
                let c = SimConfig {
                    seed: a.seed + r,
                    ..config.clone()
                };
                let report = Simulator::new(scenario.catalog.clone(), c)?.run()?;
                summaries.push(report.summary);
                slots.extend(report.slots);
            }
            let file = format!("{name}_{value}.csv");
            write_file(&a.out.join(&file), &slots_to_csv(&slots)?)?;
            Ok(SweepPoint {
                value: value.clone(),
                file,
                summaries,
            })
        })
        .collect();
    let points = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let manifest = SweepManifest {
        scenario: a.scenario.display().to_string(),
        param: a.param,
        seed: a.seed,
        runs: a.runs,
        slots: base.slots,
        points,
    };
    write_file(&a.out.join("manifest.json"), &to_json(&manifest))?;
    writeln!(out, "{} points written to {}", manifest.points.len(), a.out.display()).context("writing output")?;
    Ok(())
}

fn report_check(out: &mut dyn Write, what: &str, violations: &[String]) -> CmdResult {
    if violations.is_empty() {
        writeln!(out, "{what}: valid").context("writing output")?;
        return Ok(());
    }
    for v in violations {
        writeln!(out, "{what}: {v}").context("writing output")?;
    }
    Err(Failure::infeasible(anyhow::anyhow!(
        "{what} invalid ({} violations)",
        violations.len()
    )))
}

fn cmd_verify(v: VerifyCommand, out: &mut dyn Write) -> CmdResult {
    match v {
        VerifyCommand::Plan { scenario, plan } => {
            let scenario = Scenario::load(&scenario)?;
            let plan: DeploymentPlan = read_json(&plan)?;
            let check = verify_plan(&plan, &scenario.catalog, &scenario.placement());
            report_check(out, "plan", &check.violations)
        }
        VerifyCommand::Schedule { scenario, schedule, plan } => {
            let scenario = Scenario::load(&scenario)?;
            let plan = load_plan(&scenario, plan.as_deref())?;
            let matrix = scenario_matrix(&scenario, &plan)?;
            let schedule = Schedule::from_csv(&read(&schedule)?, &matrix)?;
            let check = validate_schedule(&schedule, &matrix);
            let violations: Vec<String> = check.violations.iter().map(ToString::to_string).collect();
            report_check(out, "schedule", &violations)
        }
        VerifyCommand::Tree { file } => {
            let art: TreeArtifact = read_json(&file)?;
            let check = verify_tree(&art.instance, &art.solution, art.instance.k_target);
            let violations: Vec<String> = check.violations.iter().map(ToString::to_string).collect();
            report_check(out, "tree", &violations)
        }
    }
}
