//! The four subcommands. Each reads its inputs, writes its outputs and returns an
//! outcome carrying the process exit code.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::Args;
use reluplan_core::compiler::{compile_base, compile_strengthened, instance_bounds, root_relaxation, CompiledModel};
use reluplan_core::domains::{generate, parse_widths, DomainKind, DomainSpec};
use reluplan_core::milp::lp_format::export_lp;
use reluplan_core::milp::{solve_milp_with_clock, MilpParams, SolveStatus};
use reluplan_core::nn::{NeuralNet, UnitBounds};
use reluplan_core::potentials::{compute_potentials_with_clock, CgParams, CgTrace, RewardPotentials, DEFAULT_EPSILON};
use reluplan_core::problem::{check_plan, PlanningInstance};
use reluplan_core::Clock;
use serde::Serialize;

use crate::bench::{parse_settings, BenchReport, BenchRow, RunTimeline, Setting};
use crate::clock::StdClock;
use crate::error::CliError;
use crate::format::{finite, InstanceFile, PlanFile, PotentialsFile, StatsFile, TimelineRow};

/// Tolerance at which emitted plans are re-checked against the network.
pub const PLAN_CHECK_TOL: f64 = 1e-5;
pub const DEFAULT_TIME_LIMIT: f64 = 60.0;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// Writes to `path`, or prints when there is none.
fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn load_instance(path: &Path) -> Result<(PlanningInstance, NeuralNet), CliError> {
    read_json::<InstanceFile>(path)?.to_parts()
}

pub fn load_potentials(path: &Path) -> Result<RewardPotentials, CliError> {
    Ok(RewardPotentials::from(&read_json::<PotentialsFile>(path)?))
}

fn time_limit(secs: f64) -> Option<f64> {
    (secs.is_finite() && secs > 0.0).then_some(secs)
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// navigation, reservoir, hvac or random.
    #[arg(long)]
    pub domain: String,
    /// Maze side, reservoir count or room count.
    #[arg(long, default_value_t = 3)]
    pub size: usize,
    /// Layer widths for random networks, e.g. 4:6:2.
    #[arg(long)]
    pub widths: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Navigation only: use the 4:32:32:2 network shape.
    #[arg(long)]
    pub paper_width: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn cmd_gen(args: &GenArgs) -> Result<InstanceFile, CliError> {
    let kind: DomainKind = args.domain.parse()?;
    let widths = match (&args.widths, kind) {
        (Some(w), _) => parse_widths(w)?,
        (None, DomainKind::Random) => return Err(CliError::Usage("random domains need --widths".into())),
        (None, _) => Vec::new(),
    };
    let spec = DomainSpec {
        kind,
        size: args.size,
        widths,
        seed: args.seed,
        horizon: args.horizon,
        paper_width: args.paper_width,
    };
    let file = InstanceFile::from_generated(&generate(&spec)?);
    emit(args.output.as_deref(), &to_json(&file))?;
    Ok(file)
}

#[derive(Debug, Clone, Args)]
pub struct PotentialsArgs {
    pub instance: PathBuf,
    /// Intervals per unit output range.
    #[arg(long, default_value_t = 1)]
    pub intervals: usize,
    /// Regularizer; defaults to 1/sqrt(M) for the largest big-M constant M.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Trace CSV; defaults to `<output>.trace.csv` when an output is given.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct PotentialsOutcome {
    pub potentials: RewardPotentials,
    pub trace: CgTrace,
    pub elapsed: f64,
}

fn trace_path(args: &PotentialsArgs) -> Option<PathBuf> {
    args.trace.clone().or_else(|| args.output.as_ref().map(|o| o.with_extension("trace.csv")))
}

pub fn cmd_potentials(args: &PotentialsArgs) -> Result<PotentialsOutcome, CliError> {
    let (instance, net) = load_instance(&args.instance)?;
    let bounds = instance_bounds(&instance, &net)?;
    let params =
        CgParams { n_intervals: args.intervals, lambda: args.lambda, epsilon: args.epsilon, max_generated: None };
    let clock = StdClock::start();
    let (potentials, trace) = compute_potentials_with_clock(&net, &instance, &bounds, &params, &clock)?;
    let elapsed = clock.elapsed_secs();
    emit(args.output.as_deref(), &to_json(&PotentialsFile::from(&potentials)))?;
    if let Some(p) = trace_path(args) {
        write_text(&p, &trace.to_csv())?;
    }
    eprintln!(
        "certified: {} iterations, violation {:.3e} <= {:.1e}, {:.3}s",
        trace.iterations.len(),
        potentials.certified_violation,
        potentials.epsilon,
        elapsed
    );
    Ok(PotentialsOutcome { potentials, trace, elapsed })
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    pub instance: PathBuf,
    /// Potentials JSON; adds the strengthening constraints.
    #[arg(long)]
    pub strengthen: Option<PathBuf>,
    /// Seconds; 0 disables the limit.
    #[arg(long, default_value_t = DEFAULT_TIME_LIMIT)]
    pub time_limit: f64,
    #[arg(long)]
    pub node_limit: Option<u64>,
    /// Writes the compiled model in LP format before solving.
    #[arg(long)]
    pub export_lp: Option<PathBuf>,
    /// Plan JSON.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Solver statistics JSON.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Bound timeline CSV.
    #[arg(long)]
    pub timeline: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub plan: Option<PlanFile>,
    pub stats: StatsFile,
    pub exit_code: i32,
}

pub fn timeline_csv(stats: &StatsFile) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "dual", "primal", "open", "closed"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for p in &stats.timeline {
        w.write_record([p.t.to_string(), opt(p.dual), opt(p.primal), p.open.to_string(), p.closed.to_string()])?;
    }
    crate::bench::csv_string(w)
}

fn compile(
    instance: &PlanningInstance,
    net: &NeuralNet,
    bounds: &UnitBounds,
    potentials: Option<&RewardPotentials>,
) -> Result<CompiledModel, CliError> {
    Ok(match potentials {
        None => compile_base(instance, net, bounds)?,
        Some(p) => compile_strengthened(instance, net, bounds, p)?,
    })
}

pub fn cmd_plan(args: &PlanArgs) -> Result<PlanOutcome, CliError> {
    let (instance, net) = load_instance(&args.instance)?;
    let bounds = instance_bounds(&instance, &net)?;
    let potentials = args.strengthen.as_deref().map(load_potentials).transpose()?;
    let compiled = compile(&instance, &net, &bounds, potentials.as_ref())?;
    if let Some(p) = &args.export_lp {
        write_text(p, &export_lp(&compiled.model))?;
    }
    let params =
        MilpParams { time_limit: time_limit(args.time_limit), node_limit: args.node_limit, ..Default::default() };
    let clock = StdClock::start();
    let result = solve_milp_with_clock(&compiled.model, &params, &clock)?;
    let stats = StatsFile::from(&result.stats);
    if let Some(p) = &args.stats {
        write_text(p, &to_json(&stats))?;
    }
    if let Some(p) = &args.timeline {
        write_text(p, &timeline_csv(&stats)?)?;
    }
    let Some(x) = result.x.as_ref() else {
        let why = match result.stats.status {
            SolveStatus::Infeasible => "planning problem is infeasible".to_string(),
            s => format!("no plan found (status {})", s.as_str()),
        };
        eprintln!("{why}");
        return Ok(PlanOutcome { plan: None, stats, exit_code: 2 });
    };
    let plan = compiled.extract_plan(x, instance.n_states(), instance.n_actions());
    let report = check_plan(&instance, &net, &plan, PLAN_CHECK_TOL);
    let traj = match (report.is_valid(), report.trajectory) {
        (true, Some(t)) => t,
        _ => return Err(CliError::InvalidPlan(format!("{:?}", report.violations))),
    };
    let objective = result.objective().expect("incumbent has an objective");
    if (traj.total_reward - objective).abs() > PLAN_CHECK_TOL {
        return Err(CliError::InvalidPlan(format!(
            "simulated reward {} differs from the objective {objective}",
            traj.total_reward
        )));
    }
    let file = PlanFile::new(result.stats.status.as_str(), objective, plan.actions, &traj);
    emit(args.output.as_deref(), &to_json(&file))?;
    eprintln!(
        "{}: objective {objective}, {} nodes closed, {:.3}s",
        result.stats.status.as_str(),
        result.stats.nodes_closed,
        result.stats.elapsed
    );
    Ok(PlanOutcome { plan: Some(file), stats, exit_code: 0 })
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    pub instance: PathBuf,
    /// Comma-separated: base for the plain encoding, nK for K intervals.
    #[arg(long, default_value = "base,n1,n2,n3")]
    pub settings: String,
    #[arg(long, default_value_t = DEFAULT_TIME_LIMIT)]
    pub time_limit: f64,
    #[arg(long)]
    pub node_limit: Option<u64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Settings run concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Report JSON.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Table CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Bound and node timelines CSV, one block per setting.
    #[arg(long)]
    pub timelines: Option<PathBuf>,
}

struct BenchContext<'a> {
    instance: &'a PlanningInstance,
    net: &'a NeuralNet,
    bounds: &'a UnitBounds,
    args: &'a BenchArgs,
}

fn run_setting(ctx: &BenchContext<'_>, setting: Setting) -> (BenchRow, RunTimeline) {
    let clock = StdClock::start();
    let mut potentials_time = 0.0;
    let mut attempt = || -> Result<(BenchRow, Vec<TimelineRow>), CliError> {
        let potentials = match setting {
            Setting::Base => None,
            Setting::Strengthened(n) => {
                let params = CgParams {
                    n_intervals: n,
                    lambda: ctx.args.lambda,
                    epsilon: ctx.args.epsilon,
                    max_generated: None,
                };
                let (p, _) = compute_potentials_with_clock(ctx.net, ctx.instance, ctx.bounds, &params, &clock)?;
                potentials_time = clock.elapsed_secs();
                Some(p)
            }
        };
        let compiled = compile(ctx.instance, ctx.net, ctx.bounds, potentials.as_ref())?;
        let root = root_relaxation(&compiled).ok();
        let params = MilpParams {
            time_limit: time_limit(ctx.args.time_limit),
            node_limit: ctx.args.node_limit,
            ..Default::default()
        };
        let r = solve_milp_with_clock(&compiled.model, &params, &StdClock::start())?;
        let row = BenchRow {
            setting: setting.to_string(),
            potentials_time,
            cumulative_time: clock.elapsed_secs(),
            primal: r.stats.primal,
            dual: finite(r.stats.dual),
            nodes_open: r.stats.nodes_open,
            nodes_closed: r.stats.nodes_closed,
            status: r.stats.status.as_str().to_string(),
            root_bound: root,
            error: None,
        };
        Ok((row, StatsFile::from(&r.stats).timeline))
    };
    let (row, points) = attempt()
        .unwrap_or_else(|e| (BenchRow::failed(&setting, potentials_time, clock.elapsed_secs(), &e), Vec::new()));
    (row, RunTimeline { setting: setting.to_string(), points })
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport, CliError> {
    let settings = parse_settings(&args.settings)?;
    let (instance, net) = load_instance(&args.instance)?;
    let bounds = instance_bounds(&instance, &net)?;
    let ctx = BenchContext { instance: &instance, net: &net, bounds: &bounds, args };
    let results: Vec<Mutex<Option<(BenchRow, RunTimeline)>>> = settings.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= settings.len() {
            break;
        }
        let out = run_setting(&ctx, settings[i]);
        *results[i].lock().expect("no poisoned result") = Some(out);
    };
    std::thread::scope(|s| {
        for _ in 1..args.jobs.clamp(1, settings.len()) {
            s.spawn(worker);
        }
        worker();
    });
    let (rows, timelines): (Vec<_>, Vec<_>) =
        results.into_iter().map(|m| m.into_inner().expect("no poisoned result").expect("every setting ran")).unzip();
    let mut report = BenchReport {
        instance: args.instance.display().to_string(),
        sense: "maximize".into(),
        time_limit: time_limit(args.time_limit),
        node_limit: args.node_limit,
        rows,
        best: None,
        timelines,
    };
    report.mark_best();
    emit(args.output.as_deref(), &to_json(&report))?;
    if let Some(p) = &args.csv {
        write_text(p, &report.to_csv()?)?;
    }
    if let Some(p) = &args.timelines {
        write_text(p, &report.timelines_csv()?)?;
    }
    Ok(report)
}
