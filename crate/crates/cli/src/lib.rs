//! Command dispatch for the `esskit` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use esskit_core::programs::SweepAxis;
use esskit_core::traces::{downsample, gen_power_trace, gen_rsr_signal, load_csv, save_csv};
use esskit_core::{
    holdout, optimize, select, sweep, Capacities, CoreError, Heuristic, HoldoutConfig, HoldoutReport, PolicyKind,
    ProgramKind, ProgramPlan, ProgramSpec, RunConfig, TraceKind,
};
use esskit_lp::LpStatus;
use serde::Serialize;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_UNBOUNDED: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "esskit", version, about = "Energy storage market participation studies")]
pub struct Cli {
    /// Calibration file; the built-in calibration is used when the default
    /// path does not exist.
    #[arg(long, global = true, default_value = "defaults.json")]
    pub config: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic regulation signal or power trace as CSV.
    GenTrace(GenTraceArgs),
    /// Solve one market program and write the plan and its schedule.
    Optimize(OptimizeArgs),
    /// Run the hourly hold-out evaluation of an online policy.
    Online(OnlineArgs),
    /// Optimize over a one- or two-axis parameter grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Rsr,
    Power,
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long)]
    pub slots: Option<usize>,
    #[arg(long)]
    pub slot_seconds: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub mean_reversion: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub peak_kw: Option<f64>,
    #[arg(long)]
    pub base_fraction: Option<f64>,
    #[arg(long)]
    pub noise_fraction: Option<f64>,
    /// Block-mean factor applied to a generated signal.
    #[arg(long, default_value_t = 1)]
    pub downsample: usize,
    /// Output file; defaults to `<output dir>/<kind>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Program {
    Rsr,
    Cr,
    Ps,
}

impl From<Program> for ProgramKind {
    fn from(p: Program) -> Self {
        match p {
            Program::Rsr => ProgramKind::Rsr,
            Program::Cr => ProgramKind::Cr,
            Program::Ps => ProgramKind::Ps,
        }
    }
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_enum)]
    pub program: Program,
    #[arg(long)]
    pub tech: String,
    /// Fix capacities as `P_kW,E_kWh`.
    #[arg(long, value_parser = parse_caps)]
    pub fix_caps: Option<Capacities>,
    #[arg(long)]
    pub rho2: Option<f64>,
    #[arg(long)]
    pub heuristic: Option<Heuristic>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trace CSV replacing the configured signal or power trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OnlineArgs {
    #[arg(long)]
    pub tech: String,
    /// Discount on the reserve estimate, in `[0, 1]`.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub window_hours: Option<usize>,
    /// Defaults to `ucfw` for uc and fw, `battery` otherwise.
    #[arg(long)]
    pub policy: Option<PolicyKind>,
    #[arg(long)]
    pub rho2: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub program: Program,
    #[arg(long)]
    pub tech: String,
    /// `name=v1,v2,...`; give once or twice.
    #[arg(long = "axis", value_parser = parse_axis, required = true)]
    pub axes: Vec<(SweepAxis, Vec<f64>)>,
    #[arg(long, value_parser = parse_caps)]
    pub fix_caps: Option<Capacities>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn parse_caps(s: &str) -> Result<Capacities, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [p, e] = parts.as_slice() else {
        return Err(format!("expected P,E, got `{s}`"));
    };
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok(Capacities::new(num(p)?, num(e)?))
}

fn parse_axis(s: &str) -> Result<(SweepAxis, Vec<f64>), String> {
    let (name, values) = s.split_once('=').ok_or_else(|| format!("expected name=v1,v2,..., got `{s}`"))?;
    let axis: SweepAxis = name.parse()?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<Result<Vec<f64>, String>>()?;
    Ok((axis, values))
}

/// A failure with the exit status it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::Contract(_) | CoreError::LengthMismatch { .. } | CoreError::Parse { .. } | CoreError::Json(_) => {
                EXIT_USAGE
            }
            CoreError::NotOptimal(LpStatus::Infeasible) => EXIT_INFEASIBLE,
            CoreError::NotOptimal(LpStatus::Unbounded) => EXIT_UNBOUNDED,
            CoreError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_USAGE,
            _ => EXIT_INTERNAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError {
        code: EXIT_INTERNAL,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T> = Result<T, CliError>;

/// Loads the configuration. A missing file at the default path falls back
/// to the built-in calibration.
pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    if path == Path::new("defaults.json") && !path.exists() {
        return Ok(RunConfig::shipped());
    }
    RunConfig::load(path).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    std::env::var_os("ESSKIT_OUT").map_or_else(|| cfg.output_dir.clone(), PathBuf::from)
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e)),
        None => Ok(()),
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    ensure_parent(path)?;
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Runs one parsed command and returns the lines to print.
pub fn run(cli: Cli) -> CliResult<Vec<String>> {
    let cfg = load_config(&cli.config)?;
    match cli.command {
        Command::GenTrace(a) => gen_trace(&cfg, a),
        Command::Optimize(a) => cmd_optimize(&cfg, a),
        Command::Online(a) => cmd_online(&cfg, a),
        Command::Sweep(a) => cmd_sweep(&cfg, a),
    }
}

fn gen_trace(cfg: &RunConfig, a: GenTraceArgs) -> CliResult<Vec<String>> {
    if a.downsample == 0 {
        return Err(CliError::usage("--downsample must be >= 1"));
    }
    let trace = match a.kind {
        Kind::Rsr => {
            let mut p = cfg.generators.rsr_signal;
            p.slots = a.slots.unwrap_or(p.slots);
            p.slot_seconds = a.slot_seconds.unwrap_or(p.slot_seconds);
            p.tau = a.tau.unwrap_or(p.tau);
            p.mean_reversion = a.mean_reversion.unwrap_or(p.mean_reversion);
            p.seed = a.seed.unwrap_or(p.seed);
            downsample(&gen_rsr_signal(&p)?, a.downsample)?.0
        }
        Kind::Power => {
            let mut p = cfg.generators.power_trace;
            p.slots = a.slots.unwrap_or(p.slots);
            p.slot_seconds = a.slot_seconds.unwrap_or(p.slot_seconds);
            p.peak_kw = a.peak_kw.unwrap_or(p.peak_kw);
            p.base_fraction = a.base_fraction.unwrap_or(p.base_fraction);
            p.noise_fraction = a.noise_fraction.unwrap_or(p.noise_fraction);
            p.seed = a.seed.unwrap_or(p.seed);
            downsample(&gen_power_trace(&p)?, a.downsample)?.0
        }
    };
    let name = match a.kind {
        Kind::Rsr => "rsr.csv",
        Kind::Power => "power.csv",
    };
    let path = a.out.unwrap_or_else(|| output_dir(cfg).join(name));
    ensure_parent(&path)?;
    save_csv(&trace, &path)?;
    Ok(vec![format!("wrote {} slots to {}", trace.len(), path.display())])
}

fn load_trace(path: &Path, kind: TraceKind) -> CliResult<esskit_core::Trace> {
    let t = load_csv(path)?;
    if t.kind != kind {
        return Err(CliError::usage(format!("{}: expected a {kind:?} trace", path.display())));
    }
    Ok(t)
}

/// JSON form of a plan; the schedule goes to its own CSV.
#[derive(Serialize)]
struct PlanReport<'a> {
    program: ProgramKind,
    tech: &'a str,
    lp_status: LpStatus,
    caps: Capacities,
    reserve_kw: f64,
    revenue_per_day: f64,
    cost_per_day: f64,
    profit_per_day: f64,
    lp_objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    heuristic: Option<Heuristic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tracked_slots: Option<usize>,
    simultaneous_slots: &'a [usize],
    schedule_csv: String,
}

fn cmd_optimize(cfg: &RunConfig, a: OptimizeArgs) -> CliResult<Vec<String>> {
    let tech = cfg.tech(&a.tech)?;
    let program = ProgramKind::from(a.program);
    if program != ProgramKind::Rsr && (a.rho2.is_some() || a.heuristic.is_some()) {
        return Err(CliError::usage("--rho2 and --heuristic apply to --program rsr only"));
    }
    let mut beta = None;
    let mut tracked = None;
    let spec = match program {
        ProgramKind::Rsr => {
            let signal = match &a.trace {
                Some(p) => load_trace(p, TraceKind::RsrSignal)?,
                None => cfg.rsr_signal()?,
            };
            let mut s = cfg.rsr_spec(signal);
            if let Some(rho2) = a.rho2 {
                s.params.rho2 = rho2;
            }
            if a.fix_caps.is_some() {
                s.params.fixed_caps = a.fix_caps;
            }
            s.params.validate()?;
            if s.params.rho2 < 1.0 {
                let h = a
                    .heuristic
                    .ok_or_else(|| CliError::usage("rho2 < 1 needs --heuristic rand, mincap or fixint"))?;
                tracked = Some(select(h, &s.signal.values, s.params.rho2, a.seed)?);
            }
            beta = Some(s.signal.values.clone());
            ProgramSpec::Rsr(s)
        }
        ProgramKind::Cr => {
            let mut s = cfg.cr_spec();
            if a.fix_caps.is_some() {
                s.fixed_caps = a.fix_caps;
            }
            ProgramSpec::Cr(s)
        }
        ProgramKind::Ps => {
            let trace = match &a.trace {
                Some(p) => load_trace(p, TraceKind::PowerKw)?,
                None => cfg.power_trace()?,
            };
            let mut s = cfg.ps_spec(trace);
            if a.fix_caps.is_some() {
                s.params.fixed_caps = a.fix_caps;
            }
            ProgramSpec::Ps(s)
        }
    };
    let plan: ProgramPlan = optimize(tech, &spec, tracked.as_ref())?;
    let dir = output_dir(cfg);
    let stem = format!("optimize-{program}-{}", a.tech);
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let (rho2, heuristic) = match &spec {
        ProgramSpec::Rsr(s) => (Some(s.params.rho2), tracked.as_ref().and(a.heuristic)),
        _ => (None, None),
    };
    let report = PlanReport {
        program,
        tech: &a.tech,
        lp_status: plan.lp_status,
        caps: plan.caps,
        reserve_kw: plan.reserve,
        revenue_per_day: plan.revenue_per_day,
        cost_per_day: plan.cost_per_day,
        profit_per_day: plan.profit_per_day,
        lp_objective: plan.lp_objective,
        rho2,
        heuristic,
        tracked_slots: tracked.as_ref().map(|t| t.slots.len()),
        simultaneous_slots: &plan.simultaneous_slots,
        schedule_csv: csv_path.file_name().unwrap().to_string_lossy().into_owned(),
    };
    write_file(&csv_path, &plan.schedule.to_csv(beta.as_deref()))?;
    write_file(&json_path, &to_json(&report))?;
    Ok(vec![
        format!(
            "{program} {}: R = {:.3} kW, caps = ({:.3} kW, {:.3} kWh), profit/day = {:.4}",
            a.tech, plan.reserve, plan.caps.p_cap, plan.caps.e_cap, plan.profit_per_day
        ),
        format!("wrote {} and {}", json_path.display(), csv_path.display()),
    ])
}

#[derive(Serialize)]
struct OnlineReport<'a> {
    window_hours: usize,
    rho2: f64,
    caps: Capacities,
    #[serde(flatten)]
    report: &'a HoldoutReport,
    schedule_csv: String,
}

/// Per-slot CSV over all test hours.
fn online_csv(report: &HoldoutReport, signal: &esskit_core::Trace, per_hour: usize) -> String {
    let mut out = String::from("hour,t,beta,r_kw,d_kw,u_kw,e_kwh\n");
    for h in &report.hours {
        let s = &h.schedule;
        for t in 0..s.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                h.hour,
                t + 1,
                signal.values[h.hour * per_hour + t],
                s.charge[t],
                s.discharge[t],
                s.net_power[t],
                s.stored_energy[t + 1]
            );
        }
    }
    out
}

fn cmd_online(cfg: &RunConfig, a: OnlineArgs) -> CliResult<Vec<String>> {
    let tech = cfg.tech(&a.tech)?;
    let caps = cfg.caps(&a.tech)?;
    let policy = a.policy.unwrap_or_else(|| PolicyKind::for_tech(&a.tech));
    let lambda = a.lambda.unwrap_or_else(|| cfg.online.lambda(policy));
    if !(0.0..=1.0).contains(&lambda) {
        return Err(CliError::usage(format!("--lambda must be in [0, 1], got {lambda}")));
    }
    let signal = match &a.trace {
        Some(p) => load_trace(p, TraceKind::RsrSignal)?,
        None => cfg.rsr_signal()?,
    };
    let window_hours = a.window_hours.unwrap_or(cfg.online.window_hours);
    let mut params = cfg.programs.rsr.clone();
    params.rho2 = a.rho2.unwrap_or(cfg.online.rho2);
    let hc = HoldoutConfig {
        window_hours,
        lambda,
        policy,
        seed: a.seed.unwrap_or(cfg.online.seed),
    };
    let report = holdout(&signal, tech, &caps, &params, &hc)?;
    let per_hour = (3600.0 / signal.slot_seconds).round() as usize;
    let dir = output_dir(cfg);
    let csv_path = dir.join(format!("online-{}.csv", a.tech));
    let json_path = dir.join(format!("online-{}.json", a.tech));
    write_file(&csv_path, &online_csv(&report, &signal, per_hour))?;
    let out = OnlineReport {
        window_hours,
        rho2: params.rho2,
        caps,
        report: &report,
        schedule_csv: csv_path.file_name().unwrap().to_string_lossy().into_owned(),
    };
    write_file(&json_path, &to_json(&out))?;
    let n = report.hours.len();
    Ok(vec![
        format!(
            "{} {policy:?} lambda={lambda}: feasible={} {}/{n} hours, violations={}, online/offline revenue {:.2}/{:.2}",
            a.tech,
            report.feasible_hours == n,
            report.feasible_hours,
            report.total_violations,
            report.online_revenue,
            report.offline_revenue
        ),
        format!("wrote {} and {}", json_path.display(), csv_path.display()),
    ])
}

fn cmd_sweep(cfg: &RunConfig, a: SweepArgs) -> CliResult<Vec<String>> {
    if a.axes.len() > 2 {
        return Err(CliError::usage("at most two --axis flags"));
    }
    let tech = cfg.tech(&a.tech)?;
    let program = ProgramKind::from(a.program);
    let mut spec = match program {
        ProgramKind::Rsr => {
            let signal = match &a.trace {
                Some(p) => load_trace(p, TraceKind::RsrSignal)?,
                None => cfg.rsr_signal()?,
            };
            let mut s = cfg.rsr_spec(signal);
            if s.params.rho2 < 1.0 {
                return Err(CliError::usage("sweeps track every slot; set rho2 = 1 in the config"));
            }
            s.params.fixed_caps = a.fix_caps.or(s.params.fixed_caps);
            ProgramSpec::Rsr(s)
        }
        ProgramKind::Cr => {
            let mut s = cfg.cr_spec();
            s.fixed_caps = a.fix_caps.or(s.fixed_caps);
            ProgramSpec::Cr(s)
        }
        ProgramKind::Ps => {
            let trace = match &a.trace {
                Some(p) => load_trace(p, TraceKind::PowerKw)?,
                None => cfg.power_trace()?,
            };
            let mut s = cfg.ps_spec(trace);
            s.params.fixed_caps = a.fix_caps.or(s.params.fixed_caps);
            ProgramSpec::Ps(s)
        }
    };
    if let ProgramSpec::Rsr(s) = &mut spec {
        s.params.validate()?;
    }
    let axis1 = (a.axes[0].0, a.axes[0].1.as_slice());
    let axis2 = a.axes.get(1).map(|(ax, v)| (*ax, v.as_slice()));
    let jobs = a.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError {
            code: EXIT_INTERNAL,
            message: e.to_string(),
        })?;
    let grid = pool.install(|| sweep(tech, &spec, axis1, axis2))?;
    let path = output_dir(cfg).join(format!("sweep-{program}-{}.csv", a.tech));
    write_file(&path, &grid.to_csv())?;
    let failed = grid.cells.iter().flatten().filter(|c| c.profit_per_day.is_none()).count();
    let total = grid.cells.iter().map(Vec::len).sum::<usize>();
    Ok(vec![format!("{total} cells ({failed} failed), wrote {}", path.display())])
}
