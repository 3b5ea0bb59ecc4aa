//! Batch front end for the peakon reduction: simulate single or interacting
//! peakons, classify long-time behaviour, verify stored trajectories against
//! the governing equation, and emit plot-ready CSV demos.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 numerical failure or
//! failed verification, 3 run terminated early by a detected event (partial
//! output is still written).

mod config;
mod demo;
mod output;
mod sweep;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use peakon_core::catalog;
use peakon_core::classify::{classify_numeric, BehaviorReport, ClassifyError, ClassifyOptions};
use peakon_core::multipeakon::{integrate_n, NPeakonState};
use peakon_core::peakon::{integrate_single, PeakonState, SimError, SimOptions, Termination};
use peakon_core::verify::{verify_n_trajectory, verify_trajectory, VerifyThresholds};
use peakon_core::{NonlinearitySpec, ReducedSystem};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::LoadedTrajectory;

#[derive(Parser)]
#[command(
    name = "peakon",
    version,
    about = "Simulate, classify, and verify peakon motions of a reduced wave family"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a single peakon and write a trajectory CSV
    Simulate(SimulateArgs),
    /// Simulate an interacting N-peakon field
    SimulateN(SimulateNArgs),
    /// Classify the long-time amplitude and position behaviour
    Classify(ClassifyArgs),
    /// Check a stored trajectory against the governing equation
    Verify(VerifyArgs),
    /// Construct an equation whose peakon amplitude oscillates harmonically
    DesignBreather(DesignBreatherArgs),
    /// List the built-in equations with closed-form motions
    Catalog(CatalogArgs),
    /// Run a canned demonstration and write plot-ready CSVs
    Demo(DemoArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// INI-style config file; command-line flags override its values
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Nonlinearity f(u, ux)
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
    f: Option<String>,
    /// Nonlinearity g(u, ux)
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
    g: Option<String>,
    /// Named parameter, repeatable: --param k=0.5
    #[arg(long, value_name = "NAME=VALUE")]
    param: Vec<String>,
    /// Initial time
    #[arg(long, value_name = "T", allow_negative_numbers = true)]
    t0: Option<f64>,
    /// Final time; may lie before t0 for backward runs
    #[arg(long, value_name = "T", allow_negative_numbers = true)]
    horizon: Option<f64>,
    /// Uniform output sample spacing
    #[arg(long, value_name = "DT")]
    sample_dt: Option<f64>,
    /// Enable amplitude branch switching at extrema
    #[arg(long)]
    oscillatory: bool,
    /// Primary output path (defaults to stdout)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// JSON report path
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Initial amplitude
    #[arg(long = "init-A", value_name = "A", allow_negative_numbers = true)]
    init_a: Option<f64>,
    /// Initial peak position
    #[arg(long = "init-X", value_name = "X", allow_negative_numbers = true)]
    init_x: Option<f64>,
}

#[derive(Args)]
struct SimulateNArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated initial amplitudes
    #[arg(long = "init-a", value_name = "A1,A2,...", allow_hyphen_values = true)]
    init_a: Option<String>,
    /// Comma-separated initial positions, increasing left to right
    #[arg(long = "init-x", value_name = "X1,X2,...", allow_hyphen_values = true)]
    init_x: Option<String>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Initial amplitude
    #[arg(long = "init-A", value_name = "A", allow_negative_numbers = true)]
    init_a: Option<f64>,
    /// Initial peak position
    #[arg(long = "init-X", value_name = "X", allow_negative_numbers = true)]
    init_x: Option<f64>,
    /// Parameter sweep, e.g. "k=0.5,1,2;lam=1,2"; --out names a directory
    /// for per-job reports and the aggregate goes to --report or stdout
    #[arg(long, value_name = "SPEC")]
    sweep: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Trajectory CSV produced by simulate or simulate-n
    #[arg(value_name = "TRAJECTORY")]
    trajectory: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct DesignBreatherArgs {
    /// Peak amplitude of the oscillation
    #[arg(long, allow_negative_numbers = true)]
    a: f64,
    /// Angular rate of the amplitude oscillation
    #[arg(long, allow_negative_numbers = true)]
    kappa: f64,
    /// Constant propagation speed
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    c: f64,
    /// JSON output path (defaults to stdout)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CatalogArgs {
    /// Entry id; omit to list every entry
    #[arg(value_name = "ID")]
    id: Option<String>,
}

#[derive(Args)]
struct DemoArgs {
    /// Demo name or figure alias
    #[arg(value_name = "NAME")]
    name: String,
    /// Directory for the emitted CSVs
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn numerical(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn sim_failure(err: SimError) -> Failure {
    match err {
        SimError::Invalid(_) => usage(err.to_string()),
        _ => numerical(err.to_string()),
    }
}

fn io_failure(err: std::io::Error) -> Failure {
    usage(format!("io: {err}"))
}

fn termination_code(termination: Termination) -> u8 {
    match termination {
        Termination::HorizonReached => 0,
        Termination::DomainError { .. } => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::SimulateN(args) => cmd_simulate_n(args),
        Cmd::Classify(args) => cmd_classify(args),
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::DesignBreather(args) => cmd_design_breather(args),
        Cmd::Catalog(args) => cmd_catalog(args),
        Cmd::Demo(args) => cmd_demo(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(fail) => {
            eprintln!("error: {}", fail.message);
            ExitCode::from(fail.code)
        }
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn build_config(common: &CommonArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => config::load_config(path)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?,
        None => RunConfig::default(),
    };
    if let Some(f) = &common.f {
        cfg.equation.f = Some(f.clone());
    }
    if let Some(g) = &common.g {
        cfg.equation.g = Some(g.clone());
    }
    for spec in &common.param {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| usage(format!("--param `{spec}` must look like name=value")))?;
        let parsed: f64 = value
            .trim()
            .parse()
            .map_err(|_| usage(format!("--param {name}: `{value}` is not a number")))?;
        cfg.equation.params.insert(name.trim().to_string(), parsed);
    }
    if let Some(t0) = common.t0 {
        cfg.run.t0 = t0;
    }
    if let Some(horizon) = common.horizon {
        cfg.run.horizon = horizon;
    }
    if let Some(dt) = common.sample_dt {
        if !(dt > 0.0) {
            return Err(usage("--sample-dt must be positive"));
        }
        cfg.run.sample_dt = dt;
    }
    if common.oscillatory {
        cfg.run.oscillatory = true;
    }
    Ok(cfg)
}

fn build_system(cfg: &RunConfig) -> Result<ReducedSystem, Failure> {
    let f = cfg
        .equation
        .f
        .as_deref()
        .ok_or_else(|| usage("missing nonlinearity f: pass --f or set f under [equation]"))?;
    let g = cfg
        .equation
        .g
        .as_deref()
        .ok_or_else(|| usage("missing nonlinearity g: pass --g or set g under [equation]"))?;
    let spec = NonlinearitySpec::parse(f, g, cfg.equation.params.clone())
        .map_err(|e| usage(e.to_string()))?;
    Ok(ReducedSystem::new(spec).with_quad_tol(cfg.tolerances.quad_tol))
}

fn sim_options(cfg: &RunConfig) -> SimOptions {
    SimOptions {
        tol: cfg.tolerances.ode_tol,
        sample_dt: cfg.run.sample_dt,
        a_max: cfg.tolerances.a_max,
        eps_ext: cfg.tolerances.eps_ext,
        gap_min: cfg.tolerances.gap_min,
        oscillatory: cfg.run.oscillatory,
        ..SimOptions::default()
    }
}

fn single_init(cfg: &RunConfig) -> Result<PeakonState, Failure> {
    if cfg.run.init_a.len() != 1 {
        return Err(usage(
            "this subcommand takes exactly one initial peakon; use simulate-n for several",
        ));
    }
    Ok(PeakonState::new(cfg.run.t0, cfg.run.init_a[0], cfg.run.init_x[0]))
}

fn out_path(common: &CommonArgs, cfg: &RunConfig) -> Option<PathBuf> {
    common.out.clone().or_else(|| cfg.output.csv_path.clone())
}

fn report_path(common: &CommonArgs, cfg: &RunConfig) -> Option<PathBuf> {
    common.report.clone().or_else(|| cfg.output.report_path.clone())
}

fn parse_list(src: &str, what: &str) -> Result<Vec<f64>, Failure> {
    src.split(',')
        .map(|v| {
            let v = v.trim();
            v.parse::<f64>()
                .map_err(|_| usage(format!("{what}: `{v}` is not a number")))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_simulate(args: SimulateArgs) -> Result<u8, Failure> {
    let mut cfg = build_config(&args.common)?;
    if let Some(a) = args.init_a {
        cfg.run.init_a = vec![a];
    }
    if let Some(x) = args.init_x {
        cfg.run.init_x = vec![x];
    }
    let sys = build_system(&cfg)?;
    let init = single_init(&cfg)?;
    let traj = integrate_single(&sys, init, cfg.run.horizon, &sim_options(&cfg))
        .map_err(sim_failure)?;
    let csv = output::trajectory_csv(&cfg, &traj);
    output::emit(out_path(&args.common, &cfg).as_deref(), &csv).map_err(io_failure)?;
    if let Some(path) = report_path(&args.common, &cfg) {
        let last = traj.samples.last().expect("trajectories keep at least one sample");
        let report = output::SimReport {
            tool: output::TOOL,
            f: cfg.equation.f.as_deref().unwrap_or(""),
            g: cfg.equation.g.as_deref().unwrap_or(""),
            params: &cfg.equation.params,
            termination: traj.termination,
            events: &traj.events,
            samples: traj.samples.len(),
            end: output::EndState { t: last.t, a: vec![last.a], x: vec![last.x] },
            stats: traj.stats.into(),
        };
        output::emit(Some(&path), &output::to_json(&report)).map_err(io_failure)?;
    }
    Ok(termination_code(traj.termination))
}

fn cmd_simulate_n(args: SimulateNArgs) -> Result<u8, Failure> {
    let mut cfg = build_config(&args.common)?;
    if let Some(list) = &args.init_a {
        cfg.run.init_a = parse_list(list, "--init-a")?;
    }
    if let Some(list) = &args.init_x {
        cfg.run.init_x = parse_list(list, "--init-x")?;
    }
    if cfg.run.init_a.len() != cfg.run.init_x.len() {
        return Err(usage("--init-a and --init-x must list the same number of peakons"));
    }
    let sys = build_system(&cfg)?;
    let init = NPeakonState::new(cfg.run.t0, cfg.run.init_a.clone(), cfg.run.init_x.clone())
        .map_err(sim_failure)?;
    let traj =
        integrate_n(&sys, &init, cfg.run.horizon, &sim_options(&cfg)).map_err(sim_failure)?;
    let csv = output::n_trajectory_csv(&cfg, &traj);
    output::emit(out_path(&args.common, &cfg).as_deref(), &csv).map_err(io_failure)?;
    if let Some(path) = report_path(&args.common, &cfg) {
        let last = traj.samples.last().expect("trajectories keep at least one sample");
        let report = output::SimReport {
            tool: output::TOOL,
            f: cfg.equation.f.as_deref().unwrap_or(""),
            g: cfg.equation.g.as_deref().unwrap_or(""),
            params: &cfg.equation.params,
            termination: traj.termination,
            events: &traj.events,
            samples: traj.samples.len(),
            end: output::EndState { t: last.t, a: last.a.clone(), x: last.x.clone() },
            stats: traj.stats.into(),
        };
        output::emit(Some(&path), &output::to_json(&report)).map_err(io_failure)?;
    }
    Ok(termination_code(traj.termination))
}

fn classify_one(cfg: &RunConfig, sys: &ReducedSystem) -> Result<BehaviorReport, Failure> {
    let opts = ClassifyOptions { sim: sim_options(cfg), ..ClassifyOptions::default() };
    let init = single_init(cfg)?;
    classify_numeric(sys, init, cfg.run.horizon, &opts).map_err(|e| match &e {
        ClassifyError::Invalid(_) | ClassifyError::Sim(SimError::Invalid(_)) => {
            usage(e.to_string())
        }
        _ => numerical(e.to_string()),
    })
}

#[derive(Serialize)]
struct SweepRow {
    label: String,
    params: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<BehaviorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_classify(args: ClassifyArgs) -> Result<u8, Failure> {
    let mut cfg = build_config(&args.common)?;
    if let Some(a) = args.init_a {
        cfg.run.init_a = vec![a];
    }
    if let Some(x) = args.init_x {
        cfg.run.init_x = vec![x];
    }
    if let Some(spec) = &args.sweep {
        return cmd_sweep(&args.common, &cfg, spec);
    }
    let sys = build_system(&cfg)?;
    let report = classify_one(&cfg, &sys)?;
    let path = args
        .common
        .out
        .clone()
        .or_else(|| report_path(&args.common, &cfg));
    output::emit(path.as_deref(), &output::to_json(&report)).map_err(io_failure)?;
    Ok(0)
}

/// Classifies every point of the parameter grid on a bounded worker pool.
/// Individual job failures land in the aggregate as error rows; the sweep
/// itself succeeds so one bad corner cannot hide the rest of the grid.
fn cmd_sweep(common: &CommonArgs, cfg: &RunConfig, spec: &str) -> Result<u8, Failure> {
    let axes = sweep::parse_sweep(spec).map_err(usage)?;
    let jobs = sweep::jobs(&axes);
    let rows = sweep::run_parallel(&jobs, |_, job| {
        let mut job_cfg = cfg.clone();
        for (name, value) in job {
            job_cfg.equation.params.insert(name.clone(), *value);
        }
        let outcome = build_system(&job_cfg).and_then(|sys| classify_one(&job_cfg, &sys));
        let mut row = SweepRow {
            label: sweep::label(job),
            params: job.iter().cloned().collect(),
            report: None,
            error: None,
        };
        match outcome {
            Ok(report) => row.report = Some(report),
            Err(fail) => row.error = Some(fail.message),
        }
        row
    });
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir).map_err(io_failure)?;
        for row in &rows {
            let path = dir.join(format!("{}.json", row.label));
            fs::write(&path, output::to_json(row)).map_err(io_failure)?;
        }
    }
    output::emit(common.report.as_deref(), &output::to_json(&rows)).map_err(io_failure)?;
    Ok(0)
}

fn cmd_verify(args: VerifyArgs) -> Result<u8, Failure> {
    let cfg = build_config(&args.common)?;
    let sys = build_system(&cfg)?;
    let text = fs::read_to_string(&args.trajectory)
        .map_err(|e| usage(format!("{}: {e}", args.trajectory.display())))?;
    let loaded = output::read_trajectory_csv(&text)
        .map_err(|e| usage(format!("{}: {e}", args.trajectory.display())))?;
    let thr = VerifyThresholds::default();
    let report = match &loaded {
        LoadedTrajectory::Single(traj) => verify_trajectory(&sys, traj, &thr),
        LoadedTrajectory::Many(traj) => verify_n_trajectory(&sys, traj, &thr),
    }
    .map_err(|e| numerical(e.to_string()))?;
    output::emit(report_path(&args.common, &cfg).as_deref(), &output::to_json(&report))
        .map_err(io_failure)?;
    Ok(if report.all_pass() { 0 } else { 2 })
}

#[derive(Serialize)]
struct DesignReport {
    tool: &'static str,
    f: String,
    g: String,
    params: BTreeMap<String, f64>,
}

fn cmd_design_breather(args: DesignBreatherArgs) -> Result<u8, Failure> {
    let spec = catalog::design_breather(args.a, args.kappa, args.c)
        .map_err(|e| usage(e.to_string()))?;
    let report = DesignReport {
        tool: output::TOOL,
        f: spec.f.to_string(),
        g: spec.g.to_string(),
        params: spec.params.clone(),
    };
    output::emit(args.out.as_deref(), &output::to_json(&report)).map_err(io_failure)?;
    Ok(0)
}

fn cmd_catalog(args: CatalogArgs) -> Result<u8, Failure> {
    match &args.id {
        Some(id) => {
            let entry = catalog::find(id).ok_or_else(|| {
                usage(format!("unknown catalog entry `{id}`; run `peakon catalog` to list them"))
            })?;
            let mut text = String::new();
            let _ = writeln!(text, "{}", entry.id);
            let _ = writeln!(text, "  {}", entry.summary);
            let _ = writeln!(text, "  f = {}", entry.f_src);
            let _ = writeln!(text, "  g = {}", entry.g_src);
            let pairs: Vec<String> =
                entry.params.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            let _ = writeln!(text, "  params: {}", pairs.join(", "));
            let _ = writeln!(
                text,
                "  window: [{}, {}]  oscillatory: {}",
                entry.suggested_start, entry.suggested_end, entry.oscillatory
            );
            print!("{text}");
        }
        None => {
            for entry in catalog::entries() {
                println!("{:<18} {}", entry.id, entry.summary);
            }
        }
    }
    Ok(0)
}

fn cmd_demo(args: DemoArgs) -> Result<u8, Failure> {
    let Some(demo) = demo::find(&args.name) else {
        return Err(usage(format!("unknown demo `{}`\n{}", args.name, demo::listing())));
    };
    fs::create_dir_all(&args.out_dir).map_err(io_failure)?;
    let (_cfg, traj, traj_path, surf_path) =
        demo::run(demo, &args.out_dir).map_err(numerical)?;
    println!("wrote {}", traj_path.display());
    println!("wrote {}", surf_path.display());
    Ok(termination_code(traj.termination))
}
