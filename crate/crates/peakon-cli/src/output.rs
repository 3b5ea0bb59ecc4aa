//! Deterministic CSV and JSON emitters, and the CSV reader used by the
//! verify subcommand. All numbers print via the shortest round-trip form,
//! so identical runs produce byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use peakon_core::multipeakon::NTrajectory;
use peakon_core::ode::OdeStats;
use peakon_core::peakon::{EventRecord, Sample, Termination, Trajectory};
use peakon_core::verify;
use serde::Serialize;

use crate::config::RunConfig;

pub const TOOL: &str = concat!("peakon ", env!("CARGO_PKG_VERSION"));

/// The `#`-prefixed run-metadata block at the top of every CSV.
pub fn write_run_header(out: &mut String, cfg: &RunConfig) {
    let _ = writeln!(out, "# {TOOL}");
    let _ = writeln!(out, "# f = {}", cfg.equation.f.as_deref().unwrap_or(""));
    let _ = writeln!(out, "# g = {}", cfg.equation.g.as_deref().unwrap_or(""));
    if cfg.equation.params.is_empty() {
        let _ = writeln!(out, "# params: none");
    } else {
        let pairs: Vec<String> =
            cfg.equation.params.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        let _ = writeln!(out, "# params: {}", pairs.join(", "));
    }
    let _ = writeln!(
        out,
        "# run: t0 = {}, horizon = {}, sample_dt = {}, oscillatory = {}",
        cfg.run.t0, cfg.run.horizon, cfg.run.sample_dt, cfg.run.oscillatory
    );
    let t = &cfg.tolerances;
    let _ = writeln!(
        out,
        "# tolerances: quad_tol = {:e}, ode_tol = {:e}, eps_ext = {:e}, a_max = {:e}, gap_min = {:e}",
        t.quad_tol, t.ode_tol, t.eps_ext, t.a_max, t.gap_min
    );
}

/// Single-peakon trajectory CSV: `t,A,X,Xdot,Xddot,M,H1`.
pub fn trajectory_csv(cfg: &RunConfig, traj: &Trajectory) -> String {
    let mut out = String::new();
    write_run_header(&mut out, cfg);
    out.push_str("t,A,X,Xdot,Xddot,M,H1\n");
    for s in &traj.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.t,
            s.a,
            s.x,
            s.xdot,
            s.xddot,
            2.0 * s.a,
            2.0 * s.a * s.a
        );
    }
    out
}

/// N-peakon trajectory CSV: `t,a_1..a_N,x_1..x_N,M,H1`.
pub fn n_trajectory_csv(cfg: &RunConfig, traj: &NTrajectory) -> String {
    let n = traj.samples.first().map_or(0, |s| s.a.len());
    let mut out = String::new();
    write_run_header(&mut out, cfg);
    out.push('t');
    for i in 1..=n {
        let _ = write!(out, ",a_{i}");
    }
    for i in 1..=n {
        let _ = write!(out, ",x_{i}");
    }
    out.push_str(",M,H1\n");
    for s in &traj.samples {
        let _ = write!(out, "{}", s.t);
        for a in &s.a {
            let _ = write!(out, ",{a}");
        }
        for x in &s.x {
            let _ = write!(out, ",{x}");
        }
        let h1 = verify::h1_energy(&s.a, &s.x).expect("samples store matching lengths");
        let _ = writeln!(out, ",{},{}", verify::mass(&s.a), h1);
    }
    out
}

/// Gnuplot-ready field samples: `t,x,u` rows on a fixed space grid, one
/// block of rows per retained sample time.
pub fn surface_csv(cfg: &RunConfig, traj: &Trajectory) -> String {
    let mut out = String::new();
    write_run_header(&mut out, cfg);
    out.push_str("t,x,u\n");
    if traj.samples.is_empty() {
        return out;
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &traj.samples {
        lo = lo.min(s.x);
        hi = hi.max(s.x);
    }
    let (lo, hi) = (lo - 6.0, hi + 6.0);
    let cols = 240usize;
    let stride = traj.samples.len().div_ceil(80).max(1);
    for s in traj.samples.iter().step_by(stride) {
        for j in 0..=cols {
            let x = lo + (hi - lo) * j as f64 / cols as f64;
            let u = s.a * (-(x - s.x).abs()).exp();
            let _ = writeln!(out, "{},{},{}", s.t, x, u);
        }
    }
    out
}

#[derive(Serialize)]
pub struct StatsReport {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl From<OdeStats> for StatsReport {
    fn from(s: OdeStats) -> Self {
        StatsReport { accepted: s.accepted, rejected: s.rejected, rhs_evals: s.rhs_evals }
    }
}

#[derive(Serialize)]
pub struct EndState {
    pub t: f64,
    pub a: Vec<f64>,
    pub x: Vec<f64>,
}

/// JSON run report shared by simulate and simulate-n.
#[derive(Serialize)]
pub struct SimReport<'a> {
    pub tool: &'static str,
    pub f: &'a str,
    pub g: &'a str,
    pub params: &'a BTreeMap<String, f64>,
    pub termination: Termination,
    pub events: &'a [EventRecord],
    pub samples: usize,
    pub end: EndState,
    pub stats: StatsReport,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

/// Writes to the path, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, content: &str) -> io::Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, content)
        }
        None => io::stdout().write_all(content.as_bytes()),
    }
}

// ---------------------------------------------------------------------------
// Reading trajectories back
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum LoadedTrajectory {
    Single(Trajectory),
    Many(NTrajectory),
}

/// Reads a trajectory CSV produced by this tool (comment lines ignored).
/// The header decides the format: `t,A,...` or `t,a_1,...`.
pub fn read_trajectory_csv(text: &str) -> Result<LoadedTrajectory, String> {
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, header) = rows.next().ok_or("empty trajectory file")?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") {
        return Err(format!("unrecognized header `{header}`"));
    }
    let field = |no: usize, parts: &[&str], j: usize| -> Result<f64, String> {
        parts
            .get(j)
            .ok_or_else(|| format!("line {no}: expected {} columns", cols.len()))?
            .parse()
            .map_err(|_| format!("line {no}: invalid number `{}`", parts[j]))
    };
    if cols.get(1) == Some(&"A") {
        let mut samples = Vec::new();
        for (no, line) in rows {
            let parts: Vec<&str> = line.split(',').collect();
            samples.push(Sample {
                t: field(no, &parts, 0)?,
                a: field(no, &parts, 1)?,
                x: field(no, &parts, 2)?,
                xdot: field(no, &parts, 3)?,
                xddot: field(no, &parts, 4)?,
            });
        }
        if samples.is_empty() {
            return Err("trajectory has no samples".to_string());
        }
        return Ok(LoadedTrajectory::Single(Trajectory {
            samples,
            events: Vec::new(),
            termination: Termination::HorizonReached,
            stats: OdeStats::default(),
        }));
    }
    let n = cols.iter().filter(|c| c.starts_with("a_")).count();
    if n == 0 || cols.len() != 2 * n + 3 {
        return Err(format!("unrecognized header `{header}`"));
    }
    let mut samples = Vec::new();
    for (no, line) in rows {
        let parts: Vec<&str> = line.split(',').collect();
        let t = field(no, &parts, 0)?;
        let mut a = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        for i in 0..n {
            a.push(field(no, &parts, 1 + i)?);
            x.push(field(no, &parts, 1 + n + i)?);
        }
        samples.push(peakon_core::multipeakon::NSample { t, a, x });
    }
    if samples.is_empty() {
        return Err("trajectory has no samples".to_string());
    }
    Ok(LoadedTrajectory::Many(NTrajectory {
        samples,
        events: Vec::new(),
        termination: Termination::HorizonReached,
        stats: OdeStats::default(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use peakon_core::peakon::{integrate_single, PeakonState, SimOptions};
    use peakon_core::{NonlinearitySpec, ReducedSystem};

    fn ch_run() -> (RunConfig, Trajectory) {
        let mut cfg = RunConfig::default();
        cfg.equation.f = Some("ux".to_string());
        cfg.equation.g = Some("u".to_string());
        cfg.run.horizon = 1.0;
        cfg.run.sample_dt = 0.25;
        let spec =
            NonlinearitySpec::parse("ux", "u", BTreeMap::new()).unwrap();
        let sys = ReducedSystem::new(spec);
        let opts = SimOptions { sample_dt: 0.25, ..SimOptions::default() };
        let traj = integrate_single(&sys, PeakonState::new(0.0, 1.0, 0.0), 1.0, &opts).unwrap();
        (cfg, traj)
    }

    #[test]
    fn csv_round_trips_through_the_reader() {
        let (cfg, traj) = ch_run();
        let text = trajectory_csv(&cfg, &traj);
        assert!(text.starts_with(&format!("# {TOOL}\n# f = ux\n# g = u\n")));
        assert!(text.contains("t,A,X,Xdot,Xddot,M,H1\n"));
        let LoadedTrajectory::Single(back) = read_trajectory_csv(&text).unwrap() else {
            panic!("expected the single-peakon format");
        };
        assert_eq!(back.samples.len(), traj.samples.len());
        for (a, b) in back.samples.iter().zip(&traj.samples) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.a.to_bits(), b.a.to_bits());
            assert_eq!(a.x.to_bits(), b.x.to_bits());
        }
    }

    #[test]
    fn identical_runs_emit_identical_bytes() {
        let (cfg1, t1) = ch_run();
        let (cfg2, t2) = ch_run();
        assert_eq!(trajectory_csv(&cfg1, &t1), trajectory_csv(&cfg2, &t2));
        assert_eq!(surface_csv(&cfg1, &t1), surface_csv(&cfg2, &t2));
    }

    #[test]
    fn reader_rejects_malformed_rows() {
        assert!(read_trajectory_csv("").is_err());
        assert!(read_trajectory_csv("x,y\n1,2\n").is_err());
        let err = read_trajectory_csv("t,A,X,Xdot,Xddot,M,H1\n0,1,bad,0,0,2,2\n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn n_format_header_indexes_every_peakon() {
        let text = "t,a_1,a_2,x_1,x_2,M,H1\n0,1,0.5,-2,2,3,2.527\n";
        let LoadedTrajectory::Many(traj) = read_trajectory_csv(text).unwrap() else {
            panic!("expected the n-peakon format");
        };
        assert_eq!(traj.samples[0].a, vec![1.0, 0.5]);
        assert_eq!(traj.samples[0].x, vec![-2.0, 2.0]);
    }
}
