//! Canned demonstration runs: each demo picks a catalog entry, simulates
//! it over its suggested window, and writes a trajectory CSV plus a
//! plot-ready `t,x,u` surface CSV.

use std::path::{Path, PathBuf};

use peakon_core::catalog;
use peakon_core::peakon::{integrate_single, SimOptions, Trajectory};

use crate::config::RunConfig;
use crate::output;

pub struct Demo {
    pub name: &'static str,
    pub alias: &'static str,
    pub entry_id: &'static str,
}

pub const DEMOS: &[Demo] = &[
    Demo { name: "asymptotic", alias: "fig1", entry_id: "asymptotic-ex2" },
    Demo { name: "reversal", alias: "fig2", entry_id: "reversing-ex3" },
    Demo { name: "dissipating", alias: "fig3", entry_id: "dissipating-ex5" },
    Demo { name: "blowup", alias: "fig4", entry_id: "blowup-ex5" },
    Demo { name: "breather", alias: "fig5", entry_id: "breather" },
];

pub fn find(name: &str) -> Option<&'static Demo> {
    DEMOS.iter().find(|d| d.name == name || d.alias == name)
}

pub fn listing() -> String {
    let mut out = String::from("available demos:\n");
    for d in DEMOS {
        out.push_str(&format!("  {:<12} (alias {})  runs catalog entry {}\n", d.name, d.alias, d.entry_id));
    }
    out
}

/// Simulates the demo and returns the run config (for the CSV run header), the
/// trajectory, and the two output paths under `out_dir`.
pub fn run(demo: &Demo, out_dir: &Path) -> Result<(RunConfig, Trajectory, PathBuf, PathBuf), String> {
    let entry = catalog::find(demo.entry_id).ok_or("catalog entry missing")?;
    let sys = entry.system().map_err(|e| e.to_string())?;
    let init = entry.suggested_init().map_err(|e| e.to_string())?;

    let mut cfg = RunConfig::default();
    cfg.equation.f = Some(entry.f_src.to_string());
    cfg.equation.g = Some(entry.g_src.to_string());
    cfg.equation.params = entry.params.clone();
    cfg.run.t0 = entry.suggested_start;
    cfg.run.horizon = entry.suggested_end;
    cfg.run.oscillatory = entry.oscillatory;
    cfg.run.sample_dt = ((entry.suggested_end - entry.suggested_start) / 400.0).max(1e-3);

    let opts = SimOptions {
        sample_dt: cfg.run.sample_dt,
        oscillatory: entry.oscillatory,
        ..SimOptions::default()
    };
    let traj = integrate_single(&sys, init, entry.suggested_end, &opts)
        .map_err(|e| format!("{e:?}"))?;

    let traj_path = out_dir.join(format!("{}-trajectory.csv", demo.name));
    let surf_path = out_dir.join(format!("{}-surface.csv", demo.name));
    output::emit(Some(&traj_path), &output::trajectory_csv(&cfg, &traj))
        .map_err(|e| e.to_string())?;
    output::emit(Some(&surf_path), &output::surface_csv(&cfg, &traj))
        .map_err(|e| e.to_string())?;
    Ok((cfg, traj, traj_path, surf_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_demo_references_a_real_entry() {
        for d in DEMOS {
            assert!(catalog::find(d.entry_id).is_some(), "{} missing", d.entry_id);
        }
    }

    #[test]
    fn aliases_resolve() {
        assert_eq!(find("fig2").unwrap().name, "reversal");
        assert_eq!(find("breather").unwrap().alias, "fig5");
        assert!(find("fig9").is_none());
    }
}
