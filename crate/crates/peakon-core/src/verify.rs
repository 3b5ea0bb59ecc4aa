//! Trajectory verification against the structural identities of the peakon
//! reduction: ODE residuals at the peak, the momentum and H1 functionals, and
//! the off-peak field identity `u = u_xx`.
//!
//! The peak position and amplitude carry all of the dynamics, so verification
//! splits into two finite-difference checks. [`ode_residual`] differences the
//! sampled `A(t)`, `X(t)` columns with a 4th-order stencil and compares
//! against `-A f0(A)` and `g0(A)`; [`offpeak_residual`] reconstructs
//! `u(x) = sum_j a_j exp(-|x - x_j|)` on a grid away from every peak and
//! checks `u - u_xx = 0` with a 2nd-order stencil. Both residuals inherit the
//! truncation error of their stencils, so thresholds must scale with the step
//! sizes used; [`VerifyThresholds::default`] matches the default sample
//! spacing of 0.01 and grid spacing of 1e-3 at states of order one, at a
//! comfortable distance from any blow-up or contact time.

use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::multipeakon::{rhs_n, NPeakonState, NTrajectory};
use crate::peakon::Trajectory;
use crate::reduce::{ReducedDynamics, ReducedSystem};

#[derive(Debug, Clone, PartialEq)]
pub enum VerifyError {
    /// Fewer uniformly spaced samples than the difference stencil needs.
    TooFewSamples { len: usize },
    /// The spatial grid is not uniformly increasing.
    NonUniformGrid,
    /// A grid point sits too close to a peak for the stencil to be valid.
    PeakOnGrid { x: f64 },
    /// Amplitude and position slices disagree in length.
    MismatchedLengths { a: usize, x: usize },
    /// The reduced functions failed at every interior sample.
    NoProbes,
    Invalid(&'static str),
}

impl fmt::Display for VerifyError {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyError::TooFewSamples { len } => {
                write!(out, "need at least 5 uniform samples, found {len}")
            }
            VerifyError::NonUniformGrid => out.write_str("grid must be uniform and increasing"),
            VerifyError::PeakOnGrid { x } => {
                write!(out, "grid point {x} is too close to a peak")
            }
            VerifyError::MismatchedLengths { a, x } => {
                write!(out, "amplitude and position counts differ: {a} vs {x}")
            }
            VerifyError::NoProbes => {
                out.write_str("reduced functions failed at every interior sample")
            }
            VerifyError::Invalid(msg) => out.write_str(msg),
        }
    }
}

impl core::error::Error for VerifyError {}

// ---------------------------------------------------------------------------
// Functionals
// ---------------------------------------------------------------------------

/// Momentum `M = integral of m = 2 sum_i a_i`.
pub fn mass(a: &[f64]) -> f64 {
    2.0 * a.iter().sum::<f64>()
}

/// Squared H1 norm `integral of u^2 + u_x^2 = 2 sum_ij a_i a_j e^(-|x_i - x_j|)`.
pub fn h1_energy(a: &[f64], x: &[f64]) -> Result<f64, VerifyError> {
    if a.len() != x.len() {
        return Err(VerifyError::MismatchedLengths { a: a.len(), x: x.len() });
    }
    let mut total = 0.0;
    for i in 0..a.len() {
        for j in i..a.len() {
            let term = a[i] * a[j] * math::exp(-(x[i] - x[j]).abs());
            total += if i == j { term } else { 2.0 * term };
        }
    }
    Ok(2.0 * total)
}

/// One functional sample along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FunctionalSample {
    pub t: f64,
    pub m: f64,
    pub h1: f64,
}

/// Time series of `(M, H1)` along a single-peakon trajectory: `M = 2A` and
/// `H1 = 2A^2`.
pub fn functionals(traj: &Trajectory) -> Vec<FunctionalSample> {
    traj.samples
        .iter()
        .map(|s| FunctionalSample { t: s.t, m: 2.0 * s.a, h1: 2.0 * s.a * s.a })
        .collect()
}

/// Time series of `(M, H1)` along an N-peakon trajectory.
pub fn functionals_n(traj: &NTrajectory) -> Vec<FunctionalSample> {
    traj.samples
        .iter()
        .map(|s| FunctionalSample {
            t: s.t,
            m: mass(&s.a),
            h1: h1_energy(&s.a, &s.x).expect("samples store equal-length slices"),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// ODE residual
// ---------------------------------------------------------------------------

/// Sample index range (inclusive) of the longest uniformly spaced run, with
/// its spacing. Trajectories append the exact final state off the uniform
/// grid, so one short gap at either end is expected.
fn longest_uniform_run(ts: &[f64]) -> (usize, usize, f64) {
    let n = ts.len();
    if n < 2 {
        return (0, 0, 0.0);
    }
    let gap = |j: usize| ts[j + 1] - ts[j];
    let mut best = (0usize, 0usize);
    let mut run = 0usize;
    for j in 1..n - 1 {
        if (gap(j) - gap(run)).abs() > 1e-9 * gap(run).abs().max(1e-12) {
            if j - 1 - run > best.1 - best.0 {
                best = (run, j - 1);
            }
            run = j;
        }
    }
    if n - 2 - run > best.1 - best.0 {
        best = (run, n - 2);
    }
    (best.0, best.1 + 1, gap(best.0))
}

/// Worst residual of the reduced ODEs along the trajectory samples, using a
/// 4th-order central difference in time on the longest uniform sample run.
///
/// The amplitude residual accepts either sign of the decay rate so that
/// branch-switched (oscillatory) trajectories verify cleanly; the position
/// residual is `|dX/dt - g0(A)|`. Samples where the reduced functions fail
/// are skipped. The result scales like `dt^4` times the fifth derivative of
/// the state, so it is only meaningful away from blow-up or contact times.
pub fn ode_residual(
    sys: &dyn ReducedDynamics,
    traj: &Trajectory,
) -> Result<f64, VerifyError> {
    let s = &traj.samples;
    let (lo, hi, h) = longest_uniform_run(&ts_of(s));
    if hi - lo + 1 < 5 {
        return Err(VerifyError::TooFewSamples { len: hi - lo + 1 });
    }
    let mut worst = 0.0f64;
    let mut probed = 0usize;
    for i in lo + 2..=hi - 2 {
        let da = (s[i - 2].a - 8.0 * s[i - 1].a + 8.0 * s[i + 1].a - s[i + 2].a) / (12.0 * h);
        let dx = (s[i - 2].x - 8.0 * s[i - 1].x + 8.0 * s[i + 1].x - s[i + 2].x) / (12.0 * h);
        let (Ok(f0), Ok(g0)) = (sys.f0(s[i].a), sys.g0(s[i].a)) else {
            continue;
        };
        let rate = s[i].a * f0;
        let ra = (da + rate).abs().min((da - rate).abs());
        let rx = (dx - g0).abs();
        worst = worst.max(ra).max(rx);
        probed += 1;
    }
    if probed == 0 {
        return Err(VerifyError::NoProbes);
    }
    Ok(worst)
}

fn ts_of(samples: &[crate::peakon::Sample]) -> Vec<f64> {
    samples.iter().map(|s| s.t).collect()
}

/// N-peakon counterpart of [`ode_residual`]: worst component residual of the
/// sampled `a_i(t)`, `x_i(t)` against the coupled right-hand side.
pub fn ode_residual_n(sys: &ReducedSystem, traj: &NTrajectory) -> Result<f64, VerifyError> {
    let s = &traj.samples;
    let ts: Vec<f64> = s.iter().map(|r| r.t).collect();
    let (lo, hi, h) = longest_uniform_run(&ts);
    if hi - lo + 1 < 5 {
        return Err(VerifyError::TooFewSamples { len: hi - lo + 1 });
    }
    let n = s[0].a.len();
    let mut adot = alloc::vec![0.0; n];
    let mut xdot = alloc::vec![0.0; n];
    let mut worst = 0.0f64;
    let mut probed = 0usize;
    for i in lo + 2..=hi - 2 {
        let state = NPeakonState { t: s[i].t, a: s[i].a.clone(), x: s[i].x.clone() };
        if rhs_n(sys, &state, &mut adot, &mut xdot).is_err() {
            continue;
        }
        for k in 0..n {
            let da = (s[i - 2].a[k] - 8.0 * s[i - 1].a[k] + 8.0 * s[i + 1].a[k]
                - s[i + 2].a[k])
                / (12.0 * h);
            let dx = (s[i - 2].x[k] - 8.0 * s[i - 1].x[k] + 8.0 * s[i + 1].x[k]
                - s[i + 2].x[k])
                / (12.0 * h);
            worst = worst.max((da - adot[k]).abs()).max((dx - xdot[k]).abs());
        }
        probed += 1;
    }
    if probed == 0 {
        return Err(VerifyError::NoProbes);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Off-peak residual
// ---------------------------------------------------------------------------

/// Worst violation of `u = u_xx` for the reconstructed field
/// `u(x) = sum_j a_j exp(-|x - x_j|)` at the interior points of a uniform
/// grid, using the 2nd-order second-difference stencil.
///
/// Away from the peaks the field is a combination of exponentials satisfying
/// `u = u_xx` exactly, so the residual is pure truncation error and shrinks
/// like `h^2`. Every grid point must keep a distance of at least
/// `max(h, 0.01)` from every peak; a violation returns
/// [`VerifyError::PeakOnGrid`] because the stencil would straddle the kink.
pub fn offpeak_residual(a: &[f64], x: &[f64], grid: &[f64]) -> Result<f64, VerifyError> {
    if a.len() != x.len() {
        return Err(VerifyError::MismatchedLengths { a: a.len(), x: x.len() });
    }
    if a.is_empty() {
        return Err(VerifyError::Invalid("at least one peakon is required"));
    }
    if grid.len() < 3 {
        return Err(VerifyError::Invalid("grid needs at least 3 points"));
    }
    let h = grid[1] - grid[0];
    if !(h > 0.0) {
        return Err(VerifyError::NonUniformGrid);
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
            return Err(VerifyError::NonUniformGrid);
        }
    }
    let guard = h.max(0.01);
    for &g in grid {
        if x.iter().any(|&peak| (g - peak).abs() < guard) {
            return Err(VerifyError::PeakOnGrid { x: g });
        }
    }
    let u: Vec<f64> = grid
        .iter()
        .map(|&g| {
            a.iter().zip(x).map(|(&aj, &xj)| aj * math::exp(-(g - xj).abs())).sum::<f64>()
        })
        .collect();
    let mut worst = 0.0f64;
    for i in 1..u.len() - 1 {
        let uxx = (u[i - 1] - 2.0 * u[i] + u[i + 1]) / (h * h);
        worst = worst.max((u[i] - uxx).abs());
    }
    Ok(worst)
}

/// Uniform grid of `n >= 2` points spanning `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return alloc::vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + h * i as f64).collect()
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CheckResult {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FunctionalDrift {
    pub m: f64,
    pub h1: f64,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct VerificationReport {
    pub max_ode_residual: f64,
    pub functional_drift: FunctionalDrift,
    pub offpeak_residual: f64,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Residual and drift thresholds entering the pass/fail rows of a
/// [`VerificationReport`]. Drift thresholds assert conservation and only
/// make sense for systems that conserve the corresponding functional;
/// failing rows witness the violation rather than an implementation error.
#[derive(Debug, Clone, Copy)]
pub struct VerifyThresholds {
    pub ode_residual: f64,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub offpeak_residual: f64,
}

impl Default for VerifyThresholds {
    fn default() -> Self {
        VerifyThresholds {
            ode_residual: 1e-5,
            mass_drift: 1e-8,
            energy_drift: 1e-6,
            offpeak_residual: 1e-5,
        }
    }
}

fn drift_of(series: &[FunctionalSample]) -> FunctionalDrift {
    let first = series.first().copied().unwrap_or(FunctionalSample {
        t: 0.0,
        m: 0.0,
        h1: 0.0,
    });
    let mut drift = FunctionalDrift { m: 0.0, h1: 0.0 };
    for s in series {
        drift.m = drift.m.max((s.m - first.m).abs());
        drift.h1 = drift.h1.max((s.h1 - first.h1).abs());
    }
    drift
}

fn check_rows(
    ode: f64,
    drift: FunctionalDrift,
    offpeak: f64,
    thr: &VerifyThresholds,
) -> Vec<CheckResult> {
    alloc::vec![
        CheckResult {
            name: "ode-residual",
            value: ode,
            threshold: thr.ode_residual,
            pass: ode <= thr.ode_residual,
        },
        CheckResult {
            name: "mass-drift",
            value: drift.m,
            threshold: thr.mass_drift,
            pass: drift.m <= thr.mass_drift,
        },
        CheckResult {
            name: "energy-drift",
            value: drift.h1,
            threshold: thr.energy_drift,
            pass: drift.h1 <= thr.energy_drift,
        },
        CheckResult {
            name: "offpeak-residual",
            value: offpeak,
            threshold: thr.offpeak_residual,
            pass: offpeak <= thr.offpeak_residual,
        },
    ]
}

/// Offset window one unit to the right of the rightmost peak, sampled at
/// spacing 1e-3, matching the default off-peak threshold.
fn default_offpeak_grid(peaks: &[f64]) -> Vec<f64> {
    let edge = peaks.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    uniform_grid(edge + 1.0, edge + 5.0, 4001)
}

/// Runs every check against a single-peakon trajectory.
pub fn verify_trajectory(
    sys: &dyn ReducedDynamics,
    traj: &Trajectory,
    thr: &VerifyThresholds,
) -> Result<VerificationReport, VerifyError> {
    let ode = ode_residual(sys, traj)?;
    let series = functionals(traj);
    let drift = drift_of(&series);
    let last = traj.last();
    let offpeak = offpeak_residual(&[last.a], &[last.x], &default_offpeak_grid(&[last.x]))?;
    Ok(VerificationReport {
        max_ode_residual: ode,
        functional_drift: drift,
        offpeak_residual: offpeak,
        checks: check_rows(ode, drift, offpeak, thr),
    })
}

/// Runs every check against an N-peakon trajectory.
pub fn verify_n_trajectory(
    sys: &ReducedSystem,
    traj: &NTrajectory,
    thr: &VerifyThresholds,
) -> Result<VerificationReport, VerifyError> {
    let ode = ode_residual_n(sys, traj)?;
    let series = functionals_n(traj);
    let drift = drift_of(&series);
    let last = traj.last();
    let offpeak = offpeak_residual(&last.a, &last.x, &default_offpeak_grid(&last.x))?;
    Ok(VerificationReport {
        max_ode_residual: ode,
        functional_drift: drift,
        offpeak_residual: offpeak,
        checks: check_rows(ode, drift, offpeak, thr),
    })
}
