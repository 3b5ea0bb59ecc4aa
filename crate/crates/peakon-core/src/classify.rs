//! Long-time behaviour classification for single-peakon dynamics.
//!
//! Two classifiers produce the same [`BehaviorReport`] shape. For the
//! power-law equation family (`f = k u^p`, `g = lam u^q`)
//! [`classify_power_family`] derives the amplitude and position classes
//! exactly from the closed-form limits. For everything else
//! [`classify_numeric`] simulates, then probes the reduced functions along
//! geometric ladders toward the empirical amplitude limit, fitting log-log
//! slopes to decide between the classes and to separate finite-time from
//! asymptotic behaviour. Each asserted class is backed by at least one
//! [`Evidence`] row recording the condition checked, the probe values, and a
//! verdict; probe failures degrade verdicts to `undetermined` instead of
//! aborting.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::peakon::{
    integrate_single, EventKind, PeakonState, SimError, SimOptions, Termination, Trajectory,
};
use crate::reduce::ReducedDynamics;

// ---------------------------------------------------------------------------
// Report types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "kebab-case"))]
pub enum ClassifyMode {
    ExactPowerFamily,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "kebab-case"))]
pub enum AmplitudeClass {
    /// `A(t)` stays at its initial value.
    Constant,
    /// `A -> A_inf` finite and nonzero; `value` carries the asymptote.
    FiniteAsymptote,
    /// `|A| -> infinity` in infinite time.
    Unbounded,
    /// `|A| -> infinity` at a finite time carried in `time`.
    BlowUp,
    /// `A -> 0`; a finite contact time is carried in `time`, while an
    /// asymptotic approach leaves `time` empty.
    Extinction,
    /// The amplitude oscillates through branch switches.
    Periodic,
    /// `A -> 0` in finite time with `dA/dt` diverging at the contact.
    SingularDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "kebab-case"))]
pub enum PositionClass {
    /// `Xdot` constant; `value` carries the speed.
    ConstantSpeed,
    /// `Xdot -> c` finite and nonzero; `value` carries `c`.
    FiniteAsymptoticSpeed,
    /// `Xdot -> 0`; `value` carries the limit position when it is finite.
    Braking,
    /// `|Xdot| -> infinity` in infinite time.
    Runaway,
    /// `|X| -> infinity` at the finite time carried in `time`.
    FiniteTimeRunaway,
    /// `|Xdot| -> infinity` at a finite time while `X` stays bounded.
    WheelspinLimit,
    /// `Xdot -> 0` at a finite time with a deceleration that does not vanish;
    /// `value` carries the limit of `Xddot` when it is finite.
    ThrustReverseBraking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "kebab-case"))]
pub enum Verdict {
    Confirmed,
    Consistent,
    Undetermined,
}

/// One checked condition backing a classification.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Evidence {
    pub condition: String,
    pub probes: Vec<f64>,
    pub verdict: Verdict,
}

/// A class with its optional associated value and time.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ClassLabel<C> {
    pub class: C,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub value: Option<f64>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub time: Option<f64>,
}

impl<C> ClassLabel<C> {
    fn new(class: C) -> Self {
        ClassLabel { class, value: None, time: None }
    }

    fn with_value(class: C, value: f64) -> Self {
        ClassLabel { class, value: Some(value), time: None }
    }
}

/// Classification result for one trajectory (or one exact parameter set).
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BehaviorReport {
    pub mode: ClassifyMode,
    pub amplitude: ClassLabel<AmplitudeClass>,
    pub position: ClassLabel<PositionClass>,
    pub reversals: Vec<f64>,
    pub evidence: Vec<Evidence>,
}

impl fmt::Display for ClassifyMode {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        out.write_str(match self {
            ClassifyMode::ExactPowerFamily => "exact-power-family",
            ClassifyMode::Numeric => "numeric",
        })
    }
}

impl fmt::Display for AmplitudeClass {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        out.write_str(match self {
            AmplitudeClass::Constant => "constant",
            AmplitudeClass::FiniteAsymptote => "finite-asymptote",
            AmplitudeClass::Unbounded => "unbounded",
            AmplitudeClass::BlowUp => "blow-up",
            AmplitudeClass::Extinction => "extinction",
            AmplitudeClass::Periodic => "periodic",
            AmplitudeClass::SingularDerivative => "singular-derivative",
        })
    }
}

impl fmt::Display for PositionClass {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        out.write_str(match self {
            PositionClass::ConstantSpeed => "constant-speed",
            PositionClass::FiniteAsymptoticSpeed => "finite-asymptotic-speed",
            PositionClass::Braking => "braking",
            PositionClass::Runaway => "runaway",
            PositionClass::FiniteTimeRunaway => "finite-time-runaway",
            PositionClass::WheelspinLimit => "wheelspin-limit",
            PositionClass::ThrustReverseBraking => "thrust-reverse-braking",
        })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        out.write_str(match self {
            Verdict::Confirmed => "confirmed",
            Verdict::Consistent => "consistent",
            Verdict::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifyError {
    Invalid(&'static str),
    Sim(SimError),
}

impl fmt::Display for ClassifyError {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifyError::Invalid(msg) => out.write_str(msg),
            ClassifyError::Sim(err) => write!(out, "{err}"),
        }
    }
}

impl core::error::Error for ClassifyError {}

impl From<SimError> for ClassifyError {
    fn from(err: SimError) -> Self {
        ClassifyError::Sim(err)
    }
}

/// Thresholds for the numeric classifier.
#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    /// Tolerance around fitted log-log slopes when comparing against the
    /// critical exponents.
    pub slope_tol: f64,
    /// Number of rungs in each geometric probe ladder (factor 2 per rung).
    pub ladder_len: usize,
    /// Speeds below this are treated as zero.
    pub speed_eps: f64,
    /// Relative amplitude deviation below this counts as constant.
    pub drift_eps: f64,
    pub sim: SimOptions,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            slope_tol: 0.1,
            ladder_len: 10,
            speed_eps: 1e-8,
            drift_eps: 1e-7,
            sim: SimOptions::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// Exact classifier for the power family
// ---------------------------------------------------------------------------

/// Classifies `f = kappa u^p`, `g = lambda u^q` exactly.
///
/// The closed forms are `A = s^(-1/p)` and `Xdot = lambda s^(-q/p)` with
/// `s = p kappa (t - t0)`, so every class follows from the signs of `p kappa`,
/// `q/p`, and `1 - q/p`. Positions use the `X0 = 0` convention. Requires all
/// of `p`, `q`, `kappa`, `lambda` nonzero.
pub fn classify_power_family(
    p: f64,
    q: f64,
    kappa: f64,
    lambda: f64,
    t0: f64,
) -> Result<BehaviorReport, ClassifyError> {
    for v in [p, q, kappa, lambda] {
        if v == 0.0 || !v.is_finite() {
            return Err(ClassifyError::Invalid("p, q, kappa, lambda must be finite and nonzero"));
        }
    }
    if !t0.is_finite() {
        return Err(ClassifyError::Invalid("t0 must be finite"));
    }

    let mut evidence = Vec::new();
    let e = q / p;
    let expanding = p * kappa > 0.0;

    let amplitude = if expanding {
        if p > 0.0 {
            evidence.push(Evidence {
                condition: "amplitude: A = s^(-1/p) -> 0 as s -> infinity".into(),
                probes: alloc::vec![p * kappa, -1.0 / p],
                verdict: Verdict::Confirmed,
            });
            ClassLabel::new(AmplitudeClass::Extinction)
        } else {
            evidence.push(Evidence {
                condition: "amplitude: A = s^(-1/p) -> infinity as s -> infinity".into(),
                probes: alloc::vec![p * kappa, -1.0 / p],
                verdict: Verdict::Confirmed,
            });
            ClassLabel::new(AmplitudeClass::Unbounded)
        }
    } else if p > 0.0 {
        evidence.push(Evidence {
            condition: "amplitude: A = s^(-1/p) -> infinity as s -> 0 at t0".into(),
            probes: alloc::vec![p * kappa, -1.0 / p, t0],
            verdict: Verdict::Confirmed,
        });
        ClassLabel { class: AmplitudeClass::BlowUp, value: None, time: Some(t0) }
    } else if p < -1.0 {
        evidence.push(Evidence {
            condition: "amplitude: A -> 0 at t0 with dA/dt = -kappa A^(p+1) diverging".into(),
            probes: alloc::vec![p + 1.0, t0],
            verdict: Verdict::Confirmed,
        });
        ClassLabel { class: AmplitudeClass::SingularDerivative, value: None, time: Some(t0) }
    } else {
        evidence.push(Evidence {
            condition: "amplitude: A = s^(-1/p) -> 0 as s -> 0 at t0".into(),
            probes: alloc::vec![p * kappa, -1.0 / p, t0],
            verdict: Verdict::Confirmed,
        });
        ClassLabel { class: AmplitudeClass::Extinction, value: None, time: Some(t0) }
    };

    let confirmed = |condition: String, probes: Vec<f64>| Evidence {
        condition,
        probes,
        verdict: Verdict::Confirmed,
    };
    let position = if expanding {
        // s -> infinity: Xdot = lambda s^(-e) and X - X0 ~ s^(1-e).
        if e > 1.0 {
            evidence.push(confirmed(
                "position: Xdot -> 0 and X -> X0 since 1 - q/p < 0".into(),
                alloc::vec![e, 1.0 - e],
            ));
            ClassLabel::with_value(PositionClass::Braking, 0.0)
        } else if e > 0.0 {
            evidence.push(confirmed(
                "position: Xdot -> 0 with X -> infinity since 0 <= 1 - q/p".into(),
                alloc::vec![e, 1.0 - e],
            ));
            ClassLabel::new(PositionClass::Braking)
        } else {
            evidence.push(confirmed(
                "position: Xdot = lambda s^(-q/p) -> infinity over infinite time".into(),
                alloc::vec![e],
            ));
            ClassLabel::new(PositionClass::Runaway)
        }
    } else {
        // s -> 0 at the finite time t0.
        if e >= 1.0 {
            evidence.push(confirmed(
                "position: |X| -> infinity as s -> 0 at t0 since 1 - q/p <= 0".into(),
                alloc::vec![e, t0],
            ));
            ClassLabel { class: PositionClass::FiniteTimeRunaway, value: None, time: Some(t0) }
        } else if e > 0.0 {
            evidence.push(confirmed(
                "position: Xdot -> infinity at t0 while X -> X0 stays finite".into(),
                alloc::vec![e, t0],
            ));
            ClassLabel { class: PositionClass::WheelspinLimit, value: Some(0.0), time: Some(t0) }
        } else if e >= -1.0 {
            // Xddot = -q kappa lambda s^(-(1+q/p)) has a nonzero limit.
            let xddot = if e == -1.0 { Some(-q * kappa * lambda) } else { None };
            evidence.push(confirmed(
                "position: Xdot -> 0 at t0 while Xddot does not vanish since 0 <= 1 + q/p <= 1"
                    .into(),
                alloc::vec![e, 1.0 + e, t0],
            ));
            ClassLabel { class: PositionClass::ThrustReverseBraking, value: xddot, time: Some(t0) }
        } else {
            evidence.push(confirmed(
                "position: Xdot -> 0 and Xddot -> 0 at t0 with X -> X0".into(),
                alloc::vec![e, 1.0 + e, t0],
            ));
            ClassLabel { class: PositionClass::Braking, value: Some(0.0), time: Some(t0) }
        }
    };

    Ok(BehaviorReport {
        mode: ClassifyMode::ExactPowerFamily,
        amplitude,
        position,
        reversals: Vec::new(),
        evidence,
    })
}

// ---------------------------------------------------------------------------
// Numeric classifier
// ---------------------------------------------------------------------------

struct Rung {
    y: f64,
    f0: f64,
    g0: Option<f64>,
    alpha: Option<f64>,
}

/// Geometric probe ladder from `y0` (inclusive) by repeated `factor`.
/// Rungs where `f0` fails to evaluate are skipped.
fn ladder(sys: &dyn ReducedDynamics, y0: f64, factor: f64, len: usize) -> Vec<Rung> {
    let mut out = Vec::new();
    let mut y = y0;
    for _ in 0..=len {
        if let Ok(f0) = sys.f0(y) {
            out.push(Rung { y, f0, g0: sys.g0(y).ok(), alpha: sys.alpha(y).ok() });
        }
        y *= factor;
    }
    out
}

/// Least-squares slope of `ln|value|` against `ln|y|` over the rungs.
fn log_slope(rungs: &[Rung], value: impl Fn(&Rung) -> Option<f64>) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for r in rungs {
        if let Some(v) = value(r) {
            if v != 0.0 && v.is_finite() {
                pts.push((math::ln(r.y.abs()), math::ln(v.abs())));
            }
        }
    }
    if pts.len() < 4 {
        return None;
    }
    let n = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in &pts {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Integrates `value(y) dy` over the radii spanned by the rungs (trapezoid in
/// `ln|y|`), extrapolating beyond the edge rung with the fitted power law.
/// `to_infinity` extrapolates above the largest radius, otherwise below the
/// smallest one down to zero. Returns None when the signs are inconsistent or
/// the extrapolated tail diverges.
fn tail_integral(
    rungs: &[Rung],
    to_infinity: bool,
    value: impl Fn(&Rung) -> Option<f64>,
) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for r in rungs {
        let v = value(r)?;
        if !v.is_finite() {
            return None;
        }
        pts.push((r.y.abs(), v));
    }
    if pts.len() < 4 {
        return None;
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    let edge = if to_infinity { pts[pts.len() - 1] } else { pts[0] };
    if pts.iter().any(|(_, v)| v * edge.1 < 0.0) {
        return None;
    }
    let mut total = 0.0;
    for w in pts.windows(2) {
        let ((y0, v0), (y1, v1)) = (w[0], w[1]);
        total += 0.5 * (v0 * y0 + v1 * y1) * math::ln(y1 / y0);
    }
    let slope = {
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        let mut usable = 0.0;
        for (y, v) in &pts {
            if *v == 0.0 {
                continue;
            }
            let (x, yv) = (math::ln(*y), math::ln(v.abs()));
            sx += x;
            sy += yv;
            sxx += x * x;
            sxy += x * yv;
            usable += 1.0;
        }
        if usable < 4.0 {
            return Some(total);
        }
        let denom = usable * sxx - sx * sx;
        if denom.abs() < 1e-300 {
            return Some(total);
        }
        (usable * sxy - sx * sy) / denom
    };
    let (y_e, v_e) = edge;
    if to_infinity {
        if slope < -1.0 {
            Some(total + v_e * y_e / (-1.0 - slope))
        } else {
            None
        }
    } else if slope > -1.0 {
        Some(total + v_e * y_e / (1.0 + slope))
    } else {
        None
    }
}

fn push(evidence: &mut Vec<Evidence>, condition: String, probes: Vec<f64>, verdict: Verdict) {
    evidence.push(Evidence { condition, probes, verdict });
}

struct Endpoint {
    t: f64,
    a: f64,
    x: f64,
    /// +1 when the evolution runs toward increasing t, -1 backward.
    dir: f64,
}

/// Simulates from `init` toward `horizon` and classifies the empirical
/// long-time behaviour of the amplitude and the peak position.
///
/// A horizon before `init.t` classifies the backward-in-time evolution. The
/// returned report also carries every direction reversal seen in the sampled
/// window. Thresholds come from [`ClassifyOptions`].
pub fn classify_numeric(
    sys: &dyn ReducedDynamics,
    init: PeakonState,
    horizon: f64,
    opts: &ClassifyOptions,
) -> Result<BehaviorReport, ClassifyError> {
    if opts.ladder_len < 4 {
        return Err(ClassifyError::Invalid("ladder_len must be at least 4"));
    }
    if !(opts.slope_tol > 0.0 && opts.slope_tol < 1.0) {
        return Err(ClassifyError::Invalid("slope_tol must lie in (0, 1)"));
    }
    let traj = integrate_single(sys, init, horizon, &opts.sim)?;
    let dir = if horizon >= init.t { 1.0 } else { -1.0 };
    let last = if dir > 0.0 {
        traj.samples.last().expect("trajectory has samples")
    } else {
        traj.samples.first().expect("trajectory has samples")
    };
    let end = Endpoint { t: last.t, a: last.a, x: last.x, dir };
    let mut evidence = Vec::new();
    let reversals = traj.reversal_times();

    let switches: Vec<f64> = traj
        .events
        .iter()
        .filter(|ev| ev.kind == EventKind::BranchSwitch)
        .map(|ev| ev.t)
        .collect();

    let (amplitude, position) = if switches.len() >= 2 {
        classify_periodic(&traj, &switches, &mut evidence)
    } else {
        match traj.termination {
            Termination::BlowUp { t_star } => {
                let amp = amp_at_infinity(sys, &end, Some(t_star), opts, &mut evidence);
                let pos = position_at_limit(sys, &end, true, &amp, opts, &mut evidence);
                (amp, pos)
            }
            Termination::Extinction { t } => {
                let amp = amp_at_zero(sys, &end, Some(t), opts, &mut evidence);
                let pos = position_at_limit(sys, &end, false, &amp, opts, &mut evidence);
                (amp, pos)
            }
            Termination::Equilibrium { a } => {
                let amp = amp_at_root(sys, &end, a, opts, &mut evidence);
                let pos = position_at_root(sys, &end, a, opts, &mut evidence);
                (amp, pos)
            }
            Termination::HorizonReached
            | Termination::DomainError { .. }
            | Termination::Collision { .. } => classify_open_end(sys, &traj, &end, opts, &mut evidence),
        }
    };

    Ok(BehaviorReport { mode: ClassifyMode::Numeric, amplitude, position, reversals, evidence })
}

fn classify_periodic(
    traj: &Trajectory,
    switches: &[f64],
    evidence: &mut Vec<Evidence>,
) -> (ClassLabel<AmplitudeClass>, ClassLabel<PositionClass>) {
    let extent = switches.len().min(6);
    let probes: Vec<f64> = switches[..extent].to_vec();
    let mut gap_sum = 0.0;
    for w in switches.windows(2) {
        gap_sum += w[1] - w[0];
    }
    let period = 2.0 * gap_sum / (switches.len() - 1) as f64;
    let peak = traj
        .events
        .iter()
        .filter(|ev| ev.kind == EventKind::BranchSwitch)
        .filter_map(|ev| ev.value)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    push(
        evidence,
        "amplitude: repeated branch switches mark a periodic orbit".into(),
        probes,
        Verdict::Confirmed,
    );
    let amplitude =
        ClassLabel { class: AmplitudeClass::Periodic, value: Some(peak), time: Some(period) };

    let first = traj.samples.first().expect("trajectory has samples");
    let last = traj.samples.last().expect("trajectory has samples");
    let c = if last.t > first.t { (last.x - first.x) / (last.t - first.t) } else { 0.0 };
    push(
        evidence,
        "position: mean drift speed across the periodic window".into(),
        alloc::vec![c],
        Verdict::Consistent,
    );
    (amplitude, ClassLabel::with_value(PositionClass::ConstantSpeed, c))
}

fn classify_open_end(
    sys: &dyn ReducedDynamics,
    traj: &Trajectory,
    end: &Endpoint,
    opts: &ClassifyOptions,
    evidence: &mut Vec<Evidence>,
) -> (ClassLabel<AmplitudeClass>, ClassLabel<PositionClass>) {
    let a0 = if end.dir > 0.0 {
        traj.samples.first().expect("trajectory has samples").a
    } else {
        traj.samples.last().expect("trajectory has samples").a
    };
    let scale = a0.abs().max(1.0);
    let drift = traj.samples.iter().fold(0.0f64, |m, s| m.max((s.a - a0).abs()));

    if drift <= opts.drift_eps * scale {
        push(
            evidence,
            "amplitude: maximum deviation from the initial amplitude stays within tolerance"
                .into(),
            alloc::vec![drift, opts.drift_eps * scale],
            Verdict::Confirmed,
        );
        let amplitude = ClassLabel::with_value(AmplitudeClass::Constant, a0);
        let position = position_constant(sys, traj, end, evidence);
        return (amplitude, position);
    }

    let Ok(f0_end) = sys.f0(end.a) else {
        push(
            evidence,
            "amplitude: reduced functions not evaluable at the endpoint".into(),
            alloc::vec![end.a],
            Verdict::Undetermined,
        );
        push(
            evidence,
            "position: no speed probes without an evaluable endpoint".into(),
            alloc::vec![end.a],
            Verdict::Undetermined,
        );
        let amplitude = ClassLabel::with_value(AmplitudeClass::FiniteAsymptote, end.a);
        return (amplitude, ClassLabel::new(PositionClass::Braking));
    };
    let rate = end.dir * (-end.a * f0_end);
    if rate.abs() <= 1e-10 * end.a.abs().max(1.0) {
        // Sitting at (or next to) an equilibrium the stall detector missed.
        let root = refine_root(sys, end.a, 1e-3 * end.a.abs().max(1.0)).unwrap_or(end.a);
        let amp = amp_at_root(sys, end, root, opts, evidence);
        let pos = position_at_root(sys, end, root, opts, evidence);
        return (amp, pos);
    }

    let toward_zero = rate * end.a < 0.0;
    let factor = if toward_zero { 0.5 } else { 2.0 };
    let scan = ladder(sys, end.a, factor, opts.ladder_len);
    let mut bracket: Option<(f64, f64)> = None;
    let mut prev = (end.a, f0_end);
    for r in &scan {
        if r.y == end.a {
            continue;
        }
        if r.f0 * prev.1 < 0.0 {
            bracket = Some((prev.0, r.y));
            break;
        }
        prev = (r.y, r.f0);
    }
    if let Some((lo, hi)) = bracket {
        let root = bisect_f0(sys, lo, hi).unwrap_or(0.5 * (lo + hi));
        let amp = amp_at_root(sys, end, root, opts, evidence);
        let pos = position_at_root(sys, end, root, opts, evidence);
        (amp, pos)
    } else if toward_zero {
        let amp = amp_at_zero(sys, end, None, opts, evidence);
        let pos = position_at_limit(sys, end, false, &amp, opts, evidence);
        (amp, pos)
    } else {
        let amp = amp_at_infinity(sys, end, None, opts, evidence);
        let pos = position_at_limit(sys, end, true, &amp, opts, evidence);
        (amp, pos)
    }
}

fn position_constant(
    sys: &dyn ReducedDynamics,
    traj: &Trajectory,
    end: &Endpoint,
    evidence: &mut Vec<Evidence>,
) -> ClassLabel<PositionClass> {
    let c = sys.g0(end.a).unwrap_or(f64::NAN);
    let first = traj.samples.first().expect("trajectory has samples");
    let resid = traj
        .samples
        .iter()
        .fold(0.0f64, |m, s| m.max((s.x - (first.x + c * (s.t - first.t))).abs()));
    let verdict = if c.is_finite() && resid <= 1e-6 * (1.0 + c.abs()) * (1.0 + traj_span(traj)) {
        Verdict::Confirmed
    } else {
        Verdict::Consistent
    };
    push(
        evidence,
        "position: X stays on a straight line of slope g0(A)".into(),
        alloc::vec![c, resid],
        verdict,
    );
    ClassLabel::with_value(PositionClass::ConstantSpeed, c)
}

fn traj_span(traj: &Trajectory) -> f64 {
    let first = traj.samples.first().expect("trajectory has samples");
    let last = traj.samples.last().expect("trajectory has samples");
    (last.t - first.t).abs()
}

fn refine_root(sys: &dyn ReducedDynamics, a: f64, width: f64) -> Option<f64> {
    let lo = sys.f0(a - width).ok()?;
    let hi = sys.f0(a + width).ok()?;
    if lo * hi < 0.0 {
        bisect_f0(sys, a - width, a + width)
    } else {
        None
    }
}

fn bisect_f0(sys: &dyn ReducedDynamics, mut lo: f64, mut hi: f64) -> Option<f64> {
    let f_lo = sys.f0(lo).ok()?;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        match sys.f0(mid) {
            Ok(f_mid) => {
                if f_mid == 0.0 {
                    return Some(mid);
                }
                if (f_mid > 0.0) == (f_lo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Err(_) => return None,
        }
    }
    Some(0.5 * (lo + hi))
}

fn amp_at_root(
    sys: &dyn ReducedDynamics,
    end: &Endpoint,
    root: f64,
    opts: &ClassifyOptions,
    evidence: &mut Vec<Evidence>,
) -> ClassLabel<AmplitudeClass> {
    // Probe f0 on the approach side of the asymptote.
    let side = if end.a >= root { 1.0 } else { -1.0 };
    let delta0 = (end.a - root).abs().max(1e-6 * root.abs().max(1.0));
    let mut pts = Vec::new();
    let mut delta = delta0;
    for _ in 0..=opts.ladder_len {
        if let Ok(f0) = sys.f0(root + side * delta) {
            pts.push(Rung { y: delta, f0, g0: None, alpha: None });
        }
        delta *= 0.5;
    }
    let slope = log_slope(&pts, |r| Some(r.f0));
    let (verdict, probes) = match slope {
        Some(s) if s >= 1.0 - opts.slope_tol => (Verdict::Confirmed, alloc::vec![root, s]),
        Some(s) => (Verdict::Consistent, alloc::vec![root, s]),
        None => (Verdict::Undetermined, alloc::vec![root]),
    };
    push(
        evidence,
        "amplitude: f0 vanishes like a simple root at the asymptote".into(),
        probes,
        verdict,
    );
    ClassLabel::with_value(AmplitudeClass::FiniteAsymptote, root)
}

fn position_at_root(
    sys: &dyn ReducedDynamics,
    end: &Endpoint,
    root: f64,
    opts: &ClassifyOptions,
    evidence: &mut Vec<Evidence>,
) -> ClassLabel<PositionClass> {
    match sys.g0(root) {
        Ok(c) if c.abs() > opts.speed_eps => {
            push(
                evidence,
                "position: asymptotic speed g0 at the amplitude asymptote".into(),
                alloc::vec![c],
                Verdict::Confirmed,
            );
            ClassLabel::with_value(PositionClass::FiniteAsymptoticSpeed, c)
        }
        Ok(c) => {
            push(
                evidence,
                "position: speed vanishes at the amplitude asymptote".into(),
                alloc::vec![c, end.x],
                Verdict::Consistent,
            );
            let value = if (end.a - root).abs() <= 1e-3 * root.abs().max(1.0) {
                Some(end.x)
            } else {
                None
            };
            ClassLabel { class: PositionClass::Braking, value, time: None }
        }
        Err(_) => {
            push(
                evidence,
                "position: speed probes failed at the amplitude asymptote".into(),
                alloc::vec![root],
                Verdict::Undetermined,
            );
            ClassLabel::new(PositionClass::FiniteAsymptoticSpeed)
        }
    }
}

fn amp_at_zero(
    sys: &dyn ReducedDynamics,
    end: &Endpoint,
    event_t: Option<f64>,
    opts: &ClassifyOptions,
    evidence: &mut Vec<Evidence>,
) -> ClassLabel<AmplitudeClass> {
    let side = if end.a != 0.0 { end.a.signum() } else { 1.0 };
    let base = end.a.abs().max(1e-9);
    let rungs = ladder(sys, side * base, 0.5, opts.ladder_len);
    let beta = log_slope(&rungs, |r| Some(r.y * r.f0));
    match beta {
        Some(b) if b < -opts.slope_tol => {
            push(
                evidence,
                "amplitude: y f0(y) ~ y^beta with beta < 0, so dA/dt diverges at the contact"
                    .into(),
                alloc::vec![b],
                Verdict::Confirmed,
            );
            let time = Some(event_t.unwrap_or_else(|| reach_time(&rungs, end)));
            ClassLabel { class: AmplitudeClass::SingularDerivative, value: None, time }
        }
        Some(b) if b < 1.0 - opts.slope_tol => {
            push(
                evidence,
                "amplitude: 1/(y f0(y)) integrable down to zero (finite-time contact)".into(),
                alloc::vec![b],
                Verdict::if_confirmed(event_t.is_some()),
            );
            let time = Some(event_t.unwrap_or_else(|| reach_time(&rungs, end)));
            ClassLabel { class: AmplitudeClass::Extinction, value: None, time }
        }
        Some(b) => {
            let verdict = if b > 1.0 + opts.slope_tol {
                Verdict::Confirmed
            } else {
                Verdict::Consistent
            };
            push(
                evidence,
                "amplitude: 1/(y f0(y)) non-integrable at zero (asymptotic decay)".into(),
                alloc::vec![b],
                verdict,
            );
            ClassLabel::new(AmplitudeClass::Extinction)
        }
        None => {
            push(
                evidence,
                "amplitude: decay-rate ladder could not be fitted".into(),
                alloc::vec![end.a],
                Verdict::Undetermined,
            );
            ClassLabel { class: AmplitudeClass::Extinction, value: None, time: event_t }
        }
    }
}

impl Verdict {
    fn if_confirmed(confirmed: bool) -> Verdict {
        if confirmed {
            Verdict::Confirmed
        } else {
            Verdict::Consistent
        }
    }
}

/// Remaining evolution time until the amplitude reaches zero, estimated from
/// the ladder, converted to an absolute clock time.
fn reach_time(rungs: &[Rung], end: &Endpoint) -> f64 {
    match tail_integral(rungs, false, |r| Some(1.0 / (r.y * r.f0).abs())) {
        Some(ds) => end.t + end.dir * ds,
        None => end.t,
    }
}

fn amp_at_infinity(
    sys: &dyn ReducedDynamics,
    end: &Endpoint,
    fit_t: Option<f64>,
    opts: &ClassifyOptions,
    evidence: &mut Vec<Evidence>,
) -> ClassLabel<AmplitudeClass> {
    let side = if end.a != 0.0 { end.a.signum() } else { 1.0 };
    let base = end.a.abs().max(1.0);
    let rungs = ladder(sys, side * base, 2.0, opts.ladder_len);
    let beta = log_slope(&rungs, |r| Some(r.y * r.f0));
    match beta {
        Some(b) if b > 1.0 + opts.slope_tol => {
            push(
                evidence,
                "amplitude: 1/(y f0(y)) integrable at infinity (finite-time blow-up)".into(),
                alloc::vec![b],
                Verdict::if_confirmed(fit_t.is_some()),
            );
            let time = Some(fit_t.unwrap_or_else(|| blowup_time(&rungs, end)));
            ClassLabel { class: AmplitudeClass::BlowUp, value: None, time }
        }
        Some(b) if b < 1.0 - opts.slope_tol => {
            push(
                evidence,
                "amplitude: 1/(y f0(y)) non-integrable at infinity (growth over infinite time)"
                    .into(),
                alloc::vec![b],
                Verdict::Confirmed,
            );
            ClassLabel::new(AmplitudeClass::Unbounded)
        }
        Some(b) => {
            push(
                evidence,
                "amplitude: growth-rate exponent too close to the integrability border".into(),
                alloc::vec![b],
                Verdict::Undetermined,
            );
            if fit_t.is_some() {
                ClassLabel { class: AmplitudeClass::BlowUp, value: None, time: fit_t }
            } else {
                ClassLabel::new(AmplitudeClass::Unbounded)
            }
        }
        None => {
            push(
                evidence,
                "amplitude: growth-rate ladder could not be fitted".into(),
                alloc::vec![end.a],
                Verdict::Undetermined,
            );
            if fit_t.is_some() {
                ClassLabel { class: AmplitudeClass::BlowUp, value: None, time: fit_t }
            } else {
                ClassLabel::new(AmplitudeClass::Unbounded)
            }
        }
    }
}

fn blowup_time(rungs: &[Rung], end: &Endpoint) -> f64 {
    match tail_integral(rungs, true, |r| Some(1.0 / (r.y * r.f0).abs())) {
        Some(ds) => end.t + end.dir * ds,
        None => end.t,
    }
}

/// Position classes for an amplitude running to zero or infinity. The
/// amplitude label supplies whether the endpoint is reached in finite time.
fn position_at_limit(
    sys: &dyn ReducedDynamics,
    end: &Endpoint,
    to_infinity: bool,
    amplitude: &ClassLabel<AmplitudeClass>,
    opts: &ClassifyOptions,
    evidence: &mut Vec<Evidence>,
) -> ClassLabel<PositionClass> {
    let finite_time = amplitude.time.is_some();
    let t_limit = amplitude.time;
    let side = if end.a != 0.0 { end.a.signum() } else { 1.0 };
    let (base, factor) = if to_infinity {
        (end.a.abs().max(1.0), 2.0)
    } else {
        (end.a.abs().max(1e-9), 0.5)
    };
    let rungs = ladder(sys, side * base, factor, opts.ladder_len);
    let beta_f = log_slope(&rungs, |r| Some(r.y * r.f0));
    let beta_g = log_slope(&rungs, |r| r.g0);
    let edge = if to_infinity { rungs.last() } else { rungs.first() };
    let edge = match edge {
        Some(r) => r,
        None => {
            push(
                evidence,
                "position: speed ladder could not be evaluated".into(),
                alloc::vec![end.a],
                Verdict::Undetermined,
            );
            return ClassLabel::new(PositionClass::Braking);
        }
    };
    // The edge rung is the innermost for ladders toward zero.
    let limit_rung = if to_infinity {
        rungs.iter().fold(edge, |m, r| if r.y.abs() > m.y.abs() { r } else { m })
    } else {
        rungs.iter().fold(edge, |m, r| if r.y.abs() < m.y.abs() { r } else { m })
    };
    let g_limit = limit_rung.g0.unwrap_or(0.0);
    // Exactly zero, not merely small: odd nonlinearities reduce to a g0
    // whose quadrature vanishes identically, while a genuine power law can
    // pass through values far below any fixed threshold on its way out.
    let all_zero = rungs.iter().all(|r| matches!(r.g0, Some(g) if g == 0.0));
    if all_zero {
        push(
            evidence,
            "position: speed identically zero along the approach".into(),
            alloc::vec![0.0],
            Verdict::Confirmed,
        );
        return ClassLabel { class: PositionClass::ConstantSpeed, value: Some(0.0), time: None };
    }

    // Speed limit exponent: sign conventions flip between the two ladder
    // directions (g0 ~ y^beta_g grows toward the limit when beta_g > 0 at
    // infinity, or beta_g < 0 at zero).
    let speed_grows = match beta_g {
        Some(b) => {
            if to_infinity {
                b > opts.slope_tol
            } else {
                b < -opts.slope_tol
            }
        }
        None => false,
    };
    let speed_vanishes = match beta_g {
        Some(b) => {
            if to_infinity {
                b < -opts.slope_tol
            } else {
                b > opts.slope_tol
            }
        }
        None => g_limit.abs() <= opts.speed_eps,
    };

    if !speed_grows && !speed_vanishes {
        // Speed settles at a nonzero constant.
        push(
            evidence,
            "position: g0 approaches a nonzero constant along the ladder".into(),
            alloc::vec![beta_g.unwrap_or(0.0), g_limit],
            Verdict::if_confirmed(beta_g.is_some()),
        );
        return ClassLabel {
            class: PositionClass::FiniteAsymptoticSpeed,
            value: Some(g_limit),
            time: t_limit,
        };
    }

    // Does the remaining displacement converge?
    let dx_exponent = match (beta_g, beta_f) {
        (Some(g), Some(f)) => Some(g - f),
        _ => None,
    };
    let x_converges = match dx_exponent {
        Some(d) => {
            if to_infinity {
                d < -1.0 - opts.slope_tol
            } else {
                d > -1.0 + opts.slope_tol
            }
        }
        None => false,
    };
    let tail = tail_integral(&rungs, to_infinity, |r| {
        r.g0.map(|g| g / (r.y * r.f0).abs())
    });

    if speed_grows {
        if finite_time {
            if x_converges {
                let value = tail.map(|dx| end.x + end.dir * dx);
                push(
                    evidence,
                    "position: speed diverges at the contact while the displacement converges"
                        .into(),
                    alloc::vec![dx_exponent.unwrap_or(f64::NAN)],
                    Verdict::if_confirmed(value.is_some()),
                );
                ClassLabel { class: PositionClass::WheelspinLimit, value, time: t_limit }
            } else {
                push(
                    evidence,
                    "position: displacement integral diverges at the finite-time contact".into(),
                    alloc::vec![dx_exponent.unwrap_or(f64::NAN)],
                    Verdict::if_confirmed(dx_exponent.is_some()),
                );
                ClassLabel { class: PositionClass::FiniteTimeRunaway, value: None, time: t_limit }
            }
        } else {
            push(
                evidence,
                "position: speed grows without bound over infinite time".into(),
                alloc::vec![beta_g.unwrap_or(f64::NAN)],
                Verdict::if_confirmed(beta_g.is_some()),
            );
            ClassLabel::new(PositionClass::Runaway)
        }
    } else {
        // Speed vanishes at the limit.
        if finite_time {
            // Residual deceleration at the contact separates plain braking
            // from thrust-reverse braking.
            let beta_acc = log_slope(&rungs, |r| r.alpha.map(|al| r.y * r.f0 * al));
            let acc_limit = limit_rung
                .alpha
                .map(|al| -limit_rung.y * limit_rung.f0 * al)
                .unwrap_or(f64::NAN);
            let acc_vanishes = match beta_acc {
                Some(b) => {
                    if to_infinity {
                        b < -opts.slope_tol
                    } else {
                        b > opts.slope_tol
                    }
                }
                None => true,
            };
            if !acc_vanishes {
                let acc_const = beta_acc.map(|b| b.abs() <= opts.slope_tol).unwrap_or(false);
                push(
                    evidence,
                    "position: speed vanishes at the contact but the deceleration does not"
                        .into(),
                    alloc::vec![beta_acc.unwrap_or(f64::NAN), acc_limit],
                    Verdict::if_confirmed(beta_acc.is_some()),
                );
                ClassLabel {
                    class: PositionClass::ThrustReverseBraking,
                    value: if acc_const && acc_limit.is_finite() { Some(acc_limit) } else { None },
                    time: t_limit,
                }
            } else {
                let value = if x_converges { tail.map(|dx| end.x + end.dir * dx) } else { None };
                push(
                    evidence,
                    "position: speed and deceleration both vanish at the contact".into(),
                    alloc::vec![beta_g.unwrap_or(f64::NAN)],
                    Verdict::if_confirmed(beta_g.is_some()),
                );
                ClassLabel { class: PositionClass::Braking, value, time: t_limit }
            }
        } else {
            let value = if x_converges { tail.map(|dx| end.x + end.dir * dx) } else { None };
            push(
                evidence,
                "position: speed decays along the approach; displacement integral decides the limit"
                    .into(),
                alloc::vec![
                    beta_g.unwrap_or(f64::NAN),
                    dx_exponent.unwrap_or(f64::NAN),
                ],
                Verdict::if_confirmed(beta_g.is_some()),
            );
            ClassLabel { class: PositionClass::Braking, value, time: None }
        }
    }
}

/// Checks whether the classified behaviour approaches a travelling wave and
/// returns its `(amplitude, speed)` when it does.
pub fn asymptotic_travelling_wave_test(
    sys: &dyn ReducedDynamics,
    report: &BehaviorReport,
) -> Option<(f64, f64)> {
    match report.amplitude.class {
        AmplitudeClass::Constant | AmplitudeClass::FiniteAsymptote => {
            let a = report.amplitude.value?;
            let c = sys.g0(a).ok()?;
            let rate = a * sys.f0(a).ok()?;
            if rate.abs() <= 1e-6 * (1.0 + a.abs()) {
                Some((a, c))
            } else {
                None
            }
        }
        _ => None,
    }
}
