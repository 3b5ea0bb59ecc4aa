//! Single-peakon simulation.
//!
//! Integrates the reduced system `dA/dt = -A f0(A)`, `dX/dt = g0(A)` with
//! event detection: blow-up (with a power-law fit of the blow-up time),
//! extinction, equilibrium stalls, direction reversals, and square-root
//! branch contacts for oscillatory systems. Backward runs integrate the
//! negated field in an internal forward clock and are mapped back at the
//! end, so the driver logic only ever sees increasing time.

use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell;
use core::fmt;

use crate::math;
use crate::ode::{DenseStep, OdeError, OdeOptions, OdeStats, Stepper};
use crate::quad::{self, QuadError, QuadOptions};
use crate::reduce::{ReduceError, ReducedDynamics};

// ---------------------------------------------------------------------------
// Public types
// ---------------------------------------------------------------------------

/// Time, amplitude, and peak position of a single peakon.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PeakonState {
    pub t: f64,
    pub a: f64,
    pub x: f64,
}

impl PeakonState {
    pub fn new(t: f64, a: f64, x: f64) -> Self {
        PeakonState { t, a, x }
    }
}

/// Right-hand side of the reduced system at one state: `(dA/dt, dX/dt)`.
pub fn rhs1(sys: &dyn ReducedDynamics, state: &PeakonState) -> Result<(f64, f64), ReduceError> {
    Ok((-state.a * sys.f0(state.a)?, sys.g0(state.a)?))
}

/// Peak acceleration `d2X/dt2 = -A f0(A) alpha(A)` at one amplitude.
pub fn accel1(sys: &dyn ReducedDynamics, a: f64) -> Result<f64, ReduceError> {
    Ok(-a * sys.f0(a)? * sys.alpha(a)?)
}

/// One output row: state and peak kinematics at a sample time. `xdot` and
/// `xddot` are NaN where the reduced functions cannot be evaluated.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Sample {
    pub t: f64,
    pub a: f64,
    pub x: f64,
    pub xdot: f64,
    pub xddot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "kebab-case"))]
pub enum EventKind {
    BlowUp,
    Extinction,
    DirectionReversal,
    Equilibrium,
    BranchSwitch,
    Collision,
}

impl fmt::Display for EventKind {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            EventKind::BlowUp => "blow-up",
            EventKind::Extinction => "extinction",
            EventKind::DirectionReversal => "direction-reversal",
            EventKind::Equilibrium => "equilibrium",
            EventKind::BranchSwitch => "branch-switch",
            EventKind::Collision => "collision",
        };
        out.write_str(name)
    }
}

/// A detected event. `value` depends on the kind: the blow-up growth
/// exponent, the position at a reversal, the amplitude at an equilibrium or
/// branch contact, the collision position. `peakon_index` is set for
/// multi-peakon events.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EventRecord {
    pub kind: EventKind,
    pub t: f64,
    pub value: Option<f64>,
    pub peakon_index: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "kebab-case"))]
pub enum Termination {
    HorizonReached,
    BlowUp { t_star: f64 },
    Extinction { t: f64 },
    Equilibrium { a: f64 },
    DomainError { t: f64 },
    Collision { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Integrator tolerance (absolute and relative).
    pub tol: f64,
    /// Uniform output sample spacing.
    pub sample_dt: f64,
    /// Amplitude magnitude treated as blown up.
    pub a_max: f64,
    /// Amplitude magnitude treated as extinct (with a small slope).
    pub eps_ext: f64,
    /// Relative amplitude-rate threshold for equilibrium stalls.
    pub eps_eq: f64,
    /// Consecutive stalled steps before declaring equilibrium.
    pub eq_stall_steps: usize,
    /// Amplitude-rate threshold that triggers a branch-contact probe. Kept
    /// well above the integrator tolerance: the square-root edge is not
    /// Lipschitz, so steps taken closer to the contact lose accuracy that
    /// the local contact model retains.
    pub branch_eps: f64,
    /// Hard cap on accepted steps.
    pub max_steps: usize,
    /// Minimum peak separation for multi-peakon runs (collision threshold).
    pub gap_min: f64,
    /// Minimum peakon amplitude magnitude for multi-peakon runs.
    pub a_min: f64,
    /// Enables square-root branch switching at amplitude extrema.
    pub oscillatory: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            tol: 1e-10,
            sample_dt: 0.01,
            a_max: 1e8,
            eps_ext: 1e-9,
            eps_eq: 1e-12,
            eq_stall_steps: 100,
            branch_eps: 1e-3,
            max_steps: 2_000_000,
            gap_min: 1e-9,
            a_min: 1e-12,
            oscillatory: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// The reduced functions failed at the initial state.
    Reduce(ReduceError),
    /// The step cap was exhausted before any terminal condition.
    MaxSteps { t: f64 },
    /// A quadrature-solve range crosses an amplitude equilibrium.
    EquilibriumCrossing { a: f64 },
    /// A quadrature-solve integral did not converge.
    Quadrature { achieved: f64, requested: f64 },
    /// Invalid options or initial data.
    Invalid(&'static str),
}

impl fmt::Display for SimError {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Reduce(e) => write!(out, "{e}"),
            SimError::MaxSteps { t } => write!(out, "step limit exhausted at t = {t}"),
            SimError::EquilibriumCrossing { a } => {
                write!(out, "amplitude range crosses an equilibrium near A = {a}")
            }
            SimError::Quadrature { achieved, requested } => write!(
                out,
                "quadrature did not converge: error {achieved:e} > requested {requested:e}"
            ),
            SimError::Invalid(msg) => write!(out, "invalid input: {msg}"),
        }
    }
}

impl core::error::Error for SimError {}

impl From<ReduceError> for SimError {
    fn from(e: ReduceError) -> Self {
        SimError::Reduce(e)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Uniformly spaced samples (plus the exact final state), ascending in
    /// `t` for both forward and backward runs.
    pub samples: Vec<Sample>,
    pub events: Vec<EventRecord>,
    pub termination: Termination,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn reversal_times(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::DirectionReversal)
            .map(|e| e.t)
            .collect()
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }
}

/// Time and position displacement between two amplitudes, from the
/// quadrature form of the reduced system.
#[derive(Debug, Clone, Copy)]
pub struct Displacement {
    pub delta_t: f64,
    pub delta_x: f64,
}

// ---------------------------------------------------------------------------
// Quadrature solve
// ---------------------------------------------------------------------------

/// Solves for the time and position displacement between amplitudes `a1`
/// and `a0` without integrating the ODE:
///
/// ```text
///     dt = \int_{a1}^{a0} dy / (y f0(y)),
///     dX = \int_{a1}^{a0} g0(y) / (y f0(y)) dy.
/// ```
///
/// The range must not cross an amplitude equilibrium (`y f0(y) = 0`).
pub fn quadrature_solve(
    sys: &dyn ReducedDynamics,
    a0: f64,
    a1: f64,
    tol: f64,
) -> Result<Displacement, SimError> {
    if a0 == a1 {
        return Ok(Displacement { delta_t: 0.0, delta_x: 0.0 });
    }
    let lo = a0.min(a1);
    let hi = a0.max(a1);
    let mut sign = 0.0f64;
    for j in 0..33 {
        let y = lo + (j as f64 + 0.5) / 33.0 * (hi - lo);
        let w = y * sys.f0(y)?;
        if w == 0.0 || (sign != 0.0 && w.signum() != sign) {
            return Err(SimError::EquilibriumCrossing { a: y });
        }
        sign = w.signum();
    }
    let opts = QuadOptions::with_tol(tol);
    let map_err = |e: QuadError<ReduceError>| match e {
        QuadError::Integrand(err) => SimError::Reduce(err),
        QuadError::NonConvergence { achieved, requested } => {
            SimError::Quadrature { achieved, requested }
        }
    };
    let delta_t = quad::integrate(
        |y| -> Result<f64, ReduceError> { Ok(1.0 / (y * sys.f0(y)?)) },
        a1,
        a0,
        &opts,
    )
    .map_err(map_err)?
    .integral;
    let delta_x = quad::integrate(
        |y| -> Result<f64, ReduceError> { Ok(sys.g0(y)? / (y * sys.f0(y)?)) },
        a1,
        a0,
        &opts,
    )
    .map_err(map_err)?
    .integral;
    Ok(Displacement { delta_t, delta_x })
}

// ---------------------------------------------------------------------------
// Branch-contact probing (oscillatory systems)
// ---------------------------------------------------------------------------

/// A confirmed square-root contact: the amplitude meets the domain edge
/// `a_c` with local model `dw/dt = -K sqrt(w)`, `w = |A - a_c|`.
struct EdgeContact {
    a_c: f64,
    /// Direction from the current amplitude toward the edge.
    d: f64,
    /// Model coefficient `K`.
    k_coef: f64,
}

/// Amplitude-rate magnitude `|A f0(A)|` on any branch, or None where the
/// reduction fails.
fn rate_mag(sys: &dyn ReducedDynamics, x: f64) -> Option<f64> {
    sys.f0(x).ok().map(|f0| (x * f0).abs())
}

fn rate_signed(sys: &dyn ReducedDynamics, x: f64) -> Option<f64> {
    sys.f0(x).ok().map(|f0| x * f0)
}

/// Last evaluable amplitude between `ok` (evaluable) and `bad` (not).
fn bisect_evaluable(sys: &dyn ReducedDynamics, mut ok: f64, mut bad: f64) -> f64 {
    for _ in 0..100 {
        let mid = 0.5 * (ok + bad);
        if mid == ok || mid == bad {
            break;
        }
        if rate_signed(sys, mid).is_some() {
            ok = mid;
        } else {
            bad = mid;
        }
    }
    ok
}

/// Root of the signed rate between two amplitudes with opposite signs.
fn bisect_rate_root(sys: &dyn ReducedDynamics, mut lo: f64, mut hi: f64, sign_lo: f64) -> f64 {
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        match rate_signed(sys, mid) {
            Some(h) if h * sign_lo > 0.0 => lo = mid,
            Some(_) => hi = mid,
            None => hi = mid,
        }
    }
    0.5 * (lo + hi)
}

/// Searches outward from `a` in direction `d` for the edge the amplitude is
/// heading into: a point where the reduction stops being evaluable, where
/// the signed rate flips, or where the rate magnitude dips to zero.
fn find_edge(sys: &dyn ReducedDynamics, a: f64, d: f64, rate_now: f64) -> Option<f64> {
    let scale = a.abs().max(1.0);
    let h_at_a = rate_signed(sys, a)?;
    let mut prev_x = a;
    let mut trail: Vec<(f64, f64)> = Vec::new();
    let mut delta = 1e-9 * scale;
    while delta <= scale {
        let x = a + d * delta;
        match rate_signed(sys, x) {
            None => return Some(bisect_evaluable(sys, prev_x, x)),
            Some(h) => {
                if h_at_a != 0.0 && h * h_at_a < 0.0 {
                    return Some(bisect_rate_root(sys, prev_x, x, h_at_a));
                }
                trail.push((x, h.abs()));
                prev_x = x;
            }
        }
        delta *= 2.0;
    }
    // Interior dip of |rate| to zero (an edge the expressions can evaluate
    // across): refine the bracketed minimum and accept it if it is deep.
    for w in trail.windows(3) {
        let [(x_l, h_l), (_, h_m), (x_r, h_r)] = [w[0], w[1], w[2]];
        if h_m < h_l && h_m < h_r && h_m < 0.5 * rate_now {
            let (mut lo, mut hi) = (x_l.min(x_r), x_l.max(x_r));
            for _ in 0..200 {
                let m1 = lo + (hi - lo) * 0.382;
                let m2 = lo + (hi - lo) * 0.618;
                let v1 = rate_mag(sys, m1).unwrap_or(f64::INFINITY);
                let v2 = rate_mag(sys, m2).unwrap_or(f64::INFINITY);
                if v1 < v2 {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let x_min = 0.5 * (lo + hi);
            if rate_mag(sys, x_min).is_some_and(|v| v <= 1e-3 * rate_now) {
                return Some(x_min);
            }
            let _ = h_m;
        }
    }
    None
}

/// Fits `ln |rate|` against `ln w` on a geometric ladder inside the edge.
/// Returns the slope and the model constant `ln K` (with the exponent pinned
/// to 1/2).
fn ladder_fit(sys: &dyn ReducedDynamics, a_c: f64, d: f64, w_base: f64) -> Option<(f64, f64)> {
    const N: usize = 6;
    let mut lw = [0.0; N];
    let mut lp = [0.0; N];
    for (k, (lw_k, lp_k)) in lw.iter_mut().zip(lp.iter_mut()).enumerate() {
        let w = w_base * math::powi(2.0, k as i32);
        let phi = rate_mag(sys, a_c - d * w)?;
        if phi <= 0.0 {
            return None;
        }
        *lw_k = math::ln(w);
        *lp_k = math::ln(phi);
    }
    let mw = lw.iter().sum::<f64>() / N as f64;
    let mp = lp.iter().sum::<f64>() / N as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..N {
        num += (lw[k] - mw) * (lp[k] - mp);
        den += (lw[k] - mw) * (lw[k] - mw);
    }
    if den == 0.0 {
        return None;
    }
    let slope = num / den;
    let ln_k = mp - 0.5 * mw;
    Some((slope, ln_k))
}

/// Probes for a square-root contact ahead of the motion. `adot` is the
/// current amplitude rate in the integration clock (its sign gives the
/// direction of motion; zero means unknown, so both directions are tried).
fn probe_contact(sys: &dyn ReducedDynamics, a: f64, adot: f64) -> Option<EdgeContact> {
    let dirs: &[f64] = if adot > 0.0 {
        &[1.0]
    } else if adot < 0.0 {
        &[-1.0]
    } else {
        &[1.0, -1.0]
    };
    for &d in dirs {
        let Some(a_c) = find_edge(sys, a, d, adot.abs()) else { continue };
        let w0 = (a_c - a).abs();
        let scale = a_c.abs().max(1.0);
        let w_base = (w0 / 64.0).max(1e-9 * scale);
        let Some((slope, ln_k)) = ladder_fit(sys, a_c, d, w_base) else { continue };
        if !(0.35..=0.65).contains(&slope) {
            continue;
        }
        let k_coef = math::exp(ln_k);
        if k_coef.is_finite() && k_coef > 0.0 {
            return Some(EdgeContact { a_c, d, k_coef });
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Blow-up time refinement
// ---------------------------------------------------------------------------

/// Fits `A ~ C (t* - t)^(-beta)` to the trailing window of accepted steps:
/// the inverse log-slope `1/s` is linear in `t` with root `t*` and slope
/// `-1/beta`. Returns `(t_star, beta)` when the fit is credible.
pub(crate) fn fit_blowup(window: &[(f64, f64)]) -> Option<(f64, f64)> {
    if window.len() < 6 {
        return None;
    }
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for pair in window.windows(2) {
        let (t0, a0) = pair[0];
        let (t1, a1) = pair[1];
        if a0.abs() <= 0.0 || a1.abs() <= a0.abs() || t1 <= t0 {
            return None;
        }
        let s = (math::ln(a1.abs()) - math::ln(a0.abs())) / (t1 - t0);
        if !(s.is_finite() && s > 0.0) {
            return None;
        }
        ts.push(0.5 * (t0 + t1));
        ys.push(1.0 / s);
    }
    let n = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, y) in ts.iter().zip(&ys) {
        num += (t - mt) * (y - my);
        den += (t - mt) * (t - mt);
    }
    if den == 0.0 {
        return None;
    }
    let slope = num / den;
    if !(slope.is_finite() && slope < 0.0) {
        return None;
    }
    let intercept = my - slope * mt;
    let t_star = -intercept / slope;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (t, y) in ts.iter().zip(&ys) {
        let fit = intercept + slope * t;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - my) * (y - my);
    }
    if ss_tot > 0.0 && ss_res / ss_tot > 0.02 {
        return None;
    }
    if t_star < *ts.last().unwrap() {
        return None;
    }
    Some((t_star, -1.0 / slope))
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

struct Emitter<'a> {
    sys: &'a dyn ReducedDynamics,
    sigma: &'a Cell<f64>,
    t0: f64,
    dt: f64,
    next: usize,
    samples: Vec<Sample>,
}

impl<'a> Emitter<'a> {
    fn grid(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    fn kinematics(&self, a: f64) -> (f64, f64) {
        let xdot = self.sys.g0(a).unwrap_or(f64::NAN);
        let adot = match self.sys.f0(a) {
            Ok(f0) => -self.sigma.get() * a * f0,
            Err(_) => f64::NAN,
        };
        let xddot = match self.sys.alpha(a) {
            Ok(alpha) => alpha * adot,
            Err(_) => f64::NAN,
        };
        (xdot, xddot)
    }

    fn push_state(&mut self, t: f64, a: f64, x: f64) {
        let (xdot, xddot) = self.kinematics(a);
        self.samples.push(Sample { t, a, x, xdot, xddot });
    }

    /// Emits grid samples inside `dense` up to `limit`.
    fn emit_dense(&mut self, dense: &DenseStep, limit: f64) {
        let tiny = 1e-12 * limit.abs().max(1.0);
        while self.grid(self.next) <= limit + tiny {
            let t = self.grid(self.next);
            let y = dense.eval(t);
            self.push_state(t, y[0], y[1]);
            self.next += 1;
        }
    }

    /// Emits the exact final point unless the last grid sample already
    /// landed there.
    fn emit_final(&mut self, t: f64, a: f64, x: f64) {
        let tiny = 1e-12 * t.abs().max(1.0);
        if self.samples.last().is_none_or(|s| (s.t - t).abs() > tiny) {
            self.push_state(t, a, x);
        }
    }
}

/// Simulates a single peakon from `init` to `horizon` (which may lie before
/// `init.t`; samples are then returned in ascending time).
pub fn integrate_single(
    sys: &dyn ReducedDynamics,
    init: PeakonState,
    horizon: f64,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    if !(opts.tol > 0.0 && opts.sample_dt > 0.0) {
        return Err(SimError::Invalid("tol and sample_dt must be positive"));
    }
    if !(init.a.is_finite() && init.x.is_finite() && init.t.is_finite() && horizon.is_finite()) {
        return Err(SimError::Invalid("initial data must be finite"));
    }
    let t0 = init.t;
    let backward = horizon < t0;
    let dirf = if backward { -1.0 } else { 1.0 };
    let s_end = t0 + (horizon - t0).abs();

    let sigma = Cell::new(1.0f64);
    let rhs = |_s: f64, y: &[f64], dy: &mut [f64]| -> Result<(), ReduceError> {
        let a = y[0];
        let f0 = sys.f0(a)?;
        let g0 = sys.g0(a)?;
        dy[0] = dirf * (-sigma.get() * a * f0);
        dy[1] = dirf * g0;
        Ok(())
    };
    let mut stepper =
        Stepper::new(rhs, t0, vec![init.a, init.x], OdeOptions::with_tol(opts.tol)).map_err(
            |e| match e {
                OdeError::Rhs(err) => SimError::Reduce(err),
                OdeError::StepSizeUnderflow { .. } => SimError::Invalid("cannot start"),
            },
        )?;

    let mut emitter = Emitter {
        sys,
        sigma: &sigma,
        t0,
        dt: opts.sample_dt,
        next: 0,
        samples: Vec::new(),
    };
    let mut events: Vec<EventRecord> = Vec::new();
    let h_cap = (10.0 * opts.sample_dt).max(1e-3 * (s_end - t0));

    // Trailing accepted states for blow-up fitting.
    let mut window: Vec<(f64, f64)> = Vec::new();
    let push_window = |window: &mut Vec<(f64, f64)>, t: f64, a: f64| {
        window.push((t, a));
        if window.len() > 16 {
            window.remove(0);
        }
    };
    push_window(&mut window, t0, init.a);

    // Branch-probe arming state.
    let mut armed = opts.oscillatory;
    let mut floor = f64::INFINITY;
    let mut stall = 0usize;
    // Equilibrium stalls only count once the amplitude has left its initial
    // value; a rate that vanishes identically is a travelling wave, not an
    // approach to rest.
    let mut amp_moved = false;

    emitter.push_state(t0, init.a, init.x);
    emitter.next = 1;

    // Performs the mirror jump across a square-root contact: advances the
    // clock past the contact, fills gap samples from the local parabola, and
    // restarts the stepper on the flipped branch. Returns the termination if
    // the horizon falls inside the gap.
    macro_rules! branch_jump {
        ($contact:expr, $t_now:expr, $a_now:expr, $x_now:expr, $record:expr) => {{
            let contact: &EdgeContact = &$contact;
            let (t_now, a_now, x_now) = ($t_now, $a_now, $x_now);
            let scale = contact.a_c.abs().max(1.0);
            let w0 = (a_now - contact.a_c).abs();
            let k = contact.k_coef;
            let t_c = t_now + 2.0 * math::sqrt(w0) / k;
            // Resume where the model rate is back at the probe trigger, so
            // the stepper restarts outside the non-Lipschitz zone.
            let w_probe = opts.branch_eps * scale / k;
            let w1 = w0.max(w_probe * w_probe).max(1e-9 * scale).min(1e-3 * scale);
            let t_resume = t_c + 2.0 * math::sqrt(w1) / k;
            let a_resume = contact.a_c - contact.d * w1;
            // The branch after the contact must move the amplitude inward;
            // starting exactly at an extremum keeps the current branch.
            let new_sigma = match sys.f0(a_resume) {
                Ok(f0) => {
                    let trial = -sigma.get();
                    if (dirf * (-trial * a_resume * f0)) * (-contact.d) >= 0.0 {
                        trial
                    } else {
                        -trial
                    }
                }
                Err(_) => -sigma.get(),
            };
            // Parabolic amplitude through the contact.
            let a_of = |s: f64| {
                let q = 0.5 * k * (s - t_c);
                contact.a_c - contact.d * q * q
            };
            let g_of = |a: f64, fallback: f64| sys.g0(a).unwrap_or(fallback);
            let g_now = sys.g0(a_now).unwrap_or(f64::NAN);
            // Gap samples from the local model.
            let gap_end = t_resume.min(s_end);
            {
                let tiny = 1e-12 * gap_end.abs().max(1.0);
                let mut prev_t = t_now;
                let mut prev_x = x_now;
                let mut prev_g = g_now;
                while emitter.grid(emitter.next) <= gap_end + tiny {
                    let ts = emitter.grid(emitter.next);
                    let a_s = a_of(ts);
                    let g_s = g_of(a_s, prev_g);
                    let x_s = prev_x + 0.5 * (ts - prev_t) * (prev_g + g_s);
                    let adot_real = -contact.d * 0.5 * k * k * (ts - t_c) * dirf;
                    let xddot = sys.alpha(a_s).map(|al| al * adot_real).unwrap_or(f64::NAN);
                    emitter.samples.push(Sample { t: ts, a: a_s, x: x_s, xdot: g_s, xddot });
                    emitter.next += 1;
                    prev_t = ts;
                    prev_x = x_s;
                    prev_g = g_s;
                }
            }
            if $record && new_sigma != sigma.get() && t_c <= s_end {
                events.push(EventRecord {
                    kind: EventKind::BranchSwitch,
                    t: t_c,
                    value: Some(contact.a_c),
                    peakon_index: None,
                });
            }
            if t_resume >= s_end {
                // Horizon falls inside the modeled gap.
                let a_end = a_of(s_end);
                let mid = a_of(0.5 * (t_now + s_end));
                let g_mid = g_of(mid, g_now);
                let g_end = g_of(a_end, g_now);
                let x_end =
                    x_now + (s_end - t_now) / 6.0 * (g_now + 4.0 * g_mid + g_end);
                emitter.emit_final(s_end, a_end, x_end);
                Some(Termination::HorizonReached)
            } else {
                // Simpson on the parabola for the position shift.
                let mid = a_of(0.5 * (t_now + t_resume));
                let g_mid = g_of(mid, g_now);
                let g_res = g_of(a_resume, g_now);
                let dx = (t_resume - t_now) / 6.0 * (g_now + 4.0 * g_mid + g_res);
                sigma.set(new_sigma);
                match stepper.reset(t_resume, vec![a_resume, x_now + dx], None) {
                    Ok(()) => None,
                    Err(_) => Some(Termination::DomainError { t: t_resume }),
                }
            }
        }};
    }

    // Cold start exactly at a contact: kick off the edge.
    let termination: Termination = 'run: {
        if opts.oscillatory {
            let adot0 = stepper.derivative()[0];
            if adot0.abs() <= 1e-12 * init.a.abs().max(1.0) {
                if let Some(contact) = probe_contact(sys, init.a, adot0) {
                    armed = false;
                    if let Some(term) = branch_jump!(contact, t0, init.a, init.x, false) {
                        break 'run term;
                    }
                }
            }
        }

        loop {
            let t_now = stepper.time();
            if t_now >= s_end {
                break 'run Termination::HorizonReached;
            }
            if stepper.stats.accepted > opts.max_steps {
                return Err(SimError::MaxSteps { t: map_time(t_now, t0, backward) });
            }
            let prev_deriv = [stepper.derivative()[0], stepper.derivative()[1]];
            let prev_a = stepper.state()[0];

            let dense = match stepper.step(s_end.min(t_now + h_cap)) {
                Ok(dense) => dense,
                Err(OdeError::StepSizeUnderflow { t, .. }) => {
                    let a = stepper.state()[0];
                    let x = stepper.state()[1];
                    if a.abs() >= 1e-3 * opts.a_max {
                        let (t_star, beta) =
                            fit_blowup(&window).unwrap_or((t, f64::NAN));
                        let beta = if beta.is_finite() { Some(beta) } else { None };
                        events.push(EventRecord {
                            kind: EventKind::BlowUp,
                            t: t_star,
                            value: beta,
                            peakon_index: None,
                        });
                        emitter.emit_final(t, a, x);
                        break 'run Termination::BlowUp { t_star };
                    }
                    if a.abs() <= 1e-6 * init.a.abs().max(1.0) {
                        events.push(EventRecord {
                            kind: EventKind::Extinction,
                            t,
                            value: Some(a),
                            peakon_index: None,
                        });
                        emitter.emit_final(t, a, x);
                        break 'run Termination::Extinction { t };
                    }
                    if opts.oscillatory {
                        let adot = stepper.derivative()[0];
                        if let Some(contact) = probe_contact(sys, a, adot) {
                            armed = false;
                            floor = f64::INFINITY;
                            if let Some(term) = branch_jump!(contact, t, a, x, true) {
                                break 'run term;
                            }
                            continue;
                        }
                    }
                    emitter.emit_final(t, a, x);
                    break 'run Termination::DomainError { t };
                }
                Err(OdeError::Rhs(_)) => unreachable!("step() does not fail at the current state"),
            };

            let t1 = dense.t1;
            let a1 = stepper.state()[0];
            let x1 = stepper.state()[1];
            let deriv = [stepper.derivative()[0], stepper.derivative()[1]];
            push_window(&mut window, t1, a1);
            amp_moved = amp_moved || (a1 - init.a).abs() > 1e-9 * init.a.abs().max(1.0);

            // Amplitude zero crossing: the peakon has vanished, which ends the
            // motion unless branch switching is active (an oscillating
            // amplitude passes through zero transversally).
            if prev_a * a1 < 0.0 {
                let t_z = bisect_dense(&dense, dense.t0, t1, |y| y[0].signum() != prev_a.signum());
                let dt_probe = 1e-3 * (t1 - dense.t0);
                let slope =
                    (dense.eval(t_z + dt_probe)[0] - dense.eval(t_z - dt_probe)[0]) / (2.0 * dt_probe);
                let tangential = slope.abs() <= 1e-7 * prev_deriv[0].abs().max(1.0);
                if tangential || !opts.oscillatory {
                    emitter.emit_dense(&dense, t_z);
                    let y = dense.eval(t_z);
                    events.push(EventRecord {
                        kind: EventKind::Extinction,
                        t: t_z,
                        value: Some(y[0]),
                        peakon_index: None,
                    });
                    emitter.emit_final(t_z, y[0], y[1]);
                    break 'run Termination::Extinction { t: t_z };
                }
            }

            // Blow-up threshold.
            if a1.abs() >= opts.a_max {
                let t_b = if prev_a.abs() < opts.a_max {
                    bisect_dense(&dense, dense.t0, t1, |y| y[0].abs() >= opts.a_max)
                } else {
                    t1
                };
                let (t_star, beta) = fit_blowup(&window).unwrap_or((t_b, f64::NAN));
                let beta = if beta.is_finite() { Some(beta) } else { None };
                emitter.emit_dense(&dense, t_b);
                let y = dense.eval(t_b);
                events.push(EventRecord {
                    kind: EventKind::BlowUp,
                    t: t_star,
                    value: beta,
                    peakon_index: None,
                });
                emitter.emit_final(t_b, y[0], y[1]);
                break 'run Termination::BlowUp { t_star };
            }

            // Direction reversal: strict sign change of the peak speed.
            if prev_deriv[1] != 0.0 && deriv[1] != 0.0 && prev_deriv[1] * deriv[1] < 0.0 {
                let sign_prev = prev_deriv[1].signum();
                let t_r = bisect_dense(&dense, dense.t0, t1, |y| {
                    match sys.g0(y[0]) {
                        Ok(g) => (dirf * g).signum() != sign_prev,
                        Err(_) => true,
                    }
                });
                let y = dense.eval(t_r);
                events.push(EventRecord {
                    kind: EventKind::DirectionReversal,
                    t: t_r,
                    value: Some(y[1]),
                    peakon_index: None,
                });
            }

            // Extinction threshold (small amplitude, small rate).
            if a1.abs() <= opts.eps_ext && deriv[0].abs() <= 1e3 * opts.eps_ext {
                emitter.emit_dense(&dense, t1);
                events.push(EventRecord {
                    kind: EventKind::Extinction,
                    t: t1,
                    value: Some(a1),
                    peakon_index: None,
                });
                emitter.emit_final(t1, a1, x1);
                break 'run Termination::Extinction { t: t1 };
            }

            // Equilibrium stall.
            if amp_moved
                && deriv[0].abs() < opts.eps_eq * a1.abs().max(1.0)
                && a1.abs() > 1e3 * opts.eps_ext
            {
                stall += 1;
                if stall >= opts.eq_stall_steps {
                    emitter.emit_dense(&dense, t1);
                    events.push(EventRecord {
                        kind: EventKind::Equilibrium,
                        t: t1,
                        value: Some(a1),
                        peakon_index: None,
                    });
                    emitter.emit_final(t1, a1, x1);
                    break 'run Termination::Equilibrium { a: a1 };
                }
            } else {
                stall = 0;
            }

            emitter.emit_dense(&dense, t1);

            // Branch-contact probe.
            if opts.oscillatory {
                let rate = deriv[0].abs();
                let trigger_at = opts.branch_eps * a1.abs().max(1.0);
                if !armed && rate > 10.0 * trigger_at {
                    armed = true;
                    floor = f64::INFINITY;
                }
                if armed && rate < trigger_at && rate < floor {
                    match probe_contact(sys, a1, deriv[0]) {
                        Some(contact) => {
                            armed = false;
                            floor = f64::INFINITY;
                            if let Some(term) = branch_jump!(contact, t1, a1, x1, true) {
                                break 'run term;
                            }
                        }
                        None => floor = rate / 4.0,
                    }
                }
            }
        }
    };

    // Close out the samples at the final state for normal horizon ends.
    if matches!(termination, Termination::HorizonReached) {
        let y = (stepper.state()[0], stepper.state()[1]);
        let t_fin = stepper.time().min(s_end);
        if emitter.samples.last().map(|s| s.t) != Some(s_end) {
            // The stepper may have been left mid-gap; prefer its state when
            // it reached the end, else the last emitted point stands.
            if t_fin >= s_end - 1e-12 * s_end.abs().max(1.0) {
                emitter.emit_final(s_end, y.0, y.1);
            }
        }
    }

    let mut samples = emitter.samples;
    let termination = if backward {
        for s in &mut samples {
            s.t = map_time(s.t, t0, true);
        }
        samples.reverse();
        for e in &mut events {
            e.t = map_time(e.t, t0, true);
        }
        events.reverse();
        match termination {
            Termination::HorizonReached => Termination::HorizonReached,
            Termination::BlowUp { t_star } => {
                Termination::BlowUp { t_star: map_time(t_star, t0, true) }
            }
            Termination::Extinction { t } => Termination::Extinction { t: map_time(t, t0, true) },
            Termination::Equilibrium { a } => Termination::Equilibrium { a },
            Termination::DomainError { t } => Termination::DomainError { t: map_time(t, t0, true) },
            Termination::Collision { t } => Termination::Collision { t: map_time(t, t0, true) },
        }
    } else {
        termination
    };

    Ok(Trajectory { samples, events, termination, stats: stepper.stats })
}

fn map_time(s: f64, t0: f64, backward: bool) -> f64 {
    if backward {
        2.0 * t0 - s
    } else {
        s
    }
}

/// First time in `[lo, hi]` where `pred` on the interpolated state flips
/// from false to true (it must be false at `lo` and true at `hi`).
fn bisect_dense(dense: &DenseStep, mut lo: f64, mut hi: f64, pred: impl Fn(&[f64]) -> bool) -> f64 {
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if pred(&dense.eval(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
