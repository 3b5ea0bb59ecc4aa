//! Multi-peakon simulation.
//!
//! The field `u(x) = sum_j a_j exp(-|x - x_j|)` is continuous with slope
//! jumps at the peaks. Each peak carries one-sided slopes, and the peakon
//! ODEs average the nonlinearities across the jump:
//!
//! ```text
//!     da_i/dt = (F(u_i, ux+) - F(u_i, ux-)) / 2,
//!     dx_i/dt = -(G(u_i, ux+) - G(u_i, ux-)) / (2 a_i),
//! ```
//!
//! with `F(u, b) = \int_0^b f(u, y) dy` and likewise `G` for `g`. For a
//! single peakon this reduces exactly to the amplitude/position system in
//! [`crate::peakon`].

use alloc::vec;
use alloc::vec::Vec;

use crate::expr::Which;
use crate::math;
use crate::ode::{OdeError, OdeOptions, OdeStats, Stepper};
use crate::peakon::{EventKind, EventRecord, SimError, SimOptions, Termination};
use crate::reduce::{ReduceError, ReducedSystem};

/// Time, amplitudes, and peak positions of an N-peakon field.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NPeakonState {
    pub t: f64,
    pub a: Vec<f64>,
    pub x: Vec<f64>,
}

impl NPeakonState {
    pub fn new(t: f64, a: Vec<f64>, x: Vec<f64>) -> Result<Self, SimError> {
        if a.is_empty() || a.len() != x.len() {
            return Err(SimError::Invalid("need matching, non-empty amplitude and position lists"));
        }
        if !t.is_finite() || a.iter().chain(&x).any(|v| !v.is_finite()) {
            return Err(SimError::Invalid("initial data must be finite"));
        }
        Ok(NPeakonState { t, a, x })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Field value `u(x)`.
    pub fn value_at(&self, x: f64) -> f64 {
        self.a
            .iter()
            .zip(&self.x)
            .map(|(a_j, x_j)| a_j * math::exp(-(x - x_j).abs()))
            .sum()
    }

    /// One-sided slopes `(ux-, ux+)` at peak `i`.
    pub fn peak_slopes(&self, i: usize) -> (f64, f64) {
        let mut cont = 0.0;
        for (j, (a_j, x_j)) in self.a.iter().zip(&self.x).enumerate() {
            if j != i {
                let d = self.x[i] - x_j;
                cont -= d.signum() * a_j * math::exp(-d.abs());
            }
        }
        (cont + self.a[i], cont - self.a[i])
    }
}

/// Evaluates the N-peakon right-hand side into `adot` and `xdot`.
pub fn rhs_n(
    sys: &ReducedSystem,
    state: &NPeakonState,
    adot: &mut [f64],
    xdot: &mut [f64],
) -> Result<(), ReduceError> {
    let n = state.len();
    for i in 0..n {
        let u_i = state.value_at(state.x[i]);
        let (ux_minus, ux_plus) = state.peak_slopes(i);
        let f_plus = sys.antiderivative(Which::F, u_i, ux_plus)?;
        let f_minus = sys.antiderivative(Which::F, u_i, ux_minus)?;
        let g_plus = sys.antiderivative(Which::G, u_i, ux_plus)?;
        let g_minus = sys.antiderivative(Which::G, u_i, ux_minus)?;
        adot[i] = 0.5 * (f_plus - f_minus);
        xdot[i] = -(g_plus - g_minus) / (2.0 * state.a[i]);
    }
    Ok(())
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct NSample {
    pub t: f64,
    pub a: Vec<f64>,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NTrajectory {
    pub samples: Vec<NSample>,
    pub events: Vec<EventRecord>,
    pub termination: Termination,
    pub stats: OdeStats,
}

impl NTrajectory {
    pub fn last(&self) -> &NSample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    pub fn state_at_end(&self) -> NPeakonState {
        let s = self.last();
        NPeakonState { t: s.t, a: s.a.clone(), x: s.x.clone() }
    }
}

fn unpack(t: f64, y: &[f64], n: usize) -> NPeakonState {
    NPeakonState { t, a: y[..n].to_vec(), x: y[n..].to_vec() }
}

/// Smallest gap between adjacent peaks (by sorted position) and the original
/// index of the left peak of that pair.
fn min_gap(x: &[f64]) -> (f64, usize) {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).unwrap_or(core::cmp::Ordering::Equal));
    let mut best = (f64::INFINITY, 0);
    for pair in order.windows(2) {
        let gap = x[pair[1]] - x[pair[0]];
        if gap < best.0 {
            best = (gap, pair[0]);
        }
    }
    best
}

/// Simulates an N-peakon field from `init` to `horizon` (which may lie
/// before `init.t`; samples are then returned in ascending time).
pub fn integrate_n(
    sys: &ReducedSystem,
    init: &NPeakonState,
    horizon: f64,
    opts: &SimOptions,
) -> Result<NTrajectory, SimError> {
    if !(opts.tol > 0.0 && opts.sample_dt > 0.0) {
        return Err(SimError::Invalid("tol and sample_dt must be positive"));
    }
    if init.a.is_empty() || init.a.len() != init.x.len() {
        return Err(SimError::Invalid("need matching, non-empty amplitude and position lists"));
    }
    let n = init.len();
    let t0 = init.t;
    let backward = horizon < t0;
    let dirf = if backward { -1.0 } else { 1.0 };
    let s_end = t0 + (horizon - t0).abs();

    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<(), ReduceError> {
        let state = unpack(s, y, n);
        let (adot, xdot) = dy.split_at_mut(n);
        rhs_n(sys, &state, adot, xdot)?;
        for v in adot.iter_mut().chain(xdot.iter_mut()) {
            *v *= dirf;
        }
        Ok(())
    };
    let y0: Vec<f64> = init.a.iter().chain(&init.x).copied().collect();
    let mut stepper = Stepper::new(rhs, t0, y0, OdeOptions::with_tol(opts.tol)).map_err(|e| {
        match e {
            OdeError::Rhs(err) => SimError::Reduce(err),
            OdeError::StepSizeUnderflow { .. } => SimError::Invalid("cannot start"),
        }
    })?;

    let mut samples: Vec<NSample> = Vec::new();
    let mut events: Vec<EventRecord> = Vec::new();
    let grid = |k: usize| t0 + k as f64 * opts.sample_dt;
    let h_cap = (10.0 * opts.sample_dt).max(1e-3 * (s_end - t0));
    let push_sample = |samples: &mut Vec<NSample>, t: f64, y: &[f64]| {
        samples.push(NSample { t, a: y[..n].to_vec(), x: y[n..].to_vec() });
    };
    push_sample(&mut samples, t0, stepper.state());
    let mut next = 1usize;

    let mut window: Vec<(f64, f64)> = vec![(t0, max_abs(&init.a))];
    let mut stall = 0usize;

    let termination: Termination = 'run: {
        loop {
            let t_now = stepper.time();
            if t_now >= s_end {
                break 'run Termination::HorizonReached;
            }
            if stepper.stats.accepted > opts.max_steps {
                return Err(SimError::MaxSteps { t: map_back(t_now, t0, backward) });
            }

            let dense = match stepper.step(s_end.min(t_now + h_cap)) {
                Ok(dense) => dense,
                Err(OdeError::StepSizeUnderflow { t, .. }) => {
                    let y = stepper.state().to_vec();
                    let peak = max_abs(&y[..n]);
                    if peak >= 1e-3 * opts.a_max {
                        let (t_star, beta) =
                            crate::peakon::fit_blowup(&window).unwrap_or((t, f64::NAN));
                        let beta = if beta.is_finite() { Some(beta) } else { None };
                        events.push(EventRecord {
                            kind: EventKind::BlowUp,
                            t: t_star,
                            value: beta,
                            peakon_index: None,
                        });
                        push_sample(&mut samples, t, &y);
                        break 'run Termination::BlowUp { t_star };
                    }
                    let (gap, left) = min_gap(&y[n..]);
                    if gap <= 1e3 * opts.gap_min {
                        events.push(EventRecord {
                            kind: EventKind::Collision,
                            t,
                            value: Some(y[n + left]),
                            peakon_index: Some(left),
                        });
                        push_sample(&mut samples, t, &y);
                        break 'run Termination::Collision { t };
                    }
                    push_sample(&mut samples, t, &y);
                    break 'run Termination::DomainError { t };
                }
                Err(OdeError::Rhs(_)) => unreachable!("step() does not fail at the current state"),
            };

            let t1 = dense.t1;
            let y1 = stepper.state().to_vec();
            push_window(&mut window, t1, max_abs(&y1[..n]));

            // Candidate terminal conditions inside this step, earliest wins.
            let mut cut: Option<(f64, EventRecord, Termination)> = None;
            let mut consider = |t_ev: f64, ev: EventRecord, term: Termination| {
                if cut.as_ref().is_none_or(|(t_cut, _, _)| t_ev < *t_cut) {
                    cut = Some((t_ev, ev, term));
                }
            };

            if max_abs(&y1[..n]) >= opts.a_max {
                let t_b = bisect(&dense, dense.t0, t1, |y| max_abs(&y[..n]) >= opts.a_max);
                let (t_star, beta) = crate::peakon::fit_blowup(&window).unwrap_or((t_b, f64::NAN));
                let beta = if beta.is_finite() { Some(beta) } else { None };
                consider(
                    t_b,
                    EventRecord { kind: EventKind::BlowUp, t: t_star, value: beta, peakon_index: None },
                    Termination::BlowUp { t_star },
                );
            }
            if let Some(i) = (0..n).find(|&i| y1[i].abs() <= opts.a_min) {
                let t_e = bisect(&dense, dense.t0, t1, |y| y[i].abs() <= opts.a_min);
                consider(
                    t_e,
                    EventRecord {
                        kind: EventKind::Extinction,
                        t: t_e,
                        value: Some(y1[i]),
                        peakon_index: Some(i),
                    },
                    Termination::Extinction { t: t_e },
                );
            }
            let (gap, left) = min_gap(&y1[n..]);
            if gap <= opts.gap_min {
                let t_c = bisect(&dense, dense.t0, t1, |y| min_gap(&y[n..]).0 <= opts.gap_min);
                let y_c = dense.eval(t_c);
                consider(
                    t_c,
                    EventRecord {
                        kind: EventKind::Collision,
                        t: t_c,
                        value: Some(y_c[n + left]),
                        peakon_index: Some(left),
                    },
                    Termination::Collision { t: t_c },
                );
            }

            if let Some((t_cut, ev, term)) = cut {
                emit_grid(&mut samples, &mut next, grid, &dense, t_cut, n);
                let y_c = dense.eval(t_cut);
                events.push(ev);
                push_sample(&mut samples, t_cut, &y_c);
                break 'run term;
            }

            // Equilibrium stall on all amplitudes.
            let rate = stepper.derivative()[..n].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rate < opts.eps_eq * max_abs(&y1[..n]).max(1.0) {
                stall += 1;
                if stall >= opts.eq_stall_steps {
                    emit_grid(&mut samples, &mut next, grid, &dense, t1, n);
                    events.push(EventRecord {
                        kind: EventKind::Equilibrium,
                        t: t1,
                        value: Some(max_abs(&y1[..n])),
                        peakon_index: None,
                    });
                    push_sample(&mut samples, t1, &y1);
                    break 'run Termination::Equilibrium { a: max_abs(&y1[..n]) };
                }
            } else {
                stall = 0;
            }

            emit_grid(&mut samples, &mut next, grid, &dense, t1, n);
        }
    };

    if matches!(termination, Termination::HorizonReached) {
        let t_last = samples.last().map(|s| s.t).unwrap_or(t0);
        if (t_last - s_end).abs() > 1e-12 * s_end.abs().max(1.0) {
            push_sample(&mut samples, s_end, stepper.state());
        }
    }

    let termination = if backward {
        for s in &mut samples {
            s.t = map_back(s.t, t0, true);
        }
        samples.reverse();
        for e in &mut events {
            e.t = map_back(e.t, t0, true);
        }
        events.reverse();
        match termination {
            Termination::HorizonReached => Termination::HorizonReached,
            Termination::BlowUp { t_star } => {
                Termination::BlowUp { t_star: map_back(t_star, t0, true) }
            }
            Termination::Extinction { t } => Termination::Extinction { t: map_back(t, t0, true) },
            Termination::Equilibrium { a } => Termination::Equilibrium { a },
            Termination::DomainError { t } => {
                Termination::DomainError { t: map_back(t, t0, true) }
            }
            Termination::Collision { t } => Termination::Collision { t: map_back(t, t0, true) },
        }
    } else {
        termination
    };

    Ok(NTrajectory { samples, events, termination, stats: stepper.stats })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn push_window(window: &mut Vec<(f64, f64)>, t: f64, a: f64) {
    window.push((t, a));
    if window.len() > 16 {
        window.remove(0);
    }
}

fn map_back(s: f64, t0: f64, backward: bool) -> f64 {
    if backward {
        2.0 * t0 - s
    } else {
        s
    }
}

fn emit_grid(
    samples: &mut Vec<NSample>,
    next: &mut usize,
    grid: impl Fn(usize) -> f64,
    dense: &crate::ode::DenseStep,
    limit: f64,
    n: usize,
) {
    let tiny = 1e-12 * limit.abs().max(1.0);
    while grid(*next) <= limit + tiny {
        let t = grid(*next);
        let y = dense.eval(t);
        samples.push(NSample { t, a: y[..n].to_vec(), x: y[n..].to_vec() });
        *next += 1;
    }
}

fn bisect(
    dense: &crate::ode::DenseStep,
    mut lo: f64,
    mut hi: f64,
    pred: impl Fn(&[f64]) -> bool,
) -> f64 {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::NonlinearitySpec;
    use crate::reduce::ReducedDynamics;
    use alloc::string::ToString;
    use approx::assert_relative_eq;

    fn system(f: &str, g: &str, params: &[(&str, f64)]) -> ReducedSystem {
        let params = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        ReducedSystem::new(NonlinearitySpec::parse(f, g, params).unwrap())
    }

    fn two_peakon() -> NPeakonState {
        NPeakonState::new(0.0, vec![1.0, 1.0], vec![0.0, math::ln(2.0)]).unwrap()
    }

    #[test]
    fn field_and_slopes_reference_values() {
        let state = two_peakon();
        assert_relative_eq!(state.value_at(0.0), 1.5, epsilon = 1e-15);
        assert_relative_eq!(state.value_at(math::ln(2.0)), 1.5, epsilon = 1e-15);
        let (minus, plus) = state.peak_slopes(0);
        assert_relative_eq!(minus, 1.5, epsilon = 1e-15);
        assert_relative_eq!(plus, -0.5, epsilon = 1e-15);
        let (minus, plus) = state.peak_slopes(1);
        assert_relative_eq!(minus, 0.5, epsilon = 1e-15);
        assert_relative_eq!(plus, -1.5, epsilon = 1e-15);
    }

    #[test]
    fn rhs_reference_values() {
        let sys = system("ux", "u", &[]);
        let state = two_peakon();
        let mut adot = [0.0; 2];
        let mut xdot = [0.0; 2];
        rhs_n(&sys, &state, &mut adot, &mut xdot).unwrap();
        assert_relative_eq!(adot[0], -0.5, max_relative = 1e-10);
        assert_relative_eq!(adot[1], 0.5, max_relative = 1e-10);
        assert_relative_eq!(xdot[0], 1.5, max_relative = 1e-10);
        assert_relative_eq!(xdot[1], 1.5, max_relative = 1e-10);
    }

    #[test]
    fn single_peakon_reduces_to_amplitude_system() {
        let sys = system("k*(u-2)*(u-1)", "lam*(3-2*u)", &[("k", 0.7), ("lam", 1.3)]);
        for a in [0.5, 1.4, 2.5, -0.8] {
            let state = NPeakonState::new(0.0, vec![a], vec![0.3]).unwrap();
            let mut adot = [0.0];
            let mut xdot = [0.0];
            rhs_n(&sys, &state, &mut adot, &mut xdot).unwrap();
            let expected_adot = -a * sys.f0(a).unwrap();
            let expected_xdot = sys.g0(a).unwrap();
            assert_relative_eq!(adot[0], expected_adot, max_relative = 1e-9, epsilon = 1e-12);
            assert_relative_eq!(xdot[0], expected_xdot, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_peakon_exchange_conserves_invariants() {
        let sys = system("ux", "u", &[]);
        let init = NPeakonState::new(0.0, vec![1.0, 0.4], vec![-3.0, 0.0]).unwrap();
        let traj = integrate_n(&sys, &init, 6.0, &SimOptions::default()).unwrap();
        assert_eq!(traj.termination, Termination::HorizonReached);
        let invariants = |s: &NSample| {
            let m: f64 = 2.0 * (s.a[0] + s.a[1]);
            let mut h1 = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    h1 += 2.0 * s.a[i] * s.a[j] * math::exp(-(s.x[i] - s.x[j]).abs());
                }
            }
            (m, h1)
        };
        let (m0, h0) = invariants(&traj.samples[0]);
        for s in &traj.samples {
            let (m, h) = invariants(s);
            assert_relative_eq!(m, m0, max_relative = 1e-8);
            assert_relative_eq!(h, h0, max_relative = 1e-7);
        }
        // Peaks never cross in an overtaking exchange.
        for s in &traj.samples {
            assert!(s.x[0] < s.x[1]);
        }
    }

    #[test]
    fn two_peakon_matches_hand_coded_odes() {
        // For f = ux, g = u the peakon ODEs reduce to
        //   xdot_i = u(x_i),  adot_i = a_i sum_{j != i} sgn(x_i - x_j) a_j e^{-|x_i - x_j|}.
        let sys = system("ux", "u", &[]);
        let init = NPeakonState::new(0.0, vec![1.0, 1.0], vec![0.0, math::ln(2.0)]).unwrap();
        let traj = integrate_n(&sys, &init, 3.0, &SimOptions::default()).unwrap();

        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), ReduceError> {
            let (a1, a2, x1, x2) = (y[0], y[1], y[2], y[3]);
            let e = math::exp(-(x1 - x2).abs());
            dy[0] = a1 * (x1 - x2).signum() * a2 * e;
            dy[1] = a2 * (x2 - x1).signum() * a1 * e;
            dy[2] = a1 + a2 * e;
            dy[3] = a2 + a1 * e;
            Ok(())
        };
        let mut reference =
            Stepper::new(rhs, 0.0, vec![1.0, 1.0, 0.0, math::ln(2.0)], OdeOptions::with_tol(1e-12))
                .unwrap();
        while reference.time() < 3.0 {
            reference.step(3.0).unwrap();
        }
        let y = reference.state();
        let last = traj.last();
        assert_relative_eq!(last.a[0], y[0], max_relative = 1e-8, epsilon = 1e-10);
        assert_relative_eq!(last.a[1], y[1], max_relative = 1e-8, epsilon = 1e-10);
        assert_relative_eq!(last.x[0], y[2], max_relative = 1e-8, epsilon = 1e-10);
        assert_relative_eq!(last.x[1], y[3], max_relative = 1e-8, epsilon = 1e-10);
    }

    #[test]
    fn head_on_collision_is_detected() {
        let sys = system("ux", "u", &[]);
        let init = NPeakonState::new(0.0, vec![1.0, -1.0], vec![-1.0, 1.0]).unwrap();
        let opts = SimOptions { gap_min: 1e-6, ..SimOptions::default() };
        let traj = integrate_n(&sys, &init, 20.0, &opts).unwrap();
        match traj.termination {
            Termination::Collision { t } => assert!(t > 0.5, "t = {t}"),
            other => panic!("expected collision, got {other:?}"),
        }
        let event = traj.events.iter().find(|e| e.kind == EventKind::Collision).unwrap();
        assert_eq!(event.peakon_index, Some(0));
        // Antisymmetric head-on collision happens at the midpoint.
        assert!(event.value.unwrap().abs() < 1e-3);
        let last = traj.last();
        assert!(last.x[1] - last.x[0] <= 1.1e-6);
    }

    #[test]
    fn amplitude_degeneracy_terminates() {
        let sys = system("k*(a-u)", "lam*u", &[("k", 1.0), ("a", 1.0), ("lam", 1.0)]);
        let init = NPeakonState::new(0.0, vec![0.5, 0.3], vec![-4.0, 4.0]).unwrap();
        let opts = SimOptions { a_min: 1e-6, ..SimOptions::default() };
        let traj = integrate_n(&sys, &init, 40.0, &opts).unwrap();
        match traj.termination {
            Termination::Extinction { t } => assert!(t > 5.0),
            other => panic!("expected extinction, got {other:?}"),
        }
        let event = traj.events.iter().find(|e| e.kind == EventKind::Extinction).unwrap();
        assert!(event.peakon_index.is_some());
    }
}
