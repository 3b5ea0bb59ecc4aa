//! Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4)).
//!
//! The stepper advances one accepted step at a time so that callers can run
//! event detection between steps. Every accepted step carries a dense-output
//! interpolant, which the drivers use both for uniform sampling and for
//! bisecting event times. Right-hand-side failures inside a trial step are
//! treated as step rejections (the step is retried with a smaller size), so
//! integration can walk up to the edge of the vector field's domain without
//! panicking.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// Error coefficients: difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output coefficients.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step size; chosen automatically when absent.
    pub h_init: Option<f64>,
    /// Relative floor on the step size; going below reports underflow.
    pub h_min_scale: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rel_tol: 1e-10, abs_tol: 1e-10, h_init: None, h_min_scale: 1e-14 }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions { rel_tol: tol, abs_tol: tol, ..OdeOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdeError<E> {
    /// The derivative could not be evaluated at the current state, so the
    /// integration cannot even start from here.
    Rhs(E),
    /// Step-size control collapsed; carries the failure that kept rejecting
    /// trial steps, if it was a right-hand-side failure.
    StepSizeUnderflow { t: f64, rhs_error: Option<E> },
}

impl<E: fmt::Display> fmt::Display for OdeError<E> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OdeError::Rhs(e) => write!(out, "derivative evaluation failed: {e}"),
            OdeError::StepSizeUnderflow { t, rhs_error: Some(e) } => {
                write!(out, "step size underflow at t = {t}: {e}")
            }
            OdeError::StepSizeUnderflow { t, rhs_error: None } => {
                write!(out, "step size underflow at t = {t}")
            }
        }
    }
}

/// Dense-output interpolant over one accepted step `[t0, t1]`.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub t1: f64,
    rcont: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn dim(&self) -> usize {
        self.rcont[0].len()
    }

    /// Interpolates the state at `t` (intended for `t` within the step).
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let h = self.t1 - self.t0;
        let theta = if h == 0.0 { 0.0 } else { (t - self.t0) / h };
        let theta1 = 1.0 - theta;
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.rcont[0][i]
                + theta
                    * (self.rcont[1][i]
                        + theta1
                            * (self.rcont[2][i]
                                + theta * (self.rcont[3][i] + theta1 * self.rcont[4][i])));
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }
}

/// Cumulative integration statistics.
#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// One-step adaptive integrator. `rhs(t, y, dydt)` fills the derivative and
/// may fail; failures inside a trial step shrink the step.
pub struct Stepper<F, E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    rhs: F,
    t: f64,
    y: Vec<f64>,
    k: [Vec<f64>; 7],
    h: f64,
    opts: OdeOptions,
    pub stats: OdeStats,
    just_rejected: bool,
}

impl<F, E> Stepper<F, E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    pub fn new(mut rhs: F, t0: f64, y0: Vec<f64>, opts: OdeOptions) -> Result<Self, OdeError<E>> {
        let dim = y0.len();
        let mut k1 = vec![0.0; dim];
        rhs(t0, &y0, &mut k1).map_err(OdeError::Rhs)?;
        let k = [k1, vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim],
            vec![0.0; dim], vec![0.0; dim]];
        let mut stepper = Stepper {
            rhs,
            t: t0,
            y: y0,
            k,
            h: 0.0,
            opts,
            stats: OdeStats { rhs_evals: 1, ..OdeStats::default() },
            just_rejected: false,
        };
        stepper.h = opts.h_init.unwrap_or(0.0);
        Ok(stepper)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.y
    }

    /// Derivative at the current `(t, y)`.
    pub fn derivative(&self) -> &[f64] {
        &self.k[0]
    }

    /// Moves the stepper to a new state, re-evaluating the derivative.
    /// Used by drivers that jump across non-smooth points.
    pub fn reset(&mut self, t: f64, y: Vec<f64>, h_suggestion: Option<f64>) -> Result<(), OdeError<E>> {
        self.y = y;
        self.t = t;
        let (rhs, k1) = (&mut self.rhs, &mut self.k[0]);
        rhs(t, &self.y, k1).map_err(OdeError::Rhs)?;
        self.stats.rhs_evals += 1;
        self.h = h_suggestion.unwrap_or(0.0);
        self.just_rejected = false;
        Ok(())
    }

    /// Advances one accepted step toward `t_limit` (never beyond it).
    pub fn step(&mut self, t_limit: f64) -> Result<DenseStep, OdeError<E>> {
        let dim = self.y.len();
        let dir = if t_limit >= self.t { 1.0 } else { -1.0 };
        let span = (t_limit - self.t).abs();
        if self.h == 0.0 {
            self.h = dir * self.initial_step(t_limit);
        }
        if self.h * dir <= 0.0 {
            self.h = -self.h;
        }

        let mut y1 = vec![0.0; dim];
        let mut err_vec = vec![0.0; dim];
        let mut y_stage = vec![0.0; dim];
        let mut last_rhs_error: Option<E> = None;

        loop {
            let mut h = self.h.abs().min(span).max(f64::MIN_POSITIVE) * dir;
            // Land exactly on the limit instead of leaving a sliver behind.
            if (self.t + 1.01 * h - t_limit) * dir >= 0.0 {
                h = t_limit - self.t;
            }
            let h_floor = self.opts.h_min_scale * self.t.abs().max(1.0);
            if h.abs() < h_floor {
                return Err(OdeError::StepSizeUnderflow { t: self.t, rhs_error: last_rhs_error });
            }

            match self.try_stages(h, &mut y_stage, &mut y1, &mut err_vec) {
                Ok(()) => {}
                Err(e) => {
                    // Domain failure inside the trial step: shrink and retry.
                    last_rhs_error = Some(e);
                    self.stats.rejected += 1;
                    self.just_rejected = true;
                    self.h = 0.5 * h;
                    continue;
                }
            }

            let mut err_sq = 0.0;
            let mut finite = true;
            for i in 0..dim {
                if !y1[i].is_finite() {
                    finite = false;
                    break;
                }
                let sc = self.opts.abs_tol
                    + self.opts.rel_tol * self.y[i].abs().max(y1[i].abs());
                let e = err_vec[i] / sc;
                err_sq += e * e;
            }
            let err =
                if finite { crate::math::sqrt(err_sq / dim as f64) } else { f64::INFINITY };

            if err <= 1.0 {
                let dense = self.dense_step(h, &y1);
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * crate::math::powf(err, -0.2)).clamp(0.2, 5.0)
                };
                let fac = if self.just_rejected { fac.min(1.0) } else { fac };
                self.t += h;
                self.y.copy_from_slice(&y1);
                self.k.swap(0, 6); // FSAL
                self.h = h * fac;
                self.stats.accepted += 1;
                self.just_rejected = false;
                return Ok(dense);
            }

            self.stats.rejected += 1;
            self.just_rejected = true;
            let fac = (0.9 * crate::math::powf(err, -0.2)).clamp(0.2, 0.9);
            self.h = h * fac;
        }
    }

    fn try_stages(
        &mut self,
        h: f64,
        y_stage: &mut [f64],
        y1: &mut [f64],
        err_vec: &mut [f64],
    ) -> Result<(), E> {
        let dim = self.y.len();
        let tableau: [&[f64]; 6] = [&A2, &A3, &A4, &A5, &A6, &A7];
        for (stage, row) in tableau.iter().enumerate() {
            for (i, (stage, &y0)) in y_stage.iter_mut().zip(&self.y).enumerate().take(dim) {
                let mut acc = 0.0;
                for (j, &a) in row.iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                *stage = y0 + h * acc;
            }
            let t_stage = self.t + C[stage + 1] * h;
            let (rhs, ks) = (&mut self.rhs, &mut self.k[stage + 1]);
            self.stats.rhs_evals += 1;
            rhs(t_stage, y_stage, ks)?;
        }
        // Stage 7 state is the 5th-order solution (FSAL property).
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, &a) in A7.iter().enumerate() {
                acc += a * self.k[j][i];
            }
            y1[i] = self.y[i] + h * acc;
            let mut err = 0.0;
            for (j, &e) in E.iter().enumerate() {
                err += e * self.k[j][i];
            }
            err_vec[i] = h * err;
        }
        Ok(())
    }

    fn dense_step(&self, h: f64, y1: &[f64]) -> DenseStep {
        let dim = self.y.len();
        let mut rcont: [Vec<f64>; 5] = [
            vec![0.0; dim],
            vec![0.0; dim],
            vec![0.0; dim],
            vec![0.0; dim],
            vec![0.0; dim],
        ];
        for i in 0..dim {
            let dy = y1[i] - self.y[i];
            rcont[0][i] = self.y[i];
            rcont[1][i] = dy;
            rcont[2][i] = h * self.k[0][i] - dy;
            rcont[3][i] = dy - h * self.k[6][i] - rcont[2][i];
            let mut acc = 0.0;
            for (j, &d) in D.iter().enumerate() {
                acc += d * self.k[j][i];
            }
            rcont[4][i] = h * acc;
        }
        DenseStep { t0: self.t, t1: self.t + h, rcont }
    }

    /// Step-size guess from the derivative magnitude at the start point.
    fn initial_step(&mut self, t_limit: f64) -> f64 {
        let dim = self.y.len();
        let span = (t_limit - self.t).abs();
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        for i in 0..dim {
            let sc = self.opts.abs_tol + self.opts.rel_tol * self.y[i].abs();
            d0 += (self.y[i] / sc) * (self.y[i] / sc);
            d1 += (self.k[0][i] / sc) * (self.k[0][i] / sc);
        }
        let d0 = crate::math::sqrt(d0 / dim as f64);
        let d1 = crate::math::sqrt(d1 / dim as f64);
        let h0: f64 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(span).max(f64::MIN_POSITIVE)
    }
}
