//! Reduction of a nonlinearity pair to single-peakon dynamics.
//!
//! Substituting the peaked ansatz `u = A(t) exp(-|x - X(t)|)` into the
//! evolution equation and matching the jump conditions at the peak collapses
//! the PDE to two ODEs,
//!
//! ```text
//!     dA/dt = -A f0(A),        dX/dt = g0(A),
//! ```
//!
//! where each reduced function is the average of the even part of the
//! corresponding nonlinearity across the peak:
//!
//! ```text
//!     h0(A) = (1/A) \int_0^A (h(A, y) + h(A, -y)) / 2  dy.
//! ```
//!
//! The peak acceleration is `d2X/dt2 = -A f0(A) alpha(A)` with
//! `alpha = g0'`. This module computes `f0`, `g0`, and `alpha` numerically
//! (with a symbolic fast path for `alpha`), handles the removable `A -> 0`
//! limit, and classifies the qualitative kind of single-peakon motion a
//! nonlinearity pair produces.

use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;

use alloc::collections::BTreeMap;

use crate::expr::{EvalError, ExprAst, NonlinearitySpec, Which};
use crate::math;
use crate::quad::{self, QuadError, QuadOptions};

/// Amplitudes this close to zero are handled by extrapolating the removable
/// limit instead of dividing by `A`.
const F0_ZERO_GUARD: f64 = 1e-12;
/// `alpha` suffers cancellation in `(g+(A,A) - g0(A)) / A`, so it switches to
/// the limit earlier.
const ALPHA_ZERO_GUARD: f64 = 1e-7;
/// Amplitude where the zero-limit ladder starts; halved twice for the
/// Richardson fit.
const LIMIT_LADDER_TOP: f64 = 1e-4;
/// Entry cap for the memo cache; the cache is flushed when it fills.
const CACHE_CAP: usize = 1 << 16;

const FID_F0: u8 = 0;
const FID_G0: u8 = 1;
const FID_ALPHA: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum ReduceError {
    /// A nonlinearity failed to evaluate inside a reduction integral.
    Eval { which: Which, error: EvalError },
    /// The reduction integral did not converge.
    Quadrature { which: Which, achieved: f64, requested: f64 },
    /// The reduced function has no finite limit as the amplitude goes to
    /// zero.
    SingularOrigin { which: Which },
    /// The requested amplitude is outside the domain where the reduced
    /// dynamics are defined (raised by designed or tabulated systems).
    Domain { value: f64, lo: f64, hi: f64 },
}

impl fmt::Display for ReduceError {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReduceError::Eval { which, error } => write!(out, "reducing {which}: {error}"),
            ReduceError::Quadrature { which, achieved, requested } => write!(
                out,
                "reducing {which}: quadrature stalled at error {achieved:e} (requested {requested:e})"
            ),
            ReduceError::SingularOrigin { which } => {
                write!(out, "reduced {which} has no finite limit at zero amplitude")
            }
            ReduceError::Domain { value, lo, hi } => {
                write!(out, "amplitude {value} is outside the reduced domain [{lo}, {hi}]")
            }
        }
    }
}

impl core::error::Error for ReduceError {}

impl ReduceError {
    fn from_quad(which: Which, err: QuadError<EvalError>) -> Self {
        match err {
            QuadError::Integrand(error) => ReduceError::Eval { which, error },
            QuadError::NonConvergence { achieved, requested } => {
                ReduceError::Quadrature { which, achieved, requested }
            }
        }
    }
}

/// The reduced single-peakon vector field. Implemented by [`ReducedSystem`]
/// and by designed systems that bypass the expression layer.
pub trait ReducedDynamics {
    /// Amplitude decay rate: `dA/dt = -A f0(A)`.
    fn f0(&self, a: f64) -> Result<f64, ReduceError>;
    /// Peak speed: `dX/dt = g0(A)`.
    fn g0(&self, a: f64) -> Result<f64, ReduceError>;
    /// `alpha = g0'`, so the peak acceleration is `-A f0(A) alpha(A)`.
    fn alpha(&self, a: f64) -> Result<f64, ReduceError>;
}

/// Reduced dynamics computed from a [`NonlinearitySpec`] by adaptive
/// quadrature, with a small exact-match memo cache in front of the three
/// reduced functions.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    spec: NonlinearitySpec,
    quad_opts: QuadOptions,
    deriv_step_scale: f64,
    dg_du: Option<ExprAst>,
    cache_enabled: bool,
    cache: RefCell<BTreeMap<(u8, u64), (u64, f64)>>,
}

impl ReducedSystem {
    pub fn new(spec: NonlinearitySpec) -> Self {
        let dg_du = spec.g.derivative_u();
        ReducedSystem {
            spec,
            quad_opts: QuadOptions::with_tol(1e-12),
            deriv_step_scale: 6e-6,
            dg_du,
            cache_enabled: true,
            cache: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn with_quad_tol(mut self, tol: f64) -> Self {
        self.quad_opts = QuadOptions::with_tol(tol);
        self
    }

    pub fn with_cache(mut self, enabled: bool) -> Self {
        self.cache_enabled = enabled;
        if !enabled {
            self.cache.borrow_mut().clear();
        }
        self
    }

    pub fn spec(&self) -> &NonlinearitySpec {
        &self.spec
    }

    /// `\int_0^b h(u, y) dy` for `h = f` or `h = g` at frozen `u`. This is
    /// the building block of the multi-peakon vector field, where the slope
    /// argument jumps across each peak.
    pub fn antiderivative(&self, which: Which, u: f64, b: f64) -> Result<f64, ReduceError> {
        let ast = self.spec.expr(which);
        let params = &self.spec.params;
        let result = quad::integrate(|y| ast.eval(u, y, params), 0.0, b, &self.quad_opts)
            .map_err(|e| ReduceError::from_quad(which, e))?;
        Ok(result.integral)
    }

    fn cached(
        &self,
        fid: u8,
        a: f64,
        compute: impl FnOnce() -> Result<f64, ReduceError>,
    ) -> Result<f64, ReduceError> {
        if !self.cache_enabled {
            return compute();
        }
        let key = (fid, math::round_sig(a, 12).to_bits());
        let exact = a.to_bits();
        if let Some(&(bits, value)) = self.cache.borrow().get(&key) {
            // Only an exact argument match may reuse the stored value, so
            // cached and uncached evaluations agree bit for bit.
            if bits == exact {
                return Ok(value);
            }
        }
        let value = compute()?;
        let mut map = self.cache.borrow_mut();
        if map.len() >= CACHE_CAP {
            map.clear();
        }
        map.insert(key, (exact, value));
        Ok(value)
    }

    /// `(1/a) \int_0^a` of the even part of `ast` in its slope argument.
    fn reduce0_direct(&self, ast: &ExprAst, which: Which, a: f64) -> Result<f64, ReduceError> {
        let params = &self.spec.params;
        let result = quad::integrate(
            |y| ast.even_odd_at(a, y, params).map(|(even, _)| even),
            0.0,
            a,
            &self.quad_opts,
        )
        .map_err(|e| ReduceError::from_quad(which, e))?;
        Ok(result.integral / a)
    }

    fn reduce0(&self, ast: &ExprAst, which: Which, a: f64) -> Result<f64, ReduceError> {
        if a.abs() < F0_ZERO_GUARD {
            let side = if a < 0.0 { -1.0 } else { 1.0 };
            return self.limit_at_zero(which, side, |x| self.reduce0_direct(ast, which, x));
        }
        self.reduce0_direct(ast, which, a)
    }

    /// Richardson extrapolation of `eval` down a halving ladder toward zero
    /// amplitude. Detects genuinely singular limits by their growth.
    fn limit_at_zero(
        &self,
        which: Which,
        side: f64,
        eval: impl Fn(f64) -> Result<f64, ReduceError>,
    ) -> Result<f64, ReduceError> {
        let v1 = eval(side * LIMIT_LADDER_TOP)?;
        let v2 = eval(side * LIMIT_LADDER_TOP * 0.5)?;
        let v3 = eval(side * LIMIT_LADDER_TOP * 0.25)?;
        let d1 = v1 - v2;
        let d2 = v2 - v3;
        let scale = v3.abs().max(1.0);
        if d2.abs() <= 1e-12 * scale && d1.abs() <= 1e-11 * scale {
            return Ok(v3);
        }
        let ratio = d1 / d2;
        if ratio.is_finite() && ratio > 1.3 {
            // v(a) ~ L + c a^p gives d1/d2 = 2^p; eliminate the leading term.
            let limit = v3 + (v3 - v2) / (ratio - 1.0);
            if limit.is_finite() {
                return Ok(limit);
            }
            return Err(ReduceError::SingularOrigin { which });
        }
        let growing = v3.abs() > 1.02 * v2.abs() && v2.abs() > 1.02 * v1.abs();
        if growing && v3.abs() > 1e-6 {
            return Err(ReduceError::SingularOrigin { which });
        }
        Ok(v3)
    }

    fn g0_value(&self, a: f64) -> Result<f64, ReduceError> {
        self.cached(FID_G0, a, || self.reduce0(&self.spec.g, Which::G, a))
    }

    fn alpha_value(&self, a: f64) -> Result<f64, ReduceError> {
        if a.abs() < ALPHA_ZERO_GUARD {
            let side = if a < 0.0 { -1.0 } else { 1.0 };
            return self.limit_at_zero(Which::G, side, |x| self.alpha_at(x));
        }
        self.alpha_at(a)
    }

    fn alpha_at(&self, a: f64) -> Result<f64, ReduceError> {
        if let Some(dg) = &self.dg_du {
            if let Ok(value) = self.alpha_symbolic(dg, a) {
                return Ok(value);
            }
        }
        self.alpha_numeric(a)
    }

    /// Differentiating the reduction integral in `A`:
    /// `g0' = (g+(A, A) - g0(A)) / A + (1/A) \int_0^A (dg/du)+(A, y) dy`.
    fn alpha_symbolic(&self, dg: &ExprAst, a: f64) -> Result<f64, ReduceError> {
        let g_at_edge = self
            .spec
            .g
            .even_odd_at(a, a, &self.spec.params)
            .map_err(|error| ReduceError::Eval { which: Which::G, error })?
            .0;
        let g0 = self.g0_value(a)?;
        let mean_dg = self.reduce0_direct(dg, Which::G, a)?;
        Ok((g_at_edge - g0) / a + mean_dg)
    }

    /// Fourth-order central difference of `g0`, used when the symbolic
    /// derivative is unavailable (`abs`/`sign` in the tree) or fails.
    fn alpha_numeric(&self, a: f64) -> Result<f64, ReduceError> {
        let h = self.deriv_step_scale * a.abs().max(1.0);
        let g = |x: f64| self.reduce0(&self.spec.g, Which::G, x);
        let value =
            (-g(a + 2.0 * h)? + 8.0 * g(a + h)? - 8.0 * g(a - h)? + g(a - 2.0 * h)?) / (12.0 * h);
        Ok(value)
    }
}

impl ReducedDynamics for ReducedSystem {
    fn f0(&self, a: f64) -> Result<f64, ReduceError> {
        self.cached(FID_F0, a, || self.reduce0(&self.spec.f, Which::F, a))
    }

    fn g0(&self, a: f64) -> Result<f64, ReduceError> {
        self.g0_value(a)
    }

    fn alpha(&self, a: f64) -> Result<f64, ReduceError> {
        self.cached(FID_ALPHA, a, || self.alpha_value(a))
    }
}

/// Qualitative kind of single-peakon motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "kebab-case"))]
pub enum PeakonKind {
    /// `f0 = 0` and `g0 = 0`: the peakon does not move or change.
    Stationary,
    /// `f0 = 0`: constant amplitude, travelling at the constant speed
    /// `g0(A)`.
    Travelling,
    /// `f0 != 0` but `alpha = 0`: the amplitude evolves while the peak moves
    /// at a constant speed.
    DynamicalConstantSpeed,
    /// Amplitude and speed both evolve.
    DynamicalAccelerating,
}

impl fmt::Display for PeakonKind {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PeakonKind::Stationary => "stationary",
            PeakonKind::Travelling => "travelling",
            PeakonKind::DynamicalConstantSpeed => "dynamical-constant-speed",
            PeakonKind::DynamicalAccelerating => "dynamical-accelerating",
        };
        out.write_str(name)
    }
}

/// One probe row backing a [`KindReport`].
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct KindSample {
    pub a: f64,
    pub f0: f64,
    pub g0: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct KindReport {
    pub kind: PeakonKind,
    pub samples: Vec<KindSample>,
}

/// Default amplitude probes for [`classify_peakon_kind`].
pub const DEFAULT_KIND_SAMPLES: [f64; 8] = [0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0];

/// Probes the reduced functions at the given amplitudes and reports the kind
/// of motion. Amplitudes where the reduction fails (domain edges) are
/// skipped; the classification uses the rest. Pass
/// [`DEFAULT_KIND_SAMPLES`] unless the admissible amplitude range is known.
pub fn classify_peakon_kind(
    sys: &dyn ReducedDynamics,
    probes: &[f64],
) -> Result<KindReport, ReduceError> {
    let mut samples = Vec::new();
    let mut last_error = None;
    for &a in probes {
        let row = (|| -> Result<KindSample, ReduceError> {
            Ok(KindSample { a, f0: sys.f0(a)?, g0: sys.g0(a)?, alpha: sys.alpha(a)? })
        })();
        match row {
            Ok(sample) => samples.push(sample),
            Err(e) => last_error = Some(e),
        }
    }
    if samples.is_empty() {
        return Err(last_error.unwrap_or(ReduceError::SingularOrigin { which: Which::F }));
    }
    let near_zero = |v: f64, a: f64| v.abs() <= 1e-9 * (1.0 + a.abs());
    let f_zero = samples.iter().all(|s| near_zero(s.f0, s.a));
    let g_zero = samples.iter().all(|s| near_zero(s.g0, s.a));
    let alpha_zero = samples.iter().all(|s| near_zero(s.alpha, s.a));
    let kind = if f_zero && g_zero {
        PeakonKind::Stationary
    } else if f_zero {
        PeakonKind::Travelling
    } else if alpha_zero {
        PeakonKind::DynamicalConstantSpeed
    } else {
        PeakonKind::DynamicalAccelerating
    };
    Ok(KindReport { kind, samples })
}
