//! Catalog of peakon motions with closed-form amplitude and position laws,
//! plus inverse-design helpers.
//!
//! Each [`CatalogEntry`] bundles an equation spec (sources for `f` and `g`
//! with default parameters), a closed-form trajectory on its validity
//! window, and suggested simulation settings. The entries double as test
//! oracles: the integrator can be cross-checked against
//! [`CatalogEntry::closed_form`] without re-deriving anything by hand.
//!
//! The design helpers run the reduction backwards: [`design_breather`]
//! produces an equation whose single peakon oscillates harmonically, and
//! [`design_periodic`] builds reduced dynamics that reproduce an arbitrary
//! sampled periodic amplitude profile.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{NonlinearitySpec, SpecError};
use crate::math;
use crate::peakon::PeakonState;
use crate::reduce::{ReduceError, ReducedDynamics, ReducedSystem};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum CatalogError {
    UnknownId(String),
    UnknownParameter(String),
    /// The closed form is not defined at the requested time.
    OutsideDomain { t: f64, lo: f64, hi: f64 },
    /// A parameter combination outside the entry's validity assumptions.
    BadParameter { name: &'static str, value: f64 },
}

impl fmt::Display for CatalogError {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatalogError::UnknownId(id) => write!(out, "no catalog entry named `{id}`"),
            CatalogError::UnknownParameter(name) => {
                write!(out, "entry has no parameter named `{name}`")
            }
            CatalogError::OutsideDomain { t, lo, hi } => {
                write!(out, "t = {t} lies outside the validity window ({lo}, {hi})")
            }
            CatalogError::BadParameter { name, value } => {
                write!(out, "parameter `{name}` = {value} is outside the entry's valid range")
            }
        }
    }
}

impl core::error::Error for CatalogError {}

#[derive(Debug, Clone, PartialEq)]
pub enum DesignError {
    BadParameter { name: &'static str, value: f64 },
    TooFewPoints { len: usize },
    /// Profile samples are not strictly monotone over the half-period (a
    /// constant profile is rejected for the same reason).
    NotMonotone,
    GridNotIncreasing,
    Spec(SpecError),
}

impl fmt::Display for DesignError {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignError::BadParameter { name, value } => {
                write!(out, "design parameter `{name}` = {value} is invalid")
            }
            DesignError::TooFewPoints { len } => {
                write!(out, "profile needs at least 4 samples, got {len}")
            }
            DesignError::NotMonotone => {
                out.write_str("profile must be strictly monotone over the half-period")
            }
            DesignError::GridNotIncreasing => {
                out.write_str("profile sample times must be strictly increasing")
            }
            DesignError::Spec(err) => write!(out, "{err}"),
        }
    }
}

impl core::error::Error for DesignError {}

impl From<SpecError> for DesignError {
    fn from(err: SpecError) -> Self {
        DesignError::Spec(err)
    }
}

// ---------------------------------------------------------------------------
// Catalog entries
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Form {
    Power,
    StationaryPower,
    Travelling,
    Asymptotic,
    Reversing,
    Dissipating,
    Blowup,
    Breather,
}

/// One cataloged motion: equation sources, default parameters, closed-form
/// trajectory, and suggested simulation window.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub summary: &'static str,
    pub f_src: &'static str,
    pub g_src: &'static str,
    pub params: BTreeMap<String, f64>,
    /// Whether simulations should enable amplitude branch switching.
    pub oscillatory: bool,
    pub suggested_start: f64,
    pub suggested_end: f64,
    form: Form,
}

fn param_map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// All catalog entries with their default parameters.
pub fn entries() -> Vec<CatalogEntry> {
    alloc::vec![
        CatalogEntry {
            id: "power-family",
            summary: "power-law amplitude decay with algebraic peak drift",
            f_src: "k*u^p",
            g_src: "lam*u^q",
            params: param_map(&[
                ("k", 1.0),
                ("p", 1.0),
                ("lam", 1.0),
                ("q", 2.0),
                ("t0", 0.0),
                ("x0", 0.0),
            ]),
            oscillatory: false,
            suggested_start: 0.25,
            suggested_end: 5.25,
            form: Form::Power,
        },
        CatalogEntry {
            id: "stationary-family",
            summary: "power-law amplitude decay with a motionless peak",
            f_src: "k*u^p",
            g_src: "lam*u^q*ux",
            params: param_map(&[
                ("k", 1.0),
                ("p", 1.0),
                ("lam", 1.0),
                ("q", 1.0),
                ("t0", 0.0),
                ("x0", 0.0),
            ]),
            oscillatory: false,
            suggested_start: 0.25,
            suggested_end: 5.25,
            form: Form::StationaryPower,
        },
        CatalogEntry {
            id: "travelling-ex1",
            summary: "constant-amplitude peakon travelling at speed (1 + lam/3) a^(p+1)",
            f_src: "k*u^p*ux",
            g_src: "u^(p-1)*(u^2+lam*ux^2)",
            params: param_map(&[
                ("k", 1.0),
                ("p", 2.0),
                ("lam", 1.0),
                ("a", 1.0),
                ("t0", 0.0),
                ("x0", 0.0),
            ]),
            oscillatory: false,
            suggested_start: 0.0,
            suggested_end: 5.0,
            form: Form::Travelling,
        },
        CatalogEntry {
            id: "asymptotic-ex2",
            summary: "amplitude climbing from 1 to 2 between travelling-wave asymptotes",
            f_src: "k*(u-2)*(u-1)",
            g_src: "lam*u",
            params: param_map(&[("k", 1.0), ("lam", 1.0), ("t0", 0.0), ("x0", 0.0)]),
            oscillatory: false,
            suggested_start: -10.0,
            suggested_end: 10.0,
            form: Form::Asymptotic,
        },
        CatalogEntry {
            id: "reversing-ex3",
            summary: "amplitude climbing from 1 to 2 while the peak brakes and reverses",
            f_src: "k*(u-2)*(u-1)",
            g_src: "lam*(3-2*u)",
            params: param_map(&[("k", 1.0), ("lam", 1.0), ("t0", 0.0), ("x0", 0.0)]),
            oscillatory: false,
            suggested_start: -5.0,
            suggested_end: 5.0,
            form: Form::Reversing,
        },
        CatalogEntry {
            id: "dissipating-ex5",
            summary: "logistic amplitude decay to zero with finite total displacement",
            f_src: "k*(a-u)",
            g_src: "lam*u",
            params: param_map(&[("k", 1.0), ("a", 1.0), ("lam", 1.0), ("t0", 0.0), ("x0", 0.0)]),
            oscillatory: false,
            suggested_start: 0.0,
            suggested_end: 20.0,
            form: Form::Dissipating,
        },
        CatalogEntry {
            id: "blowup-ex5",
            summary: "logistic amplitude growth blowing up at a finite time",
            f_src: "k*(a-u)",
            g_src: "lam*u",
            params: param_map(&[("k", 1.0), ("a", 1.0), ("lam", 1.0), ("t0", 1.0), ("x0", 0.0)]),
            oscillatory: false,
            suggested_start: 0.0,
            suggested_end: 1.0,
            form: Form::Blowup,
        },
        CatalogEntry {
            id: "breather",
            summary: "harmonically oscillating amplitude with a constant-speed peak",
            f_src: "kappa*sqrt(a^2 - u^2)/u",
            g_src: "c",
            params: param_map(&[
                ("a", 1.0),
                ("kappa", 2.0),
                ("c", 0.0),
                ("t0", 0.0),
                ("x0", 0.0),
            ]),
            oscillatory: true,
            suggested_start: 0.0,
            suggested_end: 2.0 * core::f64::consts::PI,
            form: Form::Breather,
        },
    ]
}

/// Looks up an entry by id.
pub fn find(id: &str) -> Option<CatalogEntry> {
    entries().into_iter().find(|e| e.id == id)
}

impl CatalogEntry {
    fn param(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or(f64::NAN)
    }

    /// Returns a copy with the given parameter overrides applied.
    pub fn with_params(mut self, overrides: &[(&str, f64)]) -> Result<Self, CatalogError> {
        for (name, value) in overrides {
            match self.params.get_mut(*name) {
                Some(slot) => *slot = *value,
                None => return Err(CatalogError::UnknownParameter((*name).to_string())),
            }
        }
        self.check_params()?;
        Ok(self)
    }

    fn check_params(&self) -> Result<(), CatalogError> {
        let bad = |name: &'static str, value: f64| CatalogError::BadParameter { name, value };
        match self.form {
            Form::Power | Form::StationaryPower => {
                if self.param("p") == 0.0 || !self.param("p").is_finite() {
                    return Err(bad("p", self.param("p")));
                }
                if self.param("k") == 0.0 {
                    return Err(bad("k", self.param("k")));
                }
            }
            Form::Travelling => {
                if self.param("a") <= 0.0 {
                    return Err(bad("a", self.param("a")));
                }
            }
            Form::Asymptotic | Form::Reversing => {
                if self.param("k") == 0.0 {
                    return Err(bad("k", self.param("k")));
                }
            }
            Form::Dissipating | Form::Blowup => {
                if self.param("a") <= 0.0 {
                    return Err(bad("a", self.param("a")));
                }
                if self.param("k") * self.param("a") <= 0.0 {
                    return Err(bad("k", self.param("k")));
                }
            }
            Form::Breather => {
                if self.param("a") <= 0.0 {
                    return Err(bad("a", self.param("a")));
                }
                if self.param("kappa") == 0.0 || !self.param("kappa").is_finite() {
                    return Err(bad("kappa", self.param("kappa")));
                }
            }
        }
        Ok(())
    }

    /// Parses the entry's equation spec with its current parameters.
    pub fn spec(&self) -> Result<NonlinearitySpec, SpecError> {
        NonlinearitySpec::parse(self.f_src, self.g_src, self.params.clone())
    }

    /// Builds the reduced system for the entry's equation.
    pub fn system(&self) -> Result<ReducedSystem, SpecError> {
        Ok(ReducedSystem::new(self.spec()?))
    }

    /// Time window on which the closed form is defined (open interval).
    pub fn domain(&self) -> (f64, f64) {
        let t0 = self.param("t0");
        match self.form {
            Form::Power | Form::StationaryPower => {
                if self.param("p") * self.param("k") > 0.0 {
                    (t0, f64::INFINITY)
                } else {
                    (f64::NEG_INFINITY, t0)
                }
            }
            Form::Blowup => (f64::NEG_INFINITY, t0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Evaluates the entry's closed-form trajectory at time `t`.
    pub fn closed_form(&self, t: f64) -> Result<PeakonState, CatalogError> {
        self.check_params()?;
        let (lo, hi) = self.domain();
        if !(t > lo && t < hi) {
            return Err(CatalogError::OutsideDomain { t, lo, hi });
        }
        let t0 = self.param("t0");
        let x0 = self.param("x0");
        let state = match self.form {
            Form::Power | Form::StationaryPower => {
                let (k, p) = (self.param("k"), self.param("p"));
                let (lam, q) = (self.param("lam"), self.param("q"));
                let s = p * k * (t - t0);
                let a = math::powf(s, -1.0 / p);
                let x = if self.form == Form::StationaryPower {
                    x0
                } else if q == p {
                    x0 + lam / (p * k) * math::ln(s)
                } else {
                    x0 + lam / (k * (p - q)) * math::powf(s, 1.0 - q / p)
                };
                PeakonState::new(t, a, x)
            }
            Form::Travelling => {
                let (a, p, lam) = (self.param("a"), self.param("p"), self.param("lam"));
                let c = (1.0 + lam / 3.0) * math::powf(a, p + 1.0);
                PeakonState::new(t, a, x0 + c * (t - t0))
            }
            Form::Asymptotic | Form::Reversing => {
                let (k, lam) = (self.param("k"), self.param("lam"));
                let e = math::exp(2.0 * k * (t0 - t));
                let s = math::sqrt(1.0 + e);
                let a = 1.0 + 1.0 / s;
                let x = if self.form == Form::Asymptotic {
                    x0 + 2.0 * lam * (t - t0) + lam / k * math::ln(1.0 + s)
                } else {
                    x0 + lam * (t0 - t) - 2.0 * lam / k * math::ln(1.0 + s)
                };
                PeakonState::new(t, a, x)
            }
            Form::Dissipating => {
                let (k, a, lam) = (self.param("k"), self.param("a"), self.param("lam"));
                let e = math::exp(-k * a * (t - t0));
                let amp = a * e / (1.0 + e);
                let x = x0 + lam / k * math::ln(2.0 / (1.0 + e));
                PeakonState::new(t, amp, x)
            }
            Form::Blowup => {
                let (k, a, lam) = (self.param("k"), self.param("a"), self.param("lam"));
                let e = math::exp(-k * a * (t - t0));
                let amp = a / (1.0 - 1.0 / e);
                let x = x0 - lam / k * math::ln((1.0 - e).abs());
                PeakonState::new(t, amp, x)
            }
            Form::Breather => {
                let (a, kappa, c) = (self.param("a"), self.param("kappa"), self.param("c"));
                PeakonState::new(t, a * math::cos(kappa * (t - t0)), x0 + c * (t - t0))
            }
        };
        if state.a.is_finite() && state.x.is_finite() {
            Ok(state)
        } else {
            Err(CatalogError::OutsideDomain { t, lo, hi })
        }
    }

    /// Closed-form state at the suggested start time, for seeding simulations.
    pub fn suggested_init(&self) -> Result<PeakonState, CatalogError> {
        self.closed_form(self.suggested_start)
    }
}

// ---------------------------------------------------------------------------
// Inverse design
// ---------------------------------------------------------------------------

/// Builds an equation whose single peakon oscillates as
/// `A = a cos(kappa t)` while travelling at constant speed `c`.
///
/// The returned spec has `f = kappa*sqrt(a^2 - u^2)/u` and `g = c`; `f` is
/// odd in `u`, so the amplitude equation is smooth through `A = 0` and the
/// only branch points are the turning amplitudes `A = ±a`.
pub fn design_breather(a: f64, kappa: f64, c: f64) -> Result<NonlinearitySpec, DesignError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(DesignError::BadParameter { name: "a", value: a });
    }
    if kappa == 0.0 || !kappa.is_finite() {
        return Err(DesignError::BadParameter { name: "kappa", value: kappa });
    }
    if !c.is_finite() {
        return Err(DesignError::BadParameter { name: "c", value: c });
    }
    Ok(NonlinearitySpec::parse(
        "kappa*sqrt(a^2 - u^2)/u",
        "c",
        param_map(&[("a", a), ("kappa", kappa), ("c", c)]),
    )?)
}

/// A periodic amplitude profile over one monotone half-period.
pub enum PeriodicProfile<'a> {
    /// Profile callable on `[0, half_period]`, strictly monotone there.
    Function { phi: &'a dyn Fn(f64) -> f64, half_period: f64 },
    /// Sampled profile on a strictly increasing grid covering one monotone
    /// half-period.
    Table { t: Vec<f64>, phi: Vec<f64> },
}

/// Reduced dynamics whose amplitude retraces a prescribed periodic profile
/// while the peak moves at a constant speed.
///
/// Built by [`design_periodic`]. The profile is stored as a monotone cubic
/// interpolant; amplitudes outside the profile's range are domain errors,
/// which is exactly the boundary behaviour the oscillatory integrator uses
/// to locate turning points.
pub struct PeriodicDesign {
    s: Vec<f64>,
    phi: Vec<f64>,
    tangents: Vec<f64>,
    speed: f64,
    lo: f64,
    hi: f64,
}

impl PeriodicDesign {
    /// Amplitude range `[lo, hi]` covered by the profile.
    pub fn amplitude_range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    fn segment(&self, s: f64) -> usize {
        match self.s.binary_search_by(|v| v.partial_cmp(&s).unwrap_or(core::cmp::Ordering::Less)) {
            Ok(i) => i.min(self.s.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.s.len() - 2),
        }
    }

    fn value(&self, s: f64) -> f64 {
        let i = self.segment(s);
        let h = self.s[i + 1] - self.s[i];
        let th = (s - self.s[i]) / h;
        let (y0, y1) = (self.phi[i], self.phi[i + 1]);
        let (m0, m1) = (self.tangents[i], self.tangents[i + 1]);
        let th2 = th * th;
        let th3 = th2 * th;
        y0 * (2.0 * th3 - 3.0 * th2 + 1.0)
            + h * m0 * (th3 - 2.0 * th2 + th)
            + y1 * (-2.0 * th3 + 3.0 * th2)
            + h * m1 * (th3 - th2)
    }

    fn slope(&self, s: f64) -> f64 {
        let i = self.segment(s);
        let h = self.s[i + 1] - self.s[i];
        let th = (s - self.s[i]) / h;
        let (y0, y1) = (self.phi[i], self.phi[i + 1]);
        let (m0, m1) = (self.tangents[i], self.tangents[i + 1]);
        let th2 = th * th;
        (6.0 * th2 - 6.0 * th) * (y0 - y1) / h
            + m0 * (3.0 * th2 - 4.0 * th + 1.0)
            + m1 * (3.0 * th2 - 2.0 * th)
    }

    /// Inverts the interpolant by bisection.
    fn invert(&self, target: f64) -> f64 {
        let increasing = self.phi[self.phi.len() - 1] > self.phi[0];
        let (mut lo, mut hi) = (self.s[0], self.s[self.s.len() - 1]);
        let tol = 1e-12 * (hi - lo).abs().max(1.0);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            let above = self.value(mid) >= target;
            if above == increasing {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

impl ReducedDynamics for PeriodicDesign {
    fn f0(&self, a: f64) -> Result<f64, ReduceError> {
        if !(a >= self.lo && a <= self.hi) {
            return Err(ReduceError::Domain { value: a, lo: self.lo, hi: self.hi });
        }
        let s = self.invert(a);
        Ok(-self.slope(s) / a)
    }

    fn g0(&self, _a: f64) -> Result<f64, ReduceError> {
        Ok(self.speed)
    }

    fn alpha(&self, _a: f64) -> Result<f64, ReduceError> {
        Ok(0.0)
    }
}

/// Designs reduced dynamics whose amplitude follows the periodic profile
/// `phi` (given over one monotone half-period) with constant peak speed `c`.
///
/// The amplitude equation `dA/dt = -A f0(A)` with the returned `f0`
/// reproduces `A(t) = phi(t)` on the half-period; simulating with branch
/// switching enabled extends it periodically.
pub fn design_periodic(profile: PeriodicProfile<'_>, c: f64) -> Result<PeriodicDesign, DesignError> {
    if !c.is_finite() {
        return Err(DesignError::BadParameter { name: "c", value: c });
    }
    let (s, phi) = match profile {
        PeriodicProfile::Function { phi, half_period } => {
            if !(half_period > 0.0 && half_period.is_finite()) {
                return Err(DesignError::BadParameter { name: "half_period", value: half_period });
            }
            let n = 1025;
            let s: Vec<f64> =
                (0..n).map(|i| half_period * i as f64 / (n - 1) as f64).collect();
            let phi: Vec<f64> = s.iter().map(|&t| phi(t)).collect();
            (s, phi)
        }
        PeriodicProfile::Table { t, phi } => (t, phi),
    };
    if s.len() < 4 || s.len() != phi.len() {
        return Err(DesignError::TooFewPoints { len: s.len().min(phi.len()) });
    }
    if s.iter().chain(&phi).any(|v| !v.is_finite()) {
        return Err(DesignError::BadParameter { name: "phi", value: f64::NAN });
    }
    if s.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DesignError::GridNotIncreasing);
    }
    let secants: Vec<f64> =
        s.windows(2).zip(phi.windows(2)).map(|(sw, pw)| (pw[1] - pw[0]) / (sw[1] - sw[0])).collect();
    let direction = secants[0];
    if direction == 0.0 || secants.iter().any(|d| d * direction <= 0.0) {
        return Err(DesignError::NotMonotone);
    }

    // Fritsch-Butland tangents: monotone by construction. The endpoints are
    // the profile's extrema, where a periodic continuation has zero slope;
    // flat ends give the interpolant the square-root contact the branch
    // switcher locks onto.
    let n = s.len();
    let mut tangents = alloc::vec![0.0; n];
    for i in 1..n - 1 {
        let (d0, d1) = (secants[i - 1], secants[i]);
        let (h0, h1) = (s[i] - s[i - 1], s[i + 1] - s[i]);
        let w0 = 2.0 * h1 + h0;
        let w1 = h1 + 2.0 * h0;
        tangents[i] = (w0 + w1) / (w0 / d0 + w1 / d1);
    }

    let (lo, hi) = if direction > 0.0 {
        (phi[0], phi[n - 1])
    } else {
        (phi[n - 1], phi[0])
    };
    Ok(PeriodicDesign { s, phi, tangents, speed: c, lo, hi })
}
