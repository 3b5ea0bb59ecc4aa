//! Adaptive Gauss-Kronrod quadrature.
//!
//! A 7-point Gauss rule nested in a 15-point Kronrod rule gives both an
//! integral estimate and an error estimate per segment. The adaptive driver
//! keeps a worklist of segments and repeatedly bisects the one with the
//! largest error until the summed error meets the combined absolute/relative
//! tolerance. Integrand failures propagate out as errors; they are never
//! swallowed.

use alloc::vec::Vec;
use core::fmt;

// 15-point Kronrod abscissae on [-1, 1] (positive half; the rule is
// symmetric) with the embedded 7-point Gauss rule at indices 1, 3, 5, 7.
// The tables keep every published digit even past f64 precision.
#![allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.9914553711208126392068546975263,
    0.9491079123427585245261896840479,
    0.8648644233597690727897127886409,
    0.7415311855993944398638647732808,
    0.5860872354676911302941448382587,
    0.4058451513773971669066064120770,
    0.2077849550078984676006894037732,
    0.0,
];

const WGK: [f64; 8] = [
    0.0229353220105292249637320080590,
    0.0630920926299785532907006631892,
    0.1047900103222501838398763225415,
    0.1406532597155259187451895905102,
    0.1690047266392679028265834265986,
    0.1903505780647854099132564024210,
    0.2044329400752988924141619992346,
    0.2094821410847278280129991748917,
];

const WG: [f64; 4] = [
    0.1294849661688696932706114326791,
    0.2797053914892766679014677714238,
    0.3818300505051189449503697754890,
    0.4179591836734693877551020408163,
];

/// Tolerances and limits for one adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum bisection depth of any segment.
    pub max_depth: u32,
    /// Hard cap on the number of live segments.
    pub max_segments: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-10, rel_tol: 1e-10, max_depth: 60, max_segments: 4096 }
    }
}

impl QuadOptions {
    pub fn with_tol(tol: f64) -> Self {
        QuadOptions { abs_tol: tol, rel_tol: tol, ..QuadOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuadError<E> {
    /// The integrand failed at an abscissa.
    Integrand(E),
    /// The error estimate would not come down to tolerance within the
    /// subdivision limits.
    NonConvergence { achieved: f64, requested: f64 },
}

impl<E: fmt::Display> fmt::Display for QuadError<E> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadError::Integrand(e) => write!(out, "integrand failed: {e}"),
            QuadError::NonConvergence { achieved, requested } => write!(
                out,
                "quadrature did not converge: error {achieved:e} > requested {requested:e}"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    integral: f64,
    error: f64,
    depth: u32,
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub integral: f64,
    pub error_estimate: f64,
    pub segments: usize,
    pub evaluations: usize,
}

/// Integrates `f` over `[a, b]` (either orientation) to the requested
/// tolerance.
pub fn integrate<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult, QuadError<E>> {
    if a == b {
        return Ok(QuadResult { integral: 0.0, error_estimate: 0.0, segments: 0, evaluations: 0 });
    }
    let (lo, hi, flip) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut evaluations = 0;
    let mut segments: Vec<Segment> = Vec::new();
    let first = kronrod(&mut f, lo, hi, 0, &mut evaluations)?;
    segments.push(first);

    loop {
        let mut total = 0.0;
        let mut error = 0.0;
        for seg in &segments {
            total += seg.integral;
            error += seg.error;
        }
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if error <= tol {
            return Ok(QuadResult {
                integral: flip * total,
                error_estimate: error,
                segments: segments.len(),
                evaluations,
            });
        }

        // Bisect the segment with the largest error estimate.
        let mut worst = 0;
        for (i, seg) in segments.iter().enumerate() {
            if seg.error > segments[worst].error {
                worst = i;
            }
        }
        let seg = segments[worst];
        if seg.depth >= opts.max_depth || segments.len() + 1 > opts.max_segments {
            return Err(QuadError::NonConvergence { achieved: error, requested: tol });
        }
        let mid = 0.5 * (seg.lo + seg.hi);
        if mid <= seg.lo || mid >= seg.hi {
            // The segment is at floating-point resolution already.
            return Err(QuadError::NonConvergence { achieved: error, requested: tol });
        }
        let left = kronrod(&mut f, seg.lo, mid, seg.depth + 1, &mut evaluations)?;
        let right = kronrod(&mut f, mid, seg.hi, seg.depth + 1, &mut evaluations)?;
        segments[worst] = left;
        segments.push(right);
    }
}

fn kronrod<E>(
    f: &mut impl FnMut(f64) -> Result<f64, E>,
    lo: f64,
    hi: f64,
    depth: u32,
    evaluations: &mut usize,
) -> Result<Segment, QuadError<E>> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let mut kronrod_sum = 0.0;
    let mut gauss_sum = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let offset = half * x;
        let value = if x == 0.0 {
            let v = f(center).map_err(QuadError::Integrand)?;
            *evaluations += 1;
            v
        } else {
            let vl = f(center - offset).map_err(QuadError::Integrand)?;
            let vr = f(center + offset).map_err(QuadError::Integrand)?;
            *evaluations += 2;
            vl + vr
        };
        kronrod_sum += wk * value;
        if i % 2 == 1 {
            gauss_sum += WG[i / 2] * value;
        } else if x == 0.0 {
            gauss_sum += WG[3] * value;
        }
    }

    let integral = kronrod_sum * half;
    let error = ((kronrod_sum - gauss_sum) * half).abs();
    Ok(Segment { lo, hi, integral, error, depth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;
    use approx::assert_relative_eq;
    use core::convert::Infallible;

    fn run(f: impl FnMut(f64) -> Result<f64, Infallible>, a: f64, b: f64) -> f64 {
        integrate(f, a, b, &QuadOptions::default()).unwrap().integral
    }

    #[test]
    fn polynomials_are_exact() {
        assert_relative_eq!(run(|x| Ok(x * x), 0.0, 3.0), 9.0, max_relative = 1e-14);
        assert_relative_eq!(
            run(|x| Ok(5.0 * x * x * x * x - 2.0 * x), -1.0, 2.0),
            30.0,
            max_relative = 1e-13
        );
    }

    #[test]
    fn orientation_flips_sign() {
        let forward = run(|x| Ok(math::exp(x)), 0.0, 1.0);
        let backward = run(|x| Ok(math::exp(x)), 1.0, 0.0);
        assert_relative_eq!(forward, core::f64::consts::E - 1.0, max_relative = 1e-12);
        assert_relative_eq!(forward, -backward, max_relative = 1e-14);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(run(|_| Ok(1.0), 2.0, 2.0), 0.0);
    }

    #[test]
    fn oscillatory_integrand_converges() {
        // int_0^10 sin(5x) dx = (1 - cos(50)) / 5
        let exact = (1.0 - math::cos(50.0)) / 5.0;
        let got = run(|x| Ok(math::sin(5.0 * x)), 0.0, 10.0);
        assert_relative_eq!(got, exact, max_relative = 1e-10, epsilon = 1e-12);
    }

    #[test]
    fn integrable_singularity_converges() {
        // int_0^1 1/sqrt(x) dx = 2, singular endpoint.
        let opts = QuadOptions::with_tol(1e-9);
        let got = integrate(
            |x: f64| Ok::<_, Infallible>(1.0 / math::sqrt(x.max(f64::MIN_POSITIVE))),
            0.0,
            1.0,
            &opts,
        )
        .unwrap()
        .integral;
        assert_relative_eq!(got, 2.0, max_relative = 1e-7);
    }

    #[test]
    fn integrand_errors_propagate() {
        let res = integrate(
            |x| if x > 0.5 { Err("boom") } else { Ok(x) },
            0.0,
            1.0,
            &QuadOptions::default(),
        );
        assert!(matches!(res, Err(QuadError::Integrand("boom"))));
    }

    #[test]
    fn error_estimate_is_honest() {
        let res = integrate(
            |x: f64| Ok::<_, Infallible>(math::exp(-x * x)),
            -6.0,
            6.0,
            &QuadOptions::default(),
        )
        .unwrap();
        let exact = 1.7724538509055159; // sqrt(pi), tails beyond +-6 are ~1e-17
        assert!((res.integral - exact).abs() <= res.error_estimate.max(1e-12));
    }
}
