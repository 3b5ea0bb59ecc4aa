//! Randomized properties of the expression layer, the reduction, and the
//! integrators.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use peakon_core::peakon::{
    accel1, integrate_single, quadrature_solve, PeakonState, SimOptions, Termination,
};
use peakon_core::multipeakon::{rhs_n, NPeakonState};
use peakon_core::quad::{self, QuadOptions};
use peakon_core::{NonlinearitySpec, ReducedDynamics, ReducedSystem};
use proptest::prelude::*;

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn system(f: &str, g: &str, pairs: &[(&str, f64)]) -> ReducedSystem {
    ReducedSystem::new(NonlinearitySpec::parse(f, g, params(pairs)).unwrap())
}

// ---------------------------------------------------------------------------
// Random well-formed expression sources.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Gen {
    U,
    Ux,
    K,
    Num(f64),
    Neg(Box<Gen>),
    Add(Box<Gen>, Box<Gen>),
    Sub(Box<Gen>, Box<Gen>),
    Mul(Box<Gen>, Box<Gen>),
    Div(Box<Gen>, Box<Gen>),
    PowInt(Box<Gen>, i32),
    Sin(Box<Gen>),
    Cos(Box<Gen>),
    Abs(Box<Gen>),
    Sign(Box<Gen>),
    SqrtShift(Box<Gen>),
    LogShift(Box<Gen>),
}

impl Gen {
    fn render(&self, out: &mut String) {
        let bin = |out: &mut String, a: &Gen, op: &str, b: &Gen| {
            out.push('(');
            a.render(out);
            out.push_str(op);
            b.render(out);
            out.push(')');
        };
        let call = |out: &mut String, name: &str, x: &Gen| {
            out.push_str(name);
            out.push('(');
            x.render(out);
            out.push(')');
        };
        match self {
            Gen::U => out.push('u'),
            Gen::Ux => out.push_str("ux"),
            Gen::K => out.push('k'),
            Gen::Num(v) => {
                let _ = write!(out, "{v}");
            }
            Gen::Neg(x) => {
                out.push_str("-(");
                x.render(out);
                out.push(')');
            }
            Gen::Add(a, b) => bin(out, a, " + ", b),
            Gen::Sub(a, b) => bin(out, a, " - ", b),
            Gen::Mul(a, b) => bin(out, a, "*", b),
            Gen::Div(a, b) => bin(out, a, "/", b),
            Gen::PowInt(a, e) => {
                out.push('(');
                a.render(out);
                out.push(')');
                let _ = write!(out, "^{e}");
            }
            Gen::Sin(x) => call(out, "sin", x),
            Gen::Cos(x) => call(out, "cos", x),
            Gen::Abs(x) => call(out, "abs", x),
            Gen::Sign(x) => call(out, "sign", x),
            Gen::SqrtShift(x) => {
                out.push_str("sqrt(abs(");
                x.render(out);
                out.push_str(") + 1)");
            }
            Gen::LogShift(x) => {
                out.push_str("log(abs(");
                x.render(out);
                out.push_str(") + 1)");
            }
        }
    }

    fn source(&self) -> String {
        let mut out = String::new();
        self.render(&mut out);
        out
    }
}

fn expr_strategy() -> impl Strategy<Value = Gen> {
    let leaf = prop_oneof![
        Just(Gen::U),
        Just(Gen::Ux),
        Just(Gen::K),
        (-3.0..3.0f64).prop_map(Gen::Num),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|x| Gen::Neg(Box::new(x))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Gen::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Gen::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Gen::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Gen::Div(Box::new(a), Box::new(b))),
            (inner.clone(), 2..=3i32).prop_map(|(a, e)| Gen::PowInt(Box::new(a), e)),
            inner.clone().prop_map(|x| Gen::Sin(Box::new(x))),
            inner.clone().prop_map(|x| Gen::Cos(Box::new(x))),
            inner.clone().prop_map(|x| Gen::Abs(Box::new(x))),
            inner.clone().prop_map(|x| Gen::Sign(Box::new(x))),
            inner.clone().prop_map(|x| Gen::SqrtShift(Box::new(x))),
            inner.prop_map(|x| Gen::LogShift(Box::new(x))),
        ]
    })
}

/// Six fixed probe points plus room for a random one.
const PROBES: [(f64, f64); 6] =
    [(0.5, 1.0), (1.3, -0.7), (-0.9, 0.2), (2.0, 2.0), (-1.5, -1.5), (0.1, 0.0)];

proptest! {
    // Printing an expression and re-parsing it preserves evaluation bit for
    // bit (or fails in the same places).
    #[test]
    fn parse_print_round_trip(tree in expr_strategy(), u in -2.0..2.0f64, ux in -2.0..2.0f64) {
        let src = tree.source();
        let ast = peakon_core::expr::parse(&src).expect("generated source is well-formed");
        let printed = ast.to_string();
        let back = peakon_core::expr::parse(&printed)
            .unwrap_or_else(|e| panic!("printed form `{printed}` failed: {e}"));
        let ps = params(&[("k", 0.7)]);
        for (pu, pux) in PROBES.iter().copied().chain([(u, ux)]) {
            match (ast.eval(pu, pux, &ps), back.eval(pu, pux, &ps)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(
                    a.to_bits(),
                    b.to_bits(),
                    "`{}` vs `{}` at ({}, {}): {} vs {}",
                    src, printed, pu, pux, a, b
                ),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(
                    false,
                    "`{}` vs `{}` at ({}, {}): {:?} vs {:?}",
                    src, printed, pu, pux, a, b
                ),
            }
        }
    }

    // The even/odd split respects the reflection ux -> -ux exactly, and the
    // parts reassemble the value.
    #[test]
    fn even_odd_split_reflects(tree in expr_strategy(), u in -2.0..2.0f64, ux in -2.0..2.0f64) {
        let src = tree.source();
        let ast = peakon_core::expr::parse(&src).expect("generated source is well-formed");
        let ps = params(&[("k", 0.7)]);
        let (Ok((even, odd)), Ok((even_r, odd_r))) =
            (ast.even_odd_at(u, ux, &ps), ast.even_odd_at(u, -ux, &ps))
        else {
            return Ok(());
        };
        prop_assume!(even.is_finite() && odd.is_finite());
        prop_assert_eq!(even, even_r, "`{}` at ({}, {})", src, u, ux);
        prop_assert_eq!(odd, -odd_r, "`{}` at ({}, {})", src, u, ux);
        if let (Ok(plus), Ok(minus)) = (ast.eval(u, ux, &ps), ast.eval(u, -ux, &ps)) {
            let scale = (plus.abs() + minus.abs()).max(1.0);
            prop_assert!(
                (even + odd - plus).abs() <= 1e-14 * scale,
                "`{}` at ({}, {}): {} + {} vs {}",
                src, u, ux, even, odd, plus
            );
        }
    }

    // A nonlinearity odd in the slope reduces to exactly zero.
    #[test]
    fn odd_f_reduces_to_zero(
        c in prop::array::uniform4(-2.0..2.0f64),
        a in 0.1..3.0f64,
        g_tree in expr_strategy(),
    ) {
        let f = format!("ux*({} + {}*u + {}*ux^2 + {}*u^2)", c[0], c[1], c[2], c[3]);
        let g = g_tree.source();
        let Ok(spec) = NonlinearitySpec::parse(&f, &g, params(&[("k", 0.7)])) else {
            return Ok(());
        };
        let sys = ReducedSystem::new(spec);
        prop_assert_eq!(sys.f0(a).unwrap(), 0.0, "f = {}", f);
    }

    // The memo cache in front of the reduced functions is invisible.
    #[test]
    fn cache_is_transparent(
        p in 0.0..3.0f64,
        lam in -3.0..3.0f64,
        kappa in 0.2..4.0f64,
        a in 0.3..2.0f64,
    ) {
        let pairs = [("k", kappa), ("p", p), ("lam", lam)];
        let cached = system("k*u^p*ux", "u^(p-1)*(u^2 + lam*ux^2)", &pairs);
        let fresh = system("k*u^p*ux", "u^(p-1)*(u^2 + lam*ux^2)", &pairs).with_cache(false);
        for probe in [a, a, 0.5 * a, a] {
            prop_assert_eq!(cached.f0(probe).unwrap().to_bits(), fresh.f0(probe).unwrap().to_bits());
            prop_assert_eq!(cached.g0(probe).unwrap().to_bits(), fresh.g0(probe).unwrap().to_bits());
            prop_assert_eq!(
                cached.alpha(probe).unwrap().to_bits(),
                fresh.alpha(probe).unwrap().to_bits()
            );
        }
    }

    // In the cubic family, k scales only the dissipation; the reduced speed
    // never sees it, and the reduced decay rate vanishes for every k.
    #[test]
    fn kappa_plays_no_role(
        p in 0i32..=3,
        lam in -3.0..3.0f64,
        k1 in 0.1..4.0f64,
        k2 in 0.1..4.0f64,
        flip in proptest::bool::ANY,
        a in 0.3..2.0f64,
    ) {
        let k2 = if flip { -k2 } else { k2 };
        let s1 = system(
            "k*u^p*ux",
            "u^(p-1)*(u^2 + lam*ux^2)",
            &[("k", k1), ("p", p as f64), ("lam", lam)],
        );
        let s2 = system(
            "k*u^p*ux",
            "u^(p-1)*(u^2 + lam*ux^2)",
            &[("k", k2), ("p", p as f64), ("lam", lam)],
        );
        prop_assert_eq!(s1.f0(a).unwrap(), 0.0);
        prop_assert_eq!(s2.f0(a).unwrap(), 0.0);
        let (g1, g2) = (s1.g0(a).unwrap(), s2.g0(a).unwrap());
        prop_assert!((g1 - g2).abs() < 1e-9, "g0 {} vs {}", g1, g2);
    }

    // Adaptive quadrature is additive across a split of the interval.
    #[test]
    fn quadrature_splits_additively(
        lo in -3.0..3.0f64,
        width in 0.2..4.0f64,
        frac in 0.1..0.9f64,
        c in prop::array::uniform3(-2.0..2.0f64),
    ) {
        let hi = lo + width;
        let mid = lo + frac * width;
        let f = |y: f64| -> Result<f64, ()> { Ok(c[0] * (3.0 * y).sin() + c[1] * y * y + c[2]) };
        let opts = QuadOptions::default();
        let whole = quad::integrate(f, lo, hi, &opts).unwrap().integral;
        let left = quad::integrate(f, lo, mid, &opts).unwrap().integral;
        let right = quad::integrate(f, mid, hi, &opts).unwrap().integral;
        let scale = whole.abs().max(left.abs() + right.abs()).max(1.0);
        prop_assert!(
            (whole - (left + right)).abs() <= 1e-8 * scale,
            "{} vs {} + {}",
            whole, left, right
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // The coupled right-hand side at N = 1 is the scalar reduction.
    #[test]
    fn n1_matches_single_reduction(
        cf in prop::array::uniform6(-1.0..1.0f64),
        cg in prop::array::uniform6(-1.0..1.0f64),
        a in 0.3..2.0f64,
        x in -1.0..1.0f64,
    ) {
        let poly = |c: &[f64; 6]| {
            format!(
                "{} + {}*u + {}*ux + {}*u*ux + {}*u^2 + {}*ux^2",
                c[0], c[1], c[2], c[3], c[4], c[5]
            )
        };
        let sys = system(&poly(&cf), &poly(&cg), &[]);
        let f0 = sys.f0(a).unwrap();
        let g0 = sys.g0(a).unwrap();
        let state = NPeakonState::new(0.0, vec![a], vec![x]).unwrap();
        let mut adot = [0.0];
        let mut xdot = [0.0];
        rhs_n(&sys, &state, &mut adot, &mut xdot).unwrap();
        let want_adot = -a * f0;
        prop_assert!(
            (adot[0] - want_adot).abs() <= 1e-8 * (1.0 + want_adot.abs()),
            "adot {} vs {}",
            adot[0], want_adot
        );
        prop_assert!(
            (xdot[0] - g0).abs() <= 1e-8 * (1.0 + g0.abs()),
            "xdot {} vs {}",
            xdot[0], g0
        );
    }

    // Amplitude dynamics is autonomous and one-dimensional, so the sign of
    // its rate is fixed between events.
    #[test]
    fn amplitude_is_monotone_between_events(
        p in 1i32..=2,
        kappa in 0.2..2.0f64,
        decay in proptest::bool::ANY,
    ) {
        let kappa = if decay { kappa } else { -kappa };
        let sys = system("k*u^p", "lam*u^q", &[("k", kappa), ("p", p as f64), ("lam", 1.0), ("q", 2.0)]);
        let traj = integrate_single(&sys, PeakonState::new(0.0, 1.0, 0.0), 2.0, &SimOptions::default())
            .unwrap();
        let mut cuts: Vec<f64> = traj.events.iter().map(|e| e.t).collect();
        cuts.push(f64::INFINITY);
        let mut edge = 0usize;
        for w in traj.samples.windows(2) {
            while w[1].t > cuts[edge] {
                edge += 1;
            }
            if w[0].t > cuts[edge] - 1e-9 {
                continue;
            }
            let step = w[1].a - w[0].a;
            if decay {
                prop_assert!(step <= 1e-12, "grew by {} at t={}", step, w[0].t);
            } else {
                prop_assert!(step >= -1e-12, "shrank by {} at t={}", step, w[0].t);
            }
        }
    }

    // For a travelling wave (odd f), the integrator holds the amplitude and
    // moves the peak linearly, and every sample satisfies the kinematic
    // columns' defining formulas.
    #[test]
    fn travelling_waves_stay_rigid(
        c in prop::array::uniform3(-2.0..2.0f64),
        cg in prop::array::uniform6(-1.0..1.0f64),
        a0 in 0.3..1.5f64,
    ) {
        let f = format!("ux*({} + {}*u + {}*ux^2)", c[0], c[1], c[2]);
        let g = format!(
            "{} + {}*u + {}*ux + {}*u*ux + {}*u^2 + {}*ux^2",
            cg[0], cg[1], cg[2], cg[3], cg[4], cg[5]
        );
        let sys = system(&f, &g, &[]);
        let speed = sys.g0(a0).unwrap();
        let traj = integrate_single(&sys, PeakonState::new(0.0, a0, 0.0), 4.0, &SimOptions::default())
            .unwrap();
        prop_assert_eq!(traj.termination, Termination::HorizonReached);
        let span = 1.0 + (4.0 * speed).abs();
        for s in &traj.samples {
            prop_assert!((s.a - a0).abs() <= 1e-9 * a0, "A moved to {} at t={}", s.a, s.t);
            prop_assert!(
                (s.x - speed * s.t).abs() <= 1e-8 * span,
                "X {} vs {} at t={}",
                s.x, speed * s.t, s.t
            );
            let g0 = sys.g0(s.a).unwrap();
            let accel = accel1(&sys, s.a).unwrap();
            prop_assert!((s.xdot - g0).abs() <= 1e-12 * (1.0 + g0.abs()));
            prop_assert!((s.xddot - accel).abs() <= 1e-12 * (1.0 + accel.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    // Between matched amplitude levels, the time-stepped trajectory and the
    // quadrature closed form agree on elapsed time and displacement.
    #[test]
    fn simulation_matches_quadrature_oracle(
        cf in prop::array::uniform3(0.05..0.5f64),
        cg in prop::array::uniform6(-1.0..1.0f64),
        a0 in 0.5..1.5f64,
        horizon in 0.3..1.0f64,
    ) {
        let f = format!("{} + {}*u + {}*ux^2", cf[0], cf[1], cf[2]);
        let g = format!(
            "{} + {}*u + {}*ux + {}*u*ux + {}*u^2 + {}*ux^2",
            cg[0], cg[1], cg[2], cg[3], cg[4], cg[5]
        );
        let sys = system(&f, &g, &[]);
        let traj =
            integrate_single(&sys, PeakonState::new(0.0, a0, 0.0), horizon, &SimOptions::default())
                .unwrap();
        prop_assert_eq!(traj.termination, Termination::HorizonReached);
        let last = traj.last();
        let disp = quadrature_solve(&sys, a0, last.a, 1e-12).unwrap();
        prop_assert!(
            (disp.delta_t - last.t).abs() <= 1e-6,
            "dt {} vs {}",
            disp.delta_t, last.t
        );
        prop_assert!(
            (disp.delta_x - last.x).abs() <= 1e-6,
            "dx {} vs {}",
            disp.delta_x, last.x
        );
    }
}
