use weingarten_core::radial::{asymptotic_constant, solve_radial, RadialSolution};
use weingarten_core::relation::{Regime, RelationSpec};

fn catenoid(r: f64) -> f64 {
    let s = 2f64.sqrt();
    ((s * r).acosh() - s.acosh()) / s
}

fn linear_uprime(a: f64, r0: f64, c0: f64, r: f64) -> f64 {
    let c = c0 * r0.powf(-a) / (1.0 + c0 * c0).sqrt();
    c * r.powf(a) / (1.0 - c * c * r.powf(2.0 * a)).sqrt()
}

/// `∫_{R0}^∞ u' dr` for the bounded linear ends, by composite Simpson in
/// `ln r` on the remainder after subtracting the leading power.
fn linear_bounded_limit(a: f64, r0: f64, c0: f64) -> f64 {
    let c = c0 * r0.powf(-a) / (1.0 + c0 * c0).sqrt();
    let lead = c * r0.powf(1.0 + a) / -(1.0 + a);
    let n = 200_000;
    let s_max = 40.0;
    let h = s_max / n as f64;
    let f = |s: f64| {
        let r = r0 * f64::exp(s);
        r * (linear_uprime(a, r0, c0, r) - c * r.powf(a))
    };
    let mut acc = f(0.0) + f(s_max);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    lead + acc * h / 3.0
}

fn assert_audit_clean(sol: &RadialSolution) {
    assert!(sol.audit.steps_checked > 0);
    assert!(sol.audit.clean(), "{:?}", sol.audit.violations);
}

#[test]
fn catenoid_relative_error() {
    let sol = solve_radial(&RelationSpec::minimal(), 1.0, 1.0, 100.0, 1e-9).unwrap();
    let worst = sol
        .r
        .iter()
        .zip(&sol.u)
        .skip(1)
        .map(|(&r, &u)| ((u - catenoid(r)) / catenoid(r)).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "worst relative error {worst}");
    assert_audit_clean(&sol);
}

#[test]
fn linear_uprime_matches_closed_form() {
    for a in [-0.25, -0.5, -2.0, -4.0] {
        for (r0, c0) in [(1.0, 1.0), (2.0, 0.5)] {
            let spec = RelationSpec::linear(a).unwrap();
            let sol = solve_radial(&spec, r0, c0, 1e3 * r0, 1e-10).unwrap();
            for (&r, &up) in sol.r.iter().zip(&sol.uprime) {
                let exact = linear_uprime(a, r0, c0, r);
                assert!(((up - exact) / exact).abs() <= 1e-6, "a={a} r={r}");
            }
            assert_audit_clean(&sol);
        }
    }
}

#[test]
fn linear_power_constants() {
    for a in [-0.25, -0.5] {
        let spec = RelationSpec::linear(a).unwrap();
        let sol = solve_radial(&spec, 1.0, 1.0, 1e7, 1e-10).unwrap();
        let asym = asymptotic_constant(&sol).unwrap();
        assert_eq!(asym.regime, Regime::Power);
        let exact = 0.5f64.sqrt() / (1.0 + a);
        assert!(((asym.kinf - exact) / exact).abs() <= 1e-3, "a={a} kinf={}", asym.kinf);
        assert!(asym.tail_estimate.is_finite());
    }
}

#[test]
fn linear_bounded_constants() {
    for a in [-2.0, -4.0] {
        let spec = RelationSpec::linear(a).unwrap();
        let sol = solve_radial(&spec, 1.0, 1.0, 1e3, 1e-10).unwrap();
        let asym = asymptotic_constant(&sol).unwrap();
        assert_eq!(asym.regime, Regime::Bounded);
        let exact = linear_bounded_limit(a, 1.0, 1.0);
        assert!(((asym.kinf - exact) / exact).abs() <= 1e-3, "a={a}");
        assert!(((asym.kinf + asym.tail_estimate - exact) / exact).abs() <= 1e-5);
    }
}

#[test]
fn exp_blend_end_stays_within_bounds() {
    for (r0, c0) in [(1.0, 1.0), (0.5, 3.0), (4.0, 0.1)] {
        let spec = RelationSpec::exp_blend(0.25).unwrap();
        let sol = solve_radial(&spec, r0, c0, 1e4 * r0, 1e-9).unwrap();
        assert_audit_clean(&sol);
    }
}
