use std::sync::Arc;

use proptest::prelude::*;
use weingarten_core::asymfit::{
    check_constant_sign, comparison_at_infinity, comparison_at_infinity_radial, curvature_estimate_diag,
    fit_log_expansion, fit_power, AsymfitError, Sign, SignTarget,
};
use weingarten_core::fdsolver::{build_grid, solve_exterior, solve_on_grid, DomainSpec, GridSolution, SolverConfig};
use weingarten_core::radial::{asymptotic_constant, solve_radial};
use weingarten_core::relation::RelationSpec;

const C: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn last_two_decades(r: &[f64]) -> Option<(f64, f64)> {
    let hi = *r.last().unwrap();
    Some((hi / 100.0, hi))
}

#[test]
fn catenoid_log_coefficient() {
    let sol = solve_radial(&RelationSpec::minimal(), 1.0, 1.0, 1e4, 1e-11).unwrap();
    let fit = fit_log_expansion(&sol.r, &sol.u, last_two_decades(&sol.r)).unwrap();
    // u = c log r + c log(2/c) - c arccosh(1/c) + O(r^-2).
    let c_exact = C * (2.0 / C).ln() - C * (1.0 / C).acosh();
    assert!((fit.d - C).abs() < 1e-7);
    assert!((fit.c - c_exact).abs() < 1e-6);
    assert!((fit.remainder_exponent.unwrap() - 2.0).abs() < 0.05);
    assert!(fit.alpha.unwrap() < 1.0);
}

#[test]
fn gradient_decays_at_least_as_fast_as_the_remainder() {
    for spec in [RelationSpec::minimal(), RelationSpec::exp_blend(0.25).unwrap()] {
        let sol = solve_radial(&spec, 1.0, 1.0, 1e4, 1e-10).unwrap();
        let win = last_two_decades(&sol.r).unwrap();
        let fit = fit_log_expansion(&sol.r, &sol.u, Some(win)).unwrap();
        let (x, y): (Vec<f64>, Vec<f64>) = sol
            .r
            .iter()
            .zip(&sol.uprime)
            .filter(|(r, _)| **r >= win.0)
            .map(|(r, up)| (r.ln(), up.ln()))
            .unzip();
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
            / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
        assert!(-slope >= fit.alpha.unwrap() - 0.05, "{}: decay {} alpha {:?}", spec.name(), -slope, fit.alpha);
    }
}

#[test]
fn power_fit_agrees_with_the_radial_constant() {
    let spec = RelationSpec::linear(-0.5).unwrap();
    let sol = solve_radial(&spec, 1.0, 1.0, 1e6, 1e-11).unwrap();
    let fit = fit_power(&sol.r, &sol.u, 0.5, last_two_decades(&sol.r)).unwrap();
    let k = asymptotic_constant(&sol).unwrap().kinf;
    assert!(((fit.kinf.unwrap() - k) / k).abs() < 1e-3);
    assert_eq!(fit.converged, Some(true));
}

#[test]
fn bounded_end_fits_a_constant() {
    let sol = solve_radial(&RelationSpec::linear(-2.0).unwrap(), 1.0, 1.0, 1e4, 1e-10).unwrap();
    let fit = fit_log_expansion(&sol.r, &sol.u, last_two_decades(&sol.r)).unwrap();
    let k = asymptotic_constant(&sol).unwrap();
    assert!(fit.d.abs() < 1e-6);
    assert!((fit.c - (k.kinf + k.tail_estimate)).abs() < 1e-6);
}

#[test]
fn radial_signs() {
    let cat = solve_radial(&RelationSpec::minimal(), 1.0, 1.0, 100.0, 1e-10).unwrap();
    assert_eq!(check_constant_sign(SignTarget::Radial(&cat)).unwrap().sign, Sign::Positive);
    let bounded = solve_radial(&RelationSpec::linear(-2.0).unwrap(), 1.0, 1.0, 1e4, 1e-10).unwrap();
    assert_eq!(check_constant_sign(SignTarget::Radial(&bounded)).unwrap().sign, Sign::Negative);
}

#[test]
fn log_divergent_radial_pair() {
    let spec = RelationSpec::minimal();
    let a = solve_radial(&spec, 1.0, 1.0, 1e3, 1e-10).unwrap();
    let b = solve_radial(&spec, 1.0, 0.9, 1e3, 1e-10).unwrap();
    let rep = comparison_at_infinity_radial(&a, &b, 1e-9).unwrap();
    let (d1, d2) = (C, 0.9 / (1.0f64 + 0.81).sqrt());
    assert!((rep.log_slope.unwrap() - (d1 - d2)).abs() < 1e-3);
    assert!(matches!(comparison_at_infinity_radial(&b, &a, 1e-9), Err(AsymfitError::Ordering { .. })));
}

fn annulus_solution(f: impl Fn(f64, f64) -> f64, r_out: f64, n: usize) -> GridSolution {
    let domain = DomainSpec::annulus(1.0, r_out).unwrap();
    let grid = build_grid(&domain, n, 2 * n).unwrap();
    let data = grid.sample(f);
    solve_on_grid(&RelationSpec::minimal(), grid, &data, &SolverConfig::default().with_resolution(n, 2 * n)).unwrap()
}

#[test]
fn shifted_copy_gives_the_shift() {
    let cat = |x: f64, y: f64| C * ((x.hypot(y) / C).acosh() - (1.0 / C).acosh());
    let base = annulus_solution(cat, 4.0, 16);
    let mut lifted = base.clone();
    lifted.u.iter_mut().for_each(|v| *v += 2.0);
    let rep = comparison_at_infinity(&lifted, &base).unwrap();
    assert!((rep.c0_estimate - 2.0).abs() < 1e-12 && rep.bracketing_ok && !rep.agreement);
    let same = comparison_at_infinity(&base, &base).unwrap();
    assert!(same.agreement && same.c0_estimate == 0.0);
}

#[test]
fn curvature_diagnostic_controls() {
    let plane = annulus_solution(|x, y| 0.2 * x + 0.1 * y, 4.0, 16);
    assert!(curvature_estimate_diag(&plane).unwrap() < 1e-10);
    let cat = |x: f64, y: f64| C * ((x.hypot(y) / C).acosh() - (1.0 / C).acosh());
    let smooth = annulus_solution(cat, 8.0, 16);
    let base = curvature_estimate_diag(&smooth).unwrap();
    assert!(base > 0.0);
    let mut spiked = smooth.clone();
    let n = spiked.grid.node(spiked.grid.n_rings - 3, 5);
    spiked.u[n] += 0.5;
    let jets: Vec<_> = (0..spiked.grid.len()).map(|i| spiked.grid.discrete_jet(&spiked.u, i)).collect();
    spiked.curvature_field = jets.iter().map(weingarten_core::jetop::curvatures).collect();
    assert!(curvature_estimate_diag(&spiked).unwrap() > base);
    let mut steep = smooth;
    for (u, [x, _]) in steep.u.iter_mut().zip(steep.grid.nodes.clone()) {
        *u = 100.0 * x;
    }
    assert!(matches!(curvature_estimate_diag(&steep), Err(AsymfitError::Hemisphere { .. })));
}

#[test]
fn exterior_sign_after_subtracting_the_plane() {
    let domain = DomainSpec::annulus(1.0, 4.0).unwrap();
    let config = SolverConfig::default().with_resolution(16, 32);
    let outer = C * ((4.0 / C).acosh() - (1.0 / C).acosh());
    let sol = solve_exterior(&RelationSpec::minimal(), &domain, Arc::new(|_| 0.0), Arc::new(move |_| outer), &config).unwrap();
    assert_eq!(check_constant_sign(SignTarget::Grid(&sol, 0.0)).unwrap().sign, Sign::Positive);
}

proptest! {
    #[test]
    fn exact_log_data_is_recovered(d in 0.0..3.0f64, c in -5.0..5.0f64, lo in 0.5..20.0f64) {
        let r: Vec<f64> = (0..64).map(|i| lo * 1e2f64.powf(i as f64 / 63.0)).collect();
        let u: Vec<f64> = r.iter().map(|x| d * x.ln() + c).collect();
        let fit = fit_log_expansion(&r, &u, None).unwrap();
        prop_assert!((fit.d - d).abs() <= 1e-10 && (fit.c - c).abs() <= 1e-10);
        prop_assert!(fit.residual_profile.iter().all(|(_, e)| *e >= 0.0));
    }
}
