use std::sync::Arc;

use weingarten_core::fdsolver::{
    build_grid, residual_field, solve_dirichlet, solve_exterior, solve_on_grid, BoundaryData, DomainSpec, FdError,
    SolverConfig,
};
use weingarten_core::radial::solve_radial;
use weingarten_core::relation::RelationSpec;

const C: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn catenoid(r: f64) -> f64 {
    C * ((r / C).acosh() - (1.0 / C).acosh())
}

fn catenoid_derivs(r: f64) -> (f64, f64) {
    let up = C / (r * r - C * C).sqrt();
    (up, -C * r / (r * r - C * C).powf(1.5))
}

#[test]
fn catenoid_jets_are_second_order() {
    let domain = DomainSpec::annulus(2.0, 6.0).unwrap();
    let err = |n: usize| {
        let g = build_grid(&domain, n, 2 * n).unwrap();
        let u = g.sample(|x, y| catenoid(x.hypot(y)));
        g.interior_nodes()
            .map(|i| {
                let [x, y] = g.nodes[i];
                let r = x.hypot(y);
                let (up, upp) = catenoid_derivs(r);
                let jet = g.discrete_jet(&u, i);
                let (ex, ey) = (x / r, y / r);
                let mrr = jet.m.m11 * ex * ex + 2.0 * jet.m.m12 * ex * ey + jet.m.m22 * ey * ey;
                let tr = jet.m.trace();
                ((jet.p[0] - up * ex).abs() + (jet.p[1] - up * ey).abs())
                    .max((mrr - upp).abs())
                    .max((tr - (upp + up / r)).abs())
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(32), err(64));
    assert!(e1 / e2 > 3.3, "{e1} {e2}");
}

#[test]
fn residual_field_is_second_order_on_catenoid_samples() {
    let domain = DomainSpec::annulus(1.0, 3.0).unwrap();
    let spec = RelationSpec::minimal();
    let res = |n: usize| {
        let g = build_grid(&domain, n, 2 * n).unwrap();
        let u = g.sample(|x, y| catenoid(x.hypot(y)));
        residual_field(&spec, &g, &u, 1e-8).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    };
    let (r1, r2) = (res(16), res(32));
    assert!(r1 > 0.0 && r1 / r2 > 3.5, "{r1} {r2}");
}

#[test]
fn rotating_data_rotates_the_solution() {
    let domain = DomainSpec::disk(1.0).unwrap();
    let config = SolverConfig::default().with_resolution(8, 32);
    let dtheta = std::f64::consts::TAU / 32.0;
    let phi = |t: f64| 0.3 * t.cos() + 0.2 * (2.0 * t).sin() - 0.1 * (3.0 * t).cos();
    let spec = RelationSpec::linear(-0.5).unwrap();
    let a = solve_dirichlet(&spec, &domain, &BoundaryData::curve(phi), &config).unwrap();
    let b = solve_dirichlet(&spec, &domain, &BoundaryData::curve(move |t| phi(t - dtheta)), &config).unwrap();
    let g = &a.grid;
    for j in 0..g.n_rings {
        for k in 0..g.n_theta {
            let (na, nb) = (g.node(j, k), g.node(j, k + 1));
            assert!((a.u[na] - b.u[nb]).abs() < 1e-10);
        }
    }
}

#[test]
fn exterior_radial_data_matches_the_radial_solver() {
    let domain = DomainSpec::annulus(1.0, 8.0).unwrap();
    let spec = RelationSpec::minimal();
    let radial = solve_radial(&spec, 1.0, 1.0, 8.0, 1e-11).unwrap();
    let u8 = *radial.u.last().unwrap();
    let err = |n: usize| {
        let config = SolverConfig::default().with_resolution(n, 2 * n);
        let sol = solve_exterior(&spec, &domain, Arc::new(|_| 0.0), Arc::new(move |_| u8), &config).unwrap();
        sol.grid
            .interior_nodes()
            .map(|i| {
                let [x, y] = sol.grid.nodes[i];
                (sol.u[i] - radial.interpolate(x.hypot(y)).unwrap().0).abs()
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(32), err(64));
    assert!(e1 / e2 > 3.0 && e2 < 5e-3, "{e1} {e2}");
}

#[test]
fn zero_exterior_data_gives_zero() {
    let domain = DomainSpec::annulus(1.0, 4.0).unwrap();
    let config = SolverConfig::default().with_resolution(8, 16);
    let sol = solve_exterior(&RelationSpec::minimal(), &domain, Arc::new(|_| 0.0), Arc::new(|_| 0.0), &config).unwrap();
    assert!(sol.u.iter().all(|&v| v == 0.0));
}

#[test]
fn perturbed_inner_data_stays_between_radial_barriers() {
    let domain = DomainSpec::annulus(1.0, 8.0).unwrap();
    let spec = RelationSpec::minimal();
    let config = SolverConfig::default().with_resolution(32, 64);
    let outer = catenoid(8.0);
    let solve = |inner: Arc<dyn Fn(f64) -> f64 + Send + Sync>| {
        solve_exterior(&spec, &domain, inner, Arc::new(move |_| outer), &config).unwrap()
    };
    let low = solve(Arc::new(|_| -0.1));
    let high = solve(Arc::new(|_| 0.1));
    let mid = solve(Arc::new(|t: f64| 0.1 * t.cos()));
    let j = mid.grid.n_rings / 2;
    let avg = |s: &weingarten_core::fdsolver::GridSolution| s.grid.ring_means(&s.u)[j];
    assert!(avg(&low) < avg(&mid) && avg(&mid) < avg(&high));
    let ring: Vec<f64> = (0..mid.grid.n_theta).map(|k| mid.u[mid.grid.node(j, k)]).collect();
    let spread = ring.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ring.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread > 1e-4, "interior field should not be radial");
}

#[test]
fn gradient_stays_bounded_under_refinement() {
    let domain = DomainSpec::disk(1.0).unwrap();
    let spec = RelationSpec::exp_blend(0.25).unwrap();
    let phi = |t: f64| 0.25 * (2.0 * t).cos() + 0.1 * t.sin();
    let mut maxima = Vec::new();
    for n in [8, 16, 32] {
        let config = SolverConfig::default().with_resolution(n, 4 * n);
        let sol = solve_dirichlet(&spec, &domain, &BoundaryData::curve(phi), &config).unwrap();
        let m = sol
            .grid
            .interior_nodes()
            .map(|i| {
                let p = sol.grid.discrete_jet(&sol.u, i).p;
                p[0].hypot(p[1])
            })
            .fold(0.0, f64::max);
        maxima.push(m);
    }
    let (lo, hi) = maxima.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &m| (a.min(m), b.max(m)));
    assert!(hi / lo < 1.2, "{maxima:?}");
}

#[test]
fn starved_newton_reports_a_stall_with_partial_trace() {
    let domain = DomainSpec::annulus(1.0, 3.0).unwrap();
    let mut config = SolverConfig::default().with_resolution(8, 16);
    config.newton_max = 1;
    config.t_steps = 1;
    let u3 = catenoid(3.0);
    let r = solve_dirichlet(&RelationSpec::minimal(), &domain, &BoundaryData::annulus(|_| 0.0, move |_| u3), &config);
    match r {
        Err(FdError::ContinuationStall { bisections, partial, .. }) => {
            assert_eq!(bisections, 8);
            assert!(!partial.converged);
            assert!(partial.continuation_trace.iter().filter(|e| !e.converged).count() >= 9);
        }
        other => panic!("expected a stall, got {other:?}"),
    }
}

#[test]
fn star_convex_domain_solves_planes() {
    let samples: Vec<f64> = (0..32)
        .map(|i| 1.0 + 0.05 * (2.0 * std::f64::consts::TAU * i as f64 / 32.0).cos())
        .collect();
    let domain = DomainSpec::star_convex(samples).unwrap();
    let config = SolverConfig::default().with_resolution(8, 32);
    let grid = build_grid(&domain, 8, 32).unwrap();
    let plane = grid.sample(|x, y| 0.5 * x - 0.25 * y + 1.0);
    let sol = solve_on_grid(&RelationSpec::minimal(), grid, &plane, &config).unwrap();
    let err = sol.u.iter().zip(&plane).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10);
}
