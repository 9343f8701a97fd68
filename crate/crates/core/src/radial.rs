//! Rotational ends `u = u(r)` over `r ≥ R0` with `u(R0) = 0`, `u'(R0) = C0`.
//!
//! The relation `κ₂ = f(κ₁)` reduces to `u'' = u' g / r` with
//! `g = (1 + u'²) ∫₀¹ f'(ρ κ₁) dρ` and `κ₁ = u' / (r √(1 + u'²))`. The system
//! is integrated in `τ = ln(r / R0)` for the state `(u, ln u', I)`, where
//! `I = ∫ (g - f'(0)) dτ` feeds the power-regime constant.

use serde::Serialize;
use thiserror::Error;

use crate::ode::{integrate, IntegrateError, StepperOptions};
use crate::quadrature::{gl16_unit, midpoint_unit};
use crate::relation::{Regime, RelationError, RelationSpec};

/// Output nodes per decade of the geometric grid.
pub const DEFAULT_POINTS_PER_DECADE: usize = 64;

/// Relative slack when auditing the a-priori bounds on accepted steps.
const AUDIT_SLACK: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadialError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("step failure: {0}")]
    StepFailure(String),
    #[error(transparent)]
    Domain(#[from] RelationError),
    #[error("asymptotic constant undefined in the {0} regime; use a log-expansion fit")]
    Regime(Regime),
}

/// `(1 + u'²) ∫₀¹ f'(ρ u' / (r √(1 + u'²))) dρ`.
pub fn radial_g(spec: &RelationSpec, r: f64, uprime: f64) -> Result<f64, RelationError> {
    let w2 = 1.0 + uprime * uprime;
    let kappa = uprime / (r * w2.sqrt());
    let mean = if spec.has_smooth_derivative() {
        let mut acc = 0.0;
        for &(x, wt) in gl16_unit() {
            acc += wt * spec.eval_fprime(x * kappa)?;
        }
        acc
    } else {
        let mut acc = 0.0;
        for (x, wt) in midpoint_unit(64) {
            acc += wt * spec.eval_fprime(x * kappa)?;
        }
        acc
    };
    Ok(w2 * mean)
}

pub fn regime_of(spec: &RelationSpec) -> Regime {
    spec.regime()
}

#[derive(Debug, Clone, Copy)]
pub struct RadialOptions {
    pub points_per_decade: usize,
    pub max_steps: usize,
}

impl Default for RadialOptions {
    fn default() -> Self {
        Self {
            points_per_decade: DEFAULT_POINTS_PER_DECADE,
            max_steps: 2_000_000,
        }
    }
}

/// Record of the a-priori bound checks run on every accepted step.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StepAudit {
    pub steps_checked: usize,
    pub violations: Vec<String>,
}

impl StepAudit {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub r0: f64,
    pub c0: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub uprime: Vec<f64>,
    pub udoubleprime: Vec<f64>,
    pub g: Vec<f64>,
    /// `∫_{R0}^{r} (g - f'(0)) / t dt` at each node.
    pub g_excess_integral: Vec<f64>,
    pub regime: Regime,
    pub spec: RelationSpec,
    pub audit: StepAudit,
}

/// Upper bound `C0 R0^Λ r^{1-Λ} / (1-Λ)` on `u`; for `Λ = 1` the limit of
/// the sharper form `C0 R0 ln(r / R0)`.
pub fn growth_bound(r0: f64, c0: f64, lambda: f64, r: f64) -> f64 {
    if lambda < 1.0 {
        c0 * r0.powf(lambda) * r.powf(1.0 - lambda) / (1.0 - lambda)
    } else {
        c0 * r0 * (r / r0).ln()
    }
}

struct Auditor {
    r0: f64,
    c0: f64,
    lambda: f64,
    prev_u: f64,
    prev_uprime: f64,
    audit: StepAudit,
}

impl Auditor {
    fn check(&mut self, r: f64, u: f64, uprime: f64, upp: f64, g: f64) {
        let a = &mut self.audit;
        a.steps_checked += 1;
        let mut fail = |msg: String| {
            if a.violations.len() < 32 {
                a.violations.push(msg);
            }
        };
        let s = AUDIT_SLACK;
        if u < self.prev_u - s * self.prev_u.abs() {
            fail(format!("u decreased at r={r}: {} -> {u}", self.prev_u));
        }
        if !(uprime > 0.0 && uprime <= self.c0 * (1.0 + s)) {
            fail(format!("u'={uprime} outside (0, C0] at r={r}"));
        }
        if uprime > self.prev_uprime * (1.0 + s) {
            fail(format!("u' increased at r={r}"));
        }
        let upp_lo = -self.c0 * (1.0 + self.c0 * self.c0) / (self.lambda * self.r0);
        if !(upp < 0.0 && upp >= upp_lo * (1.0 + s)) {
            fail(format!("u''={upp} outside [{upp_lo}, 0) at r={r}"));
        }
        let ub = growth_bound(self.r0, self.c0, self.lambda, r);
        if u > ub * (1.0 + s) + s * self.c0 * self.r0 {
            fail(format!("u={u} exceeds growth bound {ub} at r={r}"));
        }
        let g_lo = -(1.0 + self.c0 * self.c0) / self.lambda;
        let g_hi = -self.lambda;
        if !(g >= g_lo * (1.0 + s) && g <= g_hi * (1.0 - s)) {
            fail(format!("g={g} outside [{g_lo}, {g_hi}] at r={r}"));
        }
        self.prev_u = u;
        self.prev_uprime = uprime;
    }
}

/// Integrates the rotational end to `r_max` with local error tolerance `tol`.
pub fn solve_radial(
    spec: &RelationSpec,
    r0: f64,
    c0: f64,
    r_max: f64,
    tol: f64,
) -> Result<RadialSolution, RadialError> {
    solve_radial_with(spec, r0, c0, r_max, tol, &RadialOptions::default())
}

pub fn solve_radial_with(
    spec: &RelationSpec,
    r0: f64,
    c0: f64,
    r_max: f64,
    tol: f64,
    options: &RadialOptions,
) -> Result<RadialSolution, RadialError> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(RadialError::InvalidInput(format!("R0 must be positive, got {r0}")));
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(RadialError::InvalidInput(format!("C0 must be positive, got {c0}")));
    }
    if !(r_max > r0) {
        return Err(RadialError::InvalidInput(format!("r_max={r_max} must exceed R0={r0}")));
    }
    if !(tol > 0.0) {
        return Err(RadialError::InvalidInput(format!("tol must be positive, got {tol}")));
    }
    if !spec.is_minimal_type() {
        return Err(RadialError::InvalidInput(
            "radial ends require a minimal-type relation (umbilic constant 0)".into(),
        ));
    }
    let fprime0 = spec.fprime0;
    let dtau = std::f64::consts::LN_10 / options.points_per_decade.max(1) as f64;
    let tau_max = (r_max / r0).ln();
    let n_full = ((tau_max / dtau) * (1.0 + 1e-12)).floor() as usize;
    let mut stops: Vec<f64> = (1..=n_full).map(|k| k as f64 * dtau).collect();
    if stops.last().is_some_and(|&t| (tau_max - t).abs() <= 1e-9 * dtau) {
        stops.pop();
    }
    stops.push(tau_max);

    let rhs = |tau: f64, y: &[f64; 3]| -> Result<[f64; 3], RelationError> {
        let r = r0 * tau.exp();
        let w = y[1].exp();
        let g = radial_g(spec, r, w)?;
        Ok([r * w, g, g - fprime0])
    };
    let mut auditor = Auditor {
        r0,
        c0,
        lambda: spec.lambda,
        prev_u: 0.0,
        prev_uprime: c0,
        audit: StepAudit::default(),
    };
    let opts = StepperOptions {
        rtol: tol,
        atol: [tol * c0 * r0, tol, tol],
        h_init: dtau.min(0.01),
        h_min: 1e-14 * (1.0 + tau_max),
        max_steps: options.max_steps,
    };
    let mut audit_error = None;
    let states = integrate(rhs, 0.0, [0.0, c0.ln(), 0.0], &stops, &opts, |tau, y| {
        let r = r0 * tau.exp();
        let w = y[1].exp();
        match radial_g(spec, r, w) {
            Ok(g) => auditor.check(r, y[0], w, w * g / r, g),
            Err(e) => audit_error = Some(e),
        }
    })
    .map_err(|e| match e {
        IntegrateError::Rhs(e) => RadialError::Domain(e),
        other => RadialError::StepFailure(other.to_string()),
    })?;
    if let Some(e) = audit_error {
        return Err(e.into());
    }

    let n = states.len() + 1;
    let mut sol = RadialSolution {
        r0,
        c0,
        r: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        uprime: Vec::with_capacity(n),
        udoubleprime: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
        g_excess_integral: Vec::with_capacity(n),
        regime: spec.regime(),
        spec: spec.clone(),
        audit: auditor.audit,
    };
    let g0 = radial_g(spec, r0, c0)?;
    sol.push(r0, 0.0, c0, g0, 0.0);
    for (tau, y) in stops.iter().zip(&states) {
        let r = if *tau == tau_max { r_max } else { r0 * tau.exp() };
        let w = y[1].exp();
        let g = radial_g(spec, r, w)?;
        sol.push(r, y[0], w, g, y[2]);
    }
    Ok(sol)
}

impl RadialSolution {
    fn push(&mut self, r: f64, u: f64, uprime: f64, g: f64, excess: f64) {
        self.r.push(r);
        self.u.push(u);
        self.uprime.push(uprime);
        self.udoubleprime.push(uprime * g / r);
        self.g.push(g);
        self.g_excess_integral.push(excess);
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().expect("radial solution has nodes")
    }

    /// `(u, u')` at `r` by cubic Hermite interpolation in `ln r`.
    pub fn interpolate(&self, r: f64) -> Option<(f64, f64)> {
        if !(r >= self.r0 && r <= self.r_max()) {
            return None;
        }
        let i = match self.r.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(i) => return Some((self.u[i], self.uprime[i])),
            Err(i) => i - 1,
        };
        let (ta, tb) = (self.r[i].ln(), self.r[i + 1].ln());
        let h = tb - ta;
        let s = (r.ln() - ta) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let herm = |ya: f64, da: f64, yb: f64, db: f64| h00 * ya + h10 * h * da + h01 * yb + h11 * h * db;
        let u = herm(
            self.u[i],
            self.r[i] * self.uprime[i],
            self.u[i + 1],
            self.r[i + 1] * self.uprime[i + 1],
        );
        let z = herm(
            self.uprime[i].ln(),
            self.g[i],
            self.uprime[i + 1].ln(),
            self.g[i + 1],
        );
        Some((u, z.exp()))
    }

    /// Indices of the last decade of nodes (at least the last half).
    fn tail_indices(&self) -> std::ops::Range<usize> {
        let n = self.len();
        let cut = self.r_max() / 10.0;
        let start = self.r.iter().position(|&r| r >= cut).unwrap_or(0);
        start.min(n / 2)..n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialAsymptote {
    pub regime: Regime,
    pub kinf: f64,
    /// Bound on the contribution of `[r_max, ∞)`; not included in `kinf`.
    pub tail_estimate: f64,
    pub r0: f64,
    pub c0: f64,
}

/// Least-squares slope of `ln y` against `ln r` (positive entries only).
fn loglog_slope(r: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = r
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(&a, &b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Limit constant of the end: `lim u / r^{1+f'(0)}` in the power regime,
/// `lim u` in the bounded regime.
pub fn asymptotic_constant(sol: &RadialSolution) -> Result<RadialAsymptote, RadialError> {
    let fp0 = sol.spec.fprime0;
    let tail = sol.tail_indices();
    let last = sol.len() - 1;
    let r_last = sol.r[last];
    let (kinf, tail_estimate) = match sol.regime {
        Regime::Log => return Err(RadialError::Regime(Regime::Log)),
        Regime::Power => {
            let integral = sol.g_excess_integral[last];
            let kinf = sol.c0 * sol.r0.powf(-fp0) / (1.0 + fp0) * integral.exp();
            let excess: Vec<f64> = sol.g[tail.clone()].iter().map(|g| (g - fp0).abs()).collect();
            let e_last = (sol.g[last] - fp0).abs();
            let tail_int = if e_last == 0.0 {
                0.0
            } else {
                match loglog_slope(&sol.r[tail.clone()], &excess) {
                    Some(slope) if slope < 0.0 => e_last / -slope,
                    _ => f64::INFINITY,
                }
            };
            (kinf, kinf * tail_int.exp_m1())
        }
        Regime::Bounded => {
            let kinf = sol.u[last];
            let tail_est = match loglog_slope(&sol.r[tail.clone()], &sol.uprime[tail.clone()]) {
                Some(slope) if slope < -1.0 => sol.uprime[last] * r_last / (-slope - 1.0),
                _ => f64::INFINITY,
            };
            (kinf, tail_est)
        }
    };
    Ok(RadialAsymptote {
        regime: sol.regime,
        kinf,
        tail_estimate,
        r0: sol.r0,
        c0: sol.c0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catenoid(r: f64) -> f64 {
        let c = 0.5f64.sqrt();
        c * ((r / c).acosh() - (1.0 / c).acosh())
    }

    #[test]
    fn initial_conditions_are_exact() {
        let sol = solve_radial(&RelationSpec::linear(-0.5).unwrap(), 2.0, 0.7, 5.0, 1e-9).unwrap();
        assert_eq!(sol.r[0], 2.0);
        assert_eq!(sol.u[0], 0.0);
        assert_eq!(sol.uprime[0], 0.7);
        assert_eq!(sol.r_max(), 5.0);
    }

    #[test]
    fn catenoid_spot_value() {
        let sol = solve_radial(&RelationSpec::minimal(), 1.0, 1.0, 2.0, 1e-10).unwrap();
        let u2 = *sol.u.last().unwrap();
        assert!((u2 - catenoid(2.0)).abs() < 1e-8);
        assert!((u2 - 0.5789).abs() < 5e-5);
    }

    #[test]
    fn geometric_grid_has_64_points_per_decade() {
        let sol = solve_radial(&RelationSpec::minimal(), 1.0, 1.0, 100.0, 1e-9).unwrap();
        assert_eq!(sol.len(), 129);
        assert_eq!(sol.r_max(), 100.0);
    }

    #[test]
    fn g_examples() {
        let lin = RelationSpec::linear(-0.7).unwrap();
        assert!((radial_g(&lin, 3.0, 0.4).unwrap() + 0.7 * 1.16).abs() < 1e-14);
        let m = RelationSpec::minimal();
        assert!((radial_g(&m, 3.0, 2.0).unwrap() + 5.0).abs() < 1e-14);
        // Independent route: ∫₀¹ f'(ρκ) dρ = f(κ)/κ.
        let e = RelationSpec::exp_blend(0.25).unwrap();
        let g = radial_g(&e, 10.0, 0.1).unwrap();
        let kappa = 0.1 / (10.0 * 1.01f64.sqrt());
        let closed = 1.01 * e.eval_f(kappa).unwrap() / kappa;
        assert!((g - closed).abs() < 1e-13);
        assert!(g > -1.01 && g < -0.99);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = RelationSpec::minimal();
        assert!(solve_radial(&m, 0.0, 1.0, 2.0, 1e-9).is_err());
        assert!(solve_radial(&m, 1.0, -1.0, 2.0, 1e-9).is_err());
        assert!(solve_radial(&m, 1.0, 1.0, 0.5, 1e-9).is_err());
    }

    #[test]
    fn log_regime_has_no_constant() {
        let sol = solve_radial(&RelationSpec::minimal(), 1.0, 1.0, 10.0, 1e-9).unwrap();
        assert_eq!(asymptotic_constant(&sol), Err(RadialError::Regime(Regime::Log)));
    }

    #[test]
    fn interpolation_matches_solution() {
        let sol = solve_radial(&RelationSpec::minimal(), 1.0, 1.0, 50.0, 1e-11).unwrap();
        for r in [1.0, 1.3, 7.77, 49.0] {
            let (u, _) = sol.interpolate(r).unwrap();
            assert!((u - catenoid(r)).abs() < 1e-7, "r={r} err={}", u - catenoid(r));
        }
        assert!(sol.interpolate(0.5).is_none());
    }
}
