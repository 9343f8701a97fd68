//! Weingarten relations `κ₂ = f(κ₁)`.
//!
//! A relation is defined natively on `[c, ∞)` where `c` is the umbilic
//! constant (`f(c) = c`). Below `c` the relation is extended by reflecting
//! its graph across the diagonal, so that `f ∘ f = Id` and the associated
//! curvature operator is defined for every 2-jet.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

/// Absolute tolerance of the reflection root-finder.
pub const REFLECTION_TOL: f64 = 1e-12;

/// `|f'(0) + 1|` below this value selects the logarithmic regime.
pub const LOG_REGIME_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelationError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid relation parameters: {0}")]
    InvalidParameter(String),
}

/// Growth regime of radial ends, selected by the sign of `f'(0) + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `-1 < f'(0) < 0`: ends grow like `r^(1+f'(0))`.
    Power,
    /// `f'(0) = -1`: ends grow like `log r`.
    Log,
    /// `f'(0) < -1`: ends converge to a plane.
    Bounded,
}

impl Regime {
    pub fn from_fprime0(fprime0: f64) -> Self {
        if (fprime0 + 1.0).abs() <= LOG_REGIME_TOL {
            Regime::Log
        } else if fprime0 > -1.0 {
            Regime::Power
        } else {
            Regime::Bounded
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Power => "power",
            Regime::Log => "log",
            Regime::Bounded => "bounded",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied relation given by `f` and `f'` on the native branch `[c, ∞)`.
#[derive(Clone)]
pub struct CustomRelation {
    pub name: String,
    f: ScalarFn,
    fprime: ScalarFn,
    /// `false` when `f'` is only Lipschitz; radial quadrature then drops to
    /// a composite midpoint rule.
    pub smooth: bool,
}

impl CustomRelation {
    pub fn new<F, G>(name: impl Into<String>, f: F, fprime: G, smooth: bool) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            f: Arc::new(f),
            fprime: Arc::new(fprime),
            smooth,
        }
    }
}

impl fmt::Debug for CustomRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomRelation")
            .field("name", &self.name)
            .field("smooth", &self.smooth)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum RelationKind {
    /// `f(t) = a t`, `a < 0`.
    Linear { a: f64 },
    /// `f(t) = -t`.
    Minimal,
    /// `f(t) = -(Λ t + (1 - Λ)(1 - e^{-t}))`, with `f'(0) = -1`.
    ExpBlend { lambda: f64 },
    Custom(CustomRelation),
}

/// A Weingarten relation together with its ellipticity metadata.
#[derive(Debug, Clone)]
pub struct RelationSpec {
    pub kind: RelationKind,
    pub umbilic_c: f64,
    /// Declared ellipticity constant: `-1/Λ ≤ f' ≤ -Λ` on the native branch.
    pub lambda: f64,
    pub fprime0: f64,
}

impl RelationSpec {
    pub fn minimal() -> Self {
        Self {
            kind: RelationKind::Minimal,
            umbilic_c: 0.0,
            lambda: 1.0,
            fprime0: -1.0,
        }
    }

    pub fn linear(a: f64) -> Result<Self, RelationError> {
        if !(a.is_finite() && a < 0.0) {
            return Err(RelationError::InvalidParameter(format!(
                "linear relation needs a finite a < 0, got {a}"
            )));
        }
        Ok(Self {
            kind: RelationKind::Linear { a },
            umbilic_c: 0.0,
            lambda: a.abs().min(1.0 / a.abs()),
            fprime0: a,
        })
    }

    pub fn exp_blend(lambda: f64) -> Result<Self, RelationError> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(RelationError::InvalidParameter(format!(
                "exp-blend relation needs 0 < lambda < 1, got {lambda}"
            )));
        }
        Ok(Self {
            kind: RelationKind::ExpBlend { lambda },
            umbilic_c: 0.0,
            lambda,
            fprime0: -1.0,
        })
    }

    /// Wraps a user relation. `f'(0)` is measured from the supplied
    /// derivative (through the reflection when `c > 0`).
    pub fn custom(
        relation: CustomRelation,
        umbilic_c: f64,
        lambda: f64,
    ) -> Result<Self, RelationError> {
        if !(umbilic_c.is_finite() && umbilic_c >= 0.0) {
            return Err(RelationError::InvalidParameter(format!(
                "umbilic constant must be finite and >= 0, got {umbilic_c}"
            )));
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(RelationError::InvalidParameter(format!(
                "lambda must lie in (0, 1], got {lambda}"
            )));
        }
        let mut spec = Self {
            kind: RelationKind::Custom(relation),
            umbilic_c,
            lambda,
            fprime0: f64::NAN,
        };
        spec.fprime0 = spec.eval_fprime(0.0)?;
        Ok(spec)
    }

    pub fn name(&self) -> String {
        match &self.kind {
            RelationKind::Linear { a } => format!("linear(a={a})"),
            RelationKind::Minimal => "minimal".to_string(),
            RelationKind::ExpBlend { lambda } => format!("expblend(lambda={lambda})"),
            RelationKind::Custom(c) => format!("custom({})", c.name),
        }
    }

    pub fn is_minimal_type(&self) -> bool {
        self.umbilic_c == 0.0
    }

    pub fn regime(&self) -> Regime {
        Regime::from_fprime0(self.fprime0)
    }

    /// Whether `f'` is smooth enough for Gauss-Legendre quadrature.
    pub fn has_smooth_derivative(&self) -> bool {
        match &self.kind {
            RelationKind::Custom(c) => c.smooth,
            _ => true,
        }
    }

    fn native_f(&self, t: f64) -> f64 {
        match &self.kind {
            RelationKind::Linear { a } => a * t,
            RelationKind::Minimal => -t,
            RelationKind::ExpBlend { lambda } => -(lambda * t - (1.0 - lambda) * (-t).exp_m1()),
            RelationKind::Custom(c) => (c.f)(t),
        }
    }

    fn native_fprime(&self, t: f64) -> f64 {
        match &self.kind {
            RelationKind::Linear { a } => *a,
            RelationKind::Minimal => -1.0,
            RelationKind::ExpBlend { lambda } => -(lambda + (1.0 - lambda) * (-t).exp()),
            RelationKind::Custom(c) => (c.fprime)(t),
        }
    }

    /// The unique `s ≥ c` on the native branch with `f(s) = t`, for `t < c`.
    fn reflect(&self, t: f64) -> Result<f64, RelationError> {
        match &self.kind {
            RelationKind::Minimal => return Ok(-t),
            RelationKind::Linear { a } => return Ok(t / a),
            _ => {}
        }
        let c = self.umbilic_c;
        // f(s) ≤ c - Λ (s - c) on the native branch, so f(hi) ≤ t.
        let mut lo = c;
        let mut hi = c + 1.01 * (c - t) / self.lambda;
        let phi = |s: f64| self.native_f(s) - t;
        let (f_lo, f_hi) = (phi(lo), phi(hi));
        if !(f_lo >= 0.0 && f_hi <= 0.0) {
            return Err(RelationError::Domain(format!(
                "cannot bracket the reflection of t={t}: f({lo})-t={f_lo}, f({hi})-t={f_hi}"
            )));
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..200 {
            let val = phi(s);
            // |s - s*| ≤ |val| / Λ since f' is bounded away from zero.
            if val.abs() <= REFLECTION_TOL * self.lambda * (1.0 + t.abs()) {
                return Ok(s);
            }
            if val > 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let d = self.native_fprime(s);
            let newton = s - val / d;
            s = if d < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= f64::EPSILON * (1.0 + s.abs()) {
                return Ok(s);
            }
        }
        Err(RelationError::Domain(format!(
            "reflection root-finding did not converge for t={t}"
        )))
    }

    /// `f(t)`, through the reflection extension when `t < c`.
    pub fn eval_f(&self, t: f64) -> Result<f64, RelationError> {
        if !t.is_finite() {
            return Err(RelationError::Domain(format!("non-finite argument {t}")));
        }
        if t >= self.umbilic_c {
            Ok(self.native_f(t))
        } else {
            self.reflect(t)
        }
    }

    /// `f'(t)`; on the reflected branch `1 / f'(f⁻¹(t))`.
    pub fn eval_fprime(&self, t: f64) -> Result<f64, RelationError> {
        if !t.is_finite() {
            return Err(RelationError::Domain(format!("non-finite argument {t}")));
        }
        if t >= self.umbilic_c {
            Ok(self.native_fprime(t))
        } else {
            match &self.kind {
                RelationKind::Minimal => Ok(-1.0),
                RelationKind::Linear { a } => Ok(1.0 / a),
                _ => {
                    let s = self.reflect(t)?;
                    Ok(1.0 / self.native_fprime(s))
                }
            }
        }
    }

    /// Samples the relation on `[c, t_max]` and reports invariant violations.
    pub fn validate(&self, t_max: f64, n_samples: usize) -> ValidationReport {
        let n = n_samples.max(2);
        let c = self.umbilic_c;
        let mut failures = Vec::new();
        let lower = -1.0 / self.lambda;
        let upper = -self.lambda;
        let mut worst_slope = 0.0f64;
        let mut lambda_measured = f64::INFINITY;
        let step = (t_max - c) / (n - 1) as f64;
        let mut prev = None;
        for i in 0..n {
            let t = c + step * i as f64;
            let (ft, dft) = match (self.eval_f(t), self.eval_fprime(t)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    failures.push(format!("evaluation failed at t={t}: {e}"));
                    continue;
                }
            };
            lambda_measured = lambda_measured.min(dft.abs().min(1.0 / dft.abs()));
            worst_slope = worst_slope.max(lower - dft).max(dft - upper);
            if let Some((tp, fp)) = prev {
                let slope = (ft - fp) / (t - tp);
                worst_slope = worst_slope.max(lower - slope).max(slope - upper);
            }
            prev = Some((t, ft));
        }
        let umbilic_violation = self
            .eval_f(c)
            .map(|v| (v - c).abs())
            .unwrap_or(f64::INFINITY);
        let minimal_type_violation = if self.is_minimal_type() {
            self.eval_f(0.0).map(f64::abs).unwrap_or(f64::INFINITY)
        } else {
            0.0
        };
        let tol = 1e-9;
        if worst_slope > tol {
            failures.push(format!("ellipticity bound violated by {worst_slope:e}"));
        }
        if umbilic_violation > tol {
            failures.push(format!("|f(c) - c| = {umbilic_violation:e}"));
        }
        if minimal_type_violation > tol {
            failures.push(format!("|f(0)| = {minimal_type_violation:e}"));
        }
        let regime = self.regime();
        ValidationReport {
            relation: self.name(),
            worst_violation: worst_slope.max(0.0).max(umbilic_violation).max(minimal_type_violation),
            slope_violation: worst_slope.max(0.0),
            umbilic_violation,
            minimal_type_violation,
            fprime0: self.fprime0,
            lambda_declared: self.lambda,
            lambda_measured,
            regime,
            exponent: matches!(regime, Regime::Power).then(|| 1.0 + self.fprime0),
            passed: failures.is_empty(),
            failures,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub relation: String,
    pub worst_violation: f64,
    pub slope_violation: f64,
    pub umbilic_violation: f64,
    pub minimal_type_violation: f64,
    pub fprime0: f64,
    pub lambda_declared: f64,
    pub lambda_measured: f64,
    pub regime: Regime,
    /// `1 + f'(0)` in the power regime.
    pub exponent: Option<f64>,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Built-in relation families with their parameter names, for `relation list`.
pub fn registry() -> Vec<(&'static str, &'static str, &'static str)> {
    vec![
        ("minimal", "", "f(t) = -t"),
        ("linear", "a", "f(t) = a t, a < 0"),
        (
            "expblend",
            "lambda",
            "f(t) = -(lambda t + (1 - lambda)(1 - exp(-t))), f'(0) = -1",
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn custom_cubic_blend() -> RelationSpec {
        // f' ranges over [-3/2, -1/2].
        let rel = CustomRelation::new(
            "atan-blend",
            |t: f64| -(0.5 * t + t.atan()),
            |t: f64| -(0.5 + 1.0 / (1.0 + t * t)),
            true,
        );
        RelationSpec::custom(rel, 0.0, 0.5).unwrap()
    }

    #[test]
    fn built_in_values() {
        let m = RelationSpec::minimal();
        assert_eq!(m.eval_f(0.7).unwrap(), -0.7);
        assert_eq!(m.eval_f(-0.3).unwrap(), 0.3);
        let l = RelationSpec::linear(-0.5).unwrap();
        assert_eq!(l.eval_f(2.0).unwrap(), -1.0);
        assert_eq!(l.eval_fprime(3.0).unwrap(), -0.5);
        assert_eq!(l.eval_fprime(-3.0).unwrap(), -2.0);
        let e = RelationSpec::exp_blend(0.25).unwrap();
        assert_eq!(e.eval_fprime(0.0).unwrap(), -1.0);
        assert!((e.eval_fprime(60.0).unwrap() + 0.25).abs() < 1e-15);
    }

    #[test]
    fn validation_regimes() {
        let r = RelationSpec::minimal().validate(10.0, 100);
        assert_eq!(r.regime, Regime::Log);
        assert_eq!(r.worst_violation, 0.0);
        let r = RelationSpec::linear(-2.0).unwrap().validate(10.0, 100);
        assert_eq!(r.regime, Regime::Bounded);
        assert_eq!(r.lambda_measured, 0.5);
        let r = RelationSpec::linear(-0.5).unwrap().validate(10.0, 100);
        assert_eq!(r.regime, Regime::Power);
        assert_eq!(r.exponent, Some(0.5));
        assert!(r.passed);
    }

    #[test]
    fn reflection_is_an_involution() {
        let specs = [
            RelationSpec::exp_blend(0.25).unwrap(),
            RelationSpec::linear(-3.0).unwrap(),
            custom_cubic_blend(),
        ];
        for spec in &specs {
            for i in 0..200 {
                let t = 0.05 * i as f64;
                let back = spec.eval_f(spec.eval_f(t).unwrap()).unwrap();
                assert!((back - t).abs() < 1e-10, "{}: t={t} back={back}", spec.name());
            }
        }
    }

    #[test]
    fn slopes_stay_in_ellipticity_band() {
        for spec in [RelationSpec::exp_blend(0.25).unwrap(), custom_cubic_blend()] {
            let lo = -1.0 / spec.lambda - 1e-6;
            let hi = -spec.lambda + 1e-6;
            for i in -200..200 {
                let t0 = 0.05 * i as f64;
                let t1 = t0 + 0.05;
                let slope = (spec.eval_f(t1).unwrap() - spec.eval_f(t0).unwrap()) / 0.05;
                assert!(slope >= lo && slope <= hi, "slope {slope} at {t0}");
            }
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        let h = 1e-5;
        for spec in [RelationSpec::exp_blend(0.25).unwrap(), custom_cubic_blend()] {
            for i in -40..40 {
                let t = 0.137 * i as f64 + 0.01;
                if t.abs() < 10.0 * h {
                    continue;
                }
                let fd = (spec.eval_f(t + h).unwrap() - spec.eval_f(t - h).unwrap()) / (2.0 * h);
                let an = spec.eval_fprime(t).unwrap();
                assert!(((fd - an) / an).abs() < 1e-6, "t={t}: fd={fd} an={an}");
            }
        }
    }

    #[test]
    fn non_monotone_custom_relation_fails_to_bracket() {
        // Increasing f violates ellipticity; the reflection cannot be bracketed.
        let rel = CustomRelation::new("bad", |t: f64| t * t, |t: f64| 2.0 * t, true);
        let spec = RelationSpec {
            kind: RelationKind::Custom(rel),
            umbilic_c: 0.0,
            lambda: 0.5,
            fprime0: -1.0,
        };
        assert!(matches!(spec.eval_f(-1.0), Err(RelationError::Domain(_))));
        assert!(!spec.validate(2.0, 20).passed);
    }

    #[test]
    fn umbilic_constant_relation() {
        // f(t) = 2 - t on [1, ∞): umbilic at c = 1, symmetric.
        let rel = CustomRelation::new("cmc", |t: f64| 2.0 - t, |_| -1.0, true);
        let spec = RelationSpec::custom(rel, 1.0, 1.0).unwrap();
        assert!((spec.eval_f(0.5).unwrap() - 1.5).abs() < 1e-12);
        assert!(spec.validate(5.0, 50).passed);
        assert!(!spec.is_minimal_type());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(RelationSpec::linear(0.5).is_err());
        assert!(RelationSpec::exp_blend(1.5).is_err());
    }
}
