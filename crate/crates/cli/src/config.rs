//! Typed views of run-file sections.

use std::sync::Arc;

use weingarten_core::fdsolver::{BoundaryData, BoundaryFn, Damping, DomainKind, DomainSpec, SolverConfig};
use weingarten_core::radial::{solve_radial_with, RadialOptions, DEFAULT_POINTS_PER_DECADE};
use weingarten_core::relation::{registry, RelationSpec};

use crate::error::CliError;
use crate::runfile::{ParseError, RunFile};

pub fn relation(rf: &RunFile) -> Result<RelationSpec, CliError> {
    let kind = rf.require_str("relation", "kind")?;
    let rel = |e: weingarten_core::relation::RelationError| CliError::Relation(e.to_string());
    let spec = match kind {
        "minimal" => RelationSpec::minimal(),
        "linear" => RelationSpec::linear(rf.require_f64("relation", "a")?).map_err(rel)?,
        "expblend" => RelationSpec::exp_blend(rf.require_f64("relation", "lambda")?).map_err(rel)?,
        other => {
            let names: Vec<&str> = registry().iter().map(|r| r.0).collect();
            let near = names.iter().min_by_key(|n| strsim::levenshtein(other, n)).copied();
            let mut e = rf.error_at("relation", "kind", format!("unknown relation `{other}` (known: {})", names.join(", ")));
            e.suggestion = near.filter(|n| strsim::levenshtein(other, n) <= 3).map(str::to_owned);
            return Err(e.into());
        }
    };
    for key in ["a", "lambda"] {
        let used = matches!((kind, key), ("linear", "a") | ("expblend", "lambda"));
        if !used && rf.get("relation", key).is_some() {
            return Err(rf.error_at("relation", key, format!("`{key}` is not a parameter of `{kind}`")).into());
        }
    }
    Ok(spec)
}

pub fn domain(rf: &RunFile) -> Result<DomainSpec, CliError> {
    let kind = rf.require_str("domain", "kind")?;
    let geo = CliError::solver;
    let d = match kind {
        "disk" => DomainSpec::disk(rf.require_f64("domain", "R")?).map_err(geo)?,
        "ellipse" => DomainSpec::ellipse(rf.require_f64("domain", "a")?, rf.require_f64("domain", "b")?).map_err(geo)?,
        "annulus" => {
            DomainSpec::annulus(rf.require_f64("domain", "R_in")?, rf.require_f64("domain", "R_out")?).map_err(geo)?
        }
        "star" => {
            let rho = rf
                .list("domain", "rho")?
                .ok_or_else(|| ParseError::global("missing key `rho` in [domain]"))?;
            DomainSpec::star_convex(rho).map_err(geo)?
        }
        other => {
            return Err(rf
                .error_at("domain", "kind", format!("unknown domain `{other}` (known: disk, ellipse, annulus, star)"))
                .into())
        }
    };
    match rf.list("domain", "center")? {
        None => Ok(d),
        Some(c) if c.len() == 2 => Ok(d.with_center([c[0], c[1]])),
        Some(_) => Err(rf.error_at("domain", "center", "`center` expects two numbers").into()),
    }
}

pub fn solver(rf: &RunFile) -> Result<SolverConfig, CliError> {
    let d = SolverConfig::default();
    let s = "solver";
    let cfg = SolverConfig {
        n_s: rf.usize(s, "n_s")?.unwrap_or(d.n_s),
        n_theta: rf.usize(s, "n_theta")?.unwrap_or(d.n_theta),
        eps: rf.f64_or(s, "eps", d.eps)?,
        t_steps: rf.usize(s, "t_steps")?.unwrap_or(d.t_steps),
        newton_tol: rf.f64_or(s, "newton_tol", d.newton_tol)?,
        newton_max: rf.usize(s, "newton_max")?.unwrap_or(d.newton_max),
        damping: Damping {
            factor: rf.f64_or(s, "damping_factor", d.damping.factor)?,
            min_step: rf.f64_or(s, "min_step", d.damping.min_step)?,
            armijo: rf.f64_or(s, "armijo", d.damping.armijo)?,
        },
    };
    cfg.validate().map_err(|e| ParseError::global(format!("[solver]: {e}")))?;
    Ok(cfg)
}

#[derive(Debug, Clone, Copy)]
pub struct RadialParams {
    pub r0: f64,
    pub c0: f64,
    pub r_max: f64,
    pub tol: f64,
    pub options: RadialOptions,
}

/// `[radial]` parameters; `r_max` defaults to `r_max_factor · R0`.
pub fn radial(rf: &RunFile, default_r0: f64, r_max_factor: f64) -> Result<RadialParams, CliError> {
    let r0 = rf.f64_or("radial", "R0", default_r0)?;
    Ok(RadialParams {
        r0,
        c0: rf.f64_or("radial", "C0", 1.0)?,
        r_max: rf.f64_or("radial", "r_max", r_max_factor * r0)?,
        tol: rf.f64_or("radial", "tol", 1e-10)?,
        options: RadialOptions {
            points_per_decade: rf.usize("radial", "points_per_decade")?.unwrap_or(DEFAULT_POINTS_PER_DECADE),
            ..RadialOptions::default()
        },
    })
}

/// Trigonometric boundary series plus an optional plane `p · x`.
#[derive(Debug, Clone, Default, PartialEq)]
struct Series {
    constant: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Series {
    fn read(rf: &RunFile, prefix: &str) -> Result<Self, ParseError> {
        let key = |k: &str| format!("{prefix}{k}");
        Ok(Self {
            constant: rf.f64_or("boundary", &key("constant"), 0.0)?,
            cos: rf.list("boundary", &key("cos"))?.unwrap_or_default(),
            sin: rf.list("boundary", &key("sin"))?.unwrap_or_default(),
        })
    }

    fn into_fn(self, plane: [f64; 2], center: [f64; 2], rho: impl Fn(f64) -> f64 + Send + Sync + 'static) -> BoundaryFn {
        Arc::new(move |t: f64| {
            let mut v = self.constant;
            for (k, a) in self.cos.iter().enumerate() {
                v += a * ((k + 1) as f64 * t).cos();
            }
            for (k, b) in self.sin.iter().enumerate() {
                v += b * ((k + 1) as f64 * t).sin();
            }
            let r = rho(t);
            v + plane[0] * (center[0] + r * t.cos()) + plane[1] * (center[1] + r * t.sin())
        })
    }
}

/// Boundary data for `domain`. `spec` is needed only for
/// `outer_from_radial`, which adds the radial solution's heights.
pub fn boundary(rf: &RunFile, domain: &DomainSpec, spec: &RelationSpec) -> Result<BoundaryData, CliError> {
    let plane = match rf.list("boundary", "plane")? {
        None => [0.0, 0.0],
        Some(p) if p.len() == 2 => [p[0], p[1]],
        Some(_) => return Err(rf.error_at("boundary", "plane", "`plane` expects two slopes").into()),
    };
    let center = domain.center;
    if let DomainKind::Annulus { r_in, r_out } = domain.kind {
        for key in ["constant", "cos", "sin"] {
            if rf.get("boundary", key).is_some() {
                return Err(rf
                    .error_at("boundary", key, format!("annulus data uses `inner_{key}` and `outer_{key}`"))
                    .into());
            }
        }
        let mut inner = Series::read(rf, "inner_")?;
        let mut outer = Series::read(rf, "outer_")?;
        if rf.bool("boundary", "outer_from_radial")?.unwrap_or(false) {
            let p = radial(rf, r_in, 1.0)?;
            if p.r0 > r_in {
                return Err(rf.error_at("radial", "R0", "`R0` must not exceed the inner radius").into());
            }
            let sol = solve_radial_with(spec, p.r0, p.c0, r_out, p.tol, &p.options).map_err(CliError::solver)?;
            let at = |r: f64| sol.interpolate(r).map(|v| v.0).ok_or_else(|| CliError::Solver(format!("radial solution does not cover r = {r}")));
            inner.constant += at(r_in)?;
            outer.constant += *sol.u.last().expect("nonempty radial solution");
        }
        Ok(BoundaryData::Annulus {
            inner: inner.into_fn(plane, center, move |_| r_in),
            outer: outer.into_fn(plane, center, move |_| r_out),
        })
    } else {
        for key in ["inner_constant", "inner_cos", "inner_sin", "outer_constant", "outer_cos", "outer_sin", "outer_from_radial"] {
            if rf.get("boundary", key).is_some() {
                return Err(rf.error_at("boundary", key, format!("`{key}` applies only to annulus domains")).into());
            }
        }
        let d = domain.clone();
        let rho = move |t: f64| d.rho(t).unwrap_or(0.0);
        Ok(BoundaryData::Curve(Series::read(rf, "")?.into_fn(plane, center, rho)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    Auto,
    Log,
    Power,
    Bounded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub model: FitModel,
    pub exponent: Option<f64>,
    pub window: Option<(f64, f64)>,
}

pub fn fit_options(rf: &RunFile) -> Result<FitOptions, CliError> {
    let model = match rf.str("fit", "model").unwrap_or("auto") {
        "auto" => FitModel::Auto,
        "log" => FitModel::Log,
        "power" => FitModel::Power,
        "bounded" => FitModel::Bounded,
        other => {
            return Err(rf
                .error_at("fit", "model", format!("unknown model `{other}` (known: auto, log, power, bounded)"))
                .into())
        }
    };
    let window = match rf.list("fit", "window")? {
        None => None,
        Some(w) if w.len() == 2 && 0.0 < w[0] && w[0] < w[1] => Some((w[0], w[1])),
        Some(_) => return Err(rf.error_at("fit", "window", "`window` expects two increasing positive radii").into()),
    };
    let mut exponent = rf.f64("fit", "exponent")?;
    if exponent.is_none() && rf.has("relation") {
        let spec = relation(rf)?;
        exponent = Some(1.0 + spec.fprime0);
    }
    Ok(FitOptions { model, exponent, window })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rf(text: &str) -> RunFile {
        RunFile::parse_str(text).unwrap()
    }

    #[test]
    fn relations() {
        assert_eq!(relation(&rf("[relation]\nkind = linear\na = -0.5\n")).unwrap().fprime0, -0.5);
        assert!(matches!(relation(&rf("[relation]\nkind = linear\n")), Err(CliError::Parse(_))));
        assert!(matches!(relation(&rf("[relation]\nkind = linear\na = 0.5\n")), Err(CliError::Relation(_))));
        match relation(&rf("[relation]\nkind = linaer\n")) {
            Err(CliError::Parse(e)) => assert_eq!(e.suggestion.as_deref(), Some("linear")),
            other => panic!("{other:?}"),
        }
        assert!(relation(&rf("[relation]\nkind = minimal\na = -2\n")).is_err());
    }

    #[test]
    fn boundary_series_on_a_disk() {
        let f = rf("[domain]\nkind = disk\nR = 2\n[boundary]\nconstant = 1\ncos = 0, 0.5\nplane = 0.25, 0\n");
        let d = domain(&f).unwrap();
        let BoundaryData::Curve(phi) = boundary(&f, &d, &RelationSpec::minimal()).unwrap() else { panic!() };
        // 1 + 0.5 cos(0) + 0.25 * 2
        assert!((phi(0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn annulus_rejects_curve_keys() {
        let f = rf("[domain]\nkind = annulus\nR_in = 1\nR_out = 4\n[boundary]\nconstant = 1\n");
        assert!(boundary(&f, &domain(&f).unwrap(), &RelationSpec::minimal()).is_err());
    }

    #[test]
    fn radial_outer_data() {
        let f = rf("[domain]\nkind = annulus\nR_in = 1\nR_out = 4\n[boundary]\nouter_from_radial = true\n");
        let BoundaryData::Annulus { inner, outer } = boundary(&f, &domain(&f).unwrap(), &RelationSpec::minimal()).unwrap()
        else {
            panic!()
        };
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let exact = c * ((4.0 / c).acosh() - (1.0 / c).acosh());
        assert!(inner(0.3).abs() < 1e-14 && (outer(0.3) - exact).abs() < 1e-8);
    }

    #[test]
    fn solver_defaults_and_validation() {
        assert_eq!(solver(&rf("")).unwrap(), SolverConfig::default());
        assert!(solver(&rf("[solver]\neps = -1\n")).is_err());
    }
}
