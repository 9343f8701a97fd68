use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use weingarten_core::asymfit::{circle_averages, classify_growth, fit_log_expansion, fit_power};
use weingarten_core::fdsolver::{solve_dirichlet, solve_exterior, BoundaryData, DomainKind, FdError, GridSolution};
use weingarten_core::radial::{asymptotic_constant, solve_radial_with};
use weingarten_core::relation::{registry, Regime, RelationSpec};
use weingarten_core::verify::{run_criterion, CRITERIA};

use crate::config::{self, FitModel, FitOptions};
use crate::emit::{self, GRID_HEADER, RADIAL_HEADER};
use crate::error::CliError;
use crate::runfile::{schema, ParseError, RunFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    RelationList,
    RelationCheck,
    RadialSolve,
    RadialAsymptote,
    DirichletSolve,
    ExteriorSolve,
    FitExpansion,
    Verify,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Self::RelationList,
        Self::RelationCheck,
        Self::RadialSolve,
        Self::RadialAsymptote,
        Self::DirichletSolve,
        Self::ExteriorSolve,
        Self::FitExpansion,
        Self::Verify,
        Self::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::RelationList => "relation list",
            Self::RelationCheck => "relation check",
            Self::RadialSolve => "radial solve",
            Self::RadialAsymptote => "radial asymptote",
            Self::DirichletSolve => "dirichlet solve",
            Self::ExteriorSolve => "exterior solve",
            Self::FitExpansion => "fit expansion",
            Self::Verify => "verify",
            Self::Sweep => "sweep",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn needs_run_file(self) -> bool {
        !matches!(self, Self::RelationList | Self::Verify)
    }
}

pub struct Context {
    pub rf: RunFile,
    pub out: PathBuf,
    pub seed: u64,
}

/// Accumulated outcome of one command.
#[derive(Debug, Default)]
pub struct Report {
    pub result: Value,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub verdicts: Vec<Value>,
    pub partial: bool,
    /// Human-readable lines for stdout.
    pub lines: Vec<String>,
}

impl Report {
    fn wrote(&mut self, ctx: &Context, name: &str) -> PathBuf {
        self.outputs.push(name.to_owned());
        ctx.out.join(name)
    }
}

/// `(r, ū)` profile of a solve, used by sweep fits.
type Profile = Option<(Vec<f64>, Vec<f64>)>;

pub fn run(cmd: Command, ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    match cmd {
        Command::RelationList => relation_list(ctx, report),
        Command::RelationCheck => relation_check(ctx, report),
        Command::RadialSolve => radial_solve(ctx, report).map(drop),
        Command::RadialAsymptote => radial_asymptote(ctx, report),
        Command::DirichletSolve => grid_solve(ctx, report, false).map(drop),
        Command::ExteriorSolve => grid_solve(ctx, report, true).map(drop),
        Command::FitExpansion => fit_expansion(ctx, report),
        Command::Verify => verify(ctx, report),
        Command::Sweep => sweep(ctx, report),
    }
}

fn relation_list(ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    let entries: Vec<Value> = registry()
        .into_iter()
        .map(|(name, params, formula)| json!({"name": name, "parameters": params, "formula": formula}))
        .collect();
    for (name, params, formula) in registry() {
        let params = if params.is_empty() { "-" } else { params };
        report.lines.push(format!("{name:<10} {params:<8} {formula}"));
    }
    emit::write_json(&report.wrote(ctx, "relations.json"), &entries)?;
    report.result = Value::Array(entries);
    Ok(())
}

fn relation_check(ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    let rf = &ctx.rf;
    rf.require("relation", "relation check")?;
    let spec = config::relation(rf)?;
    let t_max = rf.f64_or("relation", "t_max", 10.0)?;
    if !(t_max > spec.umbilic_c) {
        return Err(rf.error_at("relation", "t_max", "`t_max` must exceed the umbilic constant").into());
    }
    let samples = rf.usize("relation", "samples")?.unwrap_or(1001);
    let mut v = spec.validate(t_max, samples);
    if let Some(expected) = rf.f64("relation", "fprime0")? {
        if (expected - spec.fprime0).abs() > 1e-12 {
            v.passed = false;
            v.failures.push(format!("f'(0) = {} but the run file asserts {expected}", spec.fprime0));
        }
    }
    emit::write_json(&report.wrote(ctx, "check.json"), &v)?;
    report.lines.push(format!(
        "{}: {} (regime {}, worst violation {:.3e})",
        v.relation,
        if v.passed { "valid" } else { "INVALID" },
        v.regime,
        v.worst_violation
    ));
    report.lines.extend(v.failures.iter().map(|f| format!("  {f}")));
    report.result = emit::to_value(&v);
    if v.passed {
        Ok(())
    } else {
        Err(CliError::Relation(format!("{} failed validation: {}", v.relation, v.failures.join("; "))))
    }
}

fn radial_solve(ctx: &Context, report: &mut Report) -> Result<Profile, CliError> {
    let rf = &ctx.rf;
    rf.require("relation", "radial solve")?;
    let spec = config::relation(rf)?;
    let p = config::radial(rf, 1.0, 100.0)?;
    let sol = solve_radial_with(&spec, p.r0, p.c0, p.r_max, p.tol, &p.options).map_err(CliError::solver)?;
    emit::write_csv(&report.wrote(ctx, "radial.csv"), RADIAL_HEADER, &emit::radial_rows(&sol))?;
    let summary = json!({
        "relation": spec.name(),
        "R0": sol.r0,
        "C0": sol.c0,
        "r_max": sol.r_max(),
        "points": sol.len(),
        "regime": sol.regime,
        "audit_steps": sol.audit.steps_checked,
        "audit_violations": sol.audit.violations,
    });
    emit::write_json(&report.wrote(ctx, "radial.json"), &summary)?;
    report.lines.push(format!(
        "radial {}: {} points on [{}, {}], u(r_max) = {:.12e}",
        spec.name(),
        sol.len(),
        sol.r0,
        sol.r_max(),
        sol.u.last().copied().unwrap_or(f64::NAN)
    ));
    report.result = summary;
    if !sol.audit.clean() {
        report.partial = true;
        return Err(CliError::Solver(format!("a-priori bounds violated: {}", sol.audit.violations.join("; "))));
    }
    Ok(Some((sol.r.clone(), sol.u.clone())))
}

#[derive(Serialize)]
struct AsymptoteRecord {
    regime: Regime,
    #[serde(rename = "Kinf")]
    kinf: f64,
    tail_estimate: f64,
    #[serde(rename = "R0")]
    r0: f64,
    #[serde(rename = "C0")]
    c0: f64,
}

fn radial_asymptote(ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    let rf = &ctx.rf;
    rf.require("relation", "radial asymptote")?;
    let spec = config::relation(rf)?;
    let p = config::radial(rf, 1.0, 1e8)?;
    let sol = solve_radial_with(&spec, p.r0, p.c0, p.r_max, p.tol, &p.options).map_err(CliError::solver)?;
    let a = asymptotic_constant(&sol).map_err(CliError::solver)?;
    let rec = AsymptoteRecord { regime: a.regime, kinf: a.kinf, tail_estimate: a.tail_estimate, r0: a.r0, c0: a.c0 };
    emit::write_json(&report.wrote(ctx, "asymptote.json"), &rec)?;
    report.lines.push(format!("{} regime: Kinf = {:.12e} (tail estimate {:.3e})", a.regime, a.kinf, a.tail_estimate));
    report.result = emit::to_value(&rec);
    Ok(())
}

fn write_grid(ctx: &Context, report: &mut Report, sol: &GridSolution, spec: &RelationSpec) -> Result<(), CliError> {
    emit::write_csv(&report.wrote(ctx, "grid.csv"), GRID_HEADER, &emit::grid_rows(sol, spec)?)?;
    let summary = json!({
        "converged": sol.converged,
        "residual_norm": sol.residual_norm,
        "continuation_trace": sol.continuation_trace,
        "wall_time": sol.wall_time,
        "newton_iterations": sol.newton_iterations,
        "delta_h": sol.delta_h(),
        "n_s": sol.grid.n_s,
        "n_theta": sol.grid.n_theta,
        "nodes": sol.grid.len(),
    });
    emit::write_json(&report.wrote(ctx, "solution.json"), &summary)?;
    report.result = summary;
    Ok(())
}

fn grid_solve(ctx: &Context, report: &mut Report, exterior: bool) -> Result<Profile, CliError> {
    let rf = &ctx.rf;
    let name = if exterior { "exterior solve" } else { "dirichlet solve" };
    rf.require("relation", name)?;
    rf.require("domain", name)?;
    let spec = config::relation(rf)?;
    let domain = config::domain(rf)?;
    let cfg = config::solver(rf)?;
    let bc = config::boundary(rf, &domain, &spec)?;
    let result = match (exterior, bc) {
        (true, BoundaryData::Annulus { inner, outer }) => solve_exterior(&spec, &domain, inner, outer, &cfg),
        (true, BoundaryData::Curve(_)) => {
            return Err(rf.error_at("domain", "kind", "`exterior solve` needs an annulus domain").into())
        }
        (false, bc) => solve_dirichlet(&spec, &domain, &bc, &cfg),
    };
    match result {
        Ok(sol) => {
            write_grid(ctx, report, &sol, &spec)?;
            report.lines.push(format!(
                "{name}: {} nodes, residual {:.3e}, {} Newton iterations",
                sol.grid.len(),
                sol.residual_norm,
                sol.newton_iterations
            ));
            let profile = matches!(domain.kind, DomainKind::Annulus { .. }).then(|| circle_averages(&sol));
            Ok(profile)
        }
        Err(FdError::ContinuationStall { t, bisections, partial }) => {
            write_grid(ctx, report, &partial, &spec)?;
            report.partial = true;
            Err(CliError::Solver(format!(
                "continuation stalled at t = {t} after {bisections} bisections; partial solution written"
            )))
        }
        Err(e) => Err(CliError::solver(e)),
    }
}

/// Fit summary written by `fit expansion` and sweeps.
#[derive(Debug, Clone, Serialize)]
pub struct FitRecord {
    pub regime: Regime,
    pub d: f64,
    pub c: f64,
    pub alpha: Option<f64>,
    #[serde(rename = "Kinf")]
    pub kinf: Option<f64>,
    #[serde(rename = "R2")]
    pub r2: f64,
    pub window: [f64; 2],
    pub warnings: Vec<String>,
}

/// Last two decades of the data, clipped to its range.
pub fn default_window(r: &[f64]) -> Option<(f64, f64)> {
    let (lo, hi) = (*r.first()?, *r.last()?);
    Some(((hi / 100.0).max(lo), hi))
}

pub fn fit_profile(r: &[f64], u: &[f64], opts: &FitOptions) -> Result<FitRecord, CliError> {
    let window = opts.window.or_else(|| default_window(r));
    let mut warnings = Vec::new();
    let model = match opts.model {
        FitModel::Auto => {
            let v = classify_growth(r, u, window).map_err(CliError::solver)?;
            if !v.decisive {
                warnings.push(format!("growth classification not decisive (slope {:.3}, R2 {:.3})", v.slope, v.slope_r2));
            }
            match v.regime {
                Regime::Power => FitModel::Power,
                Regime::Log => FitModel::Log,
                Regime::Bounded => FitModel::Bounded,
            }
        }
        m => m,
    };
    if model == FitModel::Power {
        let beta = opts
            .exponent
            .ok_or_else(|| ParseError::global("power-law growth needs `exponent` in [fit] or a [relation] section"))?;
        let f = fit_power(r, u, beta, window).map_err(CliError::solver)?;
        warnings.extend(f.warnings);
        return Ok(FitRecord {
            regime: Regime::Power,
            d: f.d,
            c: f.c,
            alpha: None,
            kinf: f.kinf,
            r2: f.model_r2,
            window: [f.window.0, f.window.1],
            warnings,
        });
    }
    let f = fit_log_expansion(r, u, window).map_err(CliError::solver)?;
    warnings.extend(f.warnings);
    let bounded = model == FitModel::Bounded;
    Ok(FitRecord {
        regime: if bounded { Regime::Bounded } else { Regime::Log },
        d: f.d,
        c: f.c,
        alpha: f.alpha,
        kinf: bounded.then_some(f.c),
        r2: f.model_r2,
        window: [f.window.0, f.window.1],
        warnings,
    })
}

/// Circle averages of a grid CSV about `center`, one per distinct radius.
pub fn grid_profile(table: &emit::Table, center: [f64; 2]) -> (Vec<f64>, Vec<f64>) {
    let (x, y, u) = (table.column("x").unwrap(), table.column("y").unwrap(), table.column("u").unwrap());
    let mut pts: Vec<(f64, f64)> = x.iter().zip(&y).zip(&u).map(|((a, b), v)| ((a - center[0]).hypot(b - center[1]), *v)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut r, mut ubar) = (Vec::new(), Vec::new());
    let mut i = 0;
    while i < pts.len() {
        let r0 = pts[i].0;
        let mut j = i;
        let mut sum = 0.0;
        while j < pts.len() && pts[j].0 - r0 <= 1e-9 * r0.max(1.0) {
            sum += pts[j].1;
            j += 1;
        }
        r.push(r0);
        ubar.push(sum / (j - i) as f64);
        i = j;
    }
    (r, ubar)
}

fn fit_expansion(ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    let rf = &ctx.rf;
    rf.require("fit", "fit expansion")?;
    let input = rf.require_str("fit", "input")?;
    let table = emit::read_csv(&rf.resolve(input))?;
    let header = table.header.join(",");
    let (r, u) = if header == RADIAL_HEADER {
        (table.column("r").unwrap(), table.column("u").unwrap())
    } else if header == GRID_HEADER {
        let center = match rf.list("domain", "center")? {
            Some(c) if c.len() == 2 => [c[0], c[1]],
            _ => [0.0, 0.0],
        };
        grid_profile(&table, center)
    } else {
        return Err(rf.error_at("fit", "input", format!("unrecognized CSV header `{header}`")).into());
    };
    let rec = fit_profile(&r, &u, &config::fit_options(rf)?)?;
    emit::write_json(&report.wrote(ctx, "fit.json"), &rec)?;
    report.lines.push(format!(
        "{} fit on [{}, {}]: d = {:.10e}, c = {:.10e}, Kinf = {}, R2 = {:.6}",
        rec.regime,
        rec.window[0],
        rec.window[1],
        rec.d,
        rec.c,
        rec.kinf.map_or("-".into(), |k| format!("{k:.10e}")),
        rec.r2
    ));
    report.lines.extend(rec.warnings.iter().map(|w| format!("  warning: {w}")));
    report.result = emit::to_value(&rec);
    Ok(())
}

fn verify(ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    let results: Vec<_> = CRITERIA.par_iter().map(|&(id, _)| run_criterion(id, ctx.seed)).collect();
    let passed = results.iter().filter(|r| r.passed).count();
    report.lines.extend(results.iter().map(|r| r.to_string()));
    report.lines.push(format!("{passed}/{} criteria passed", results.len()));
    report.verdicts = results.iter().map(|r| json!({"id": r.id, "name": r.name, "passed": r.passed})).collect();
    emit::write_json(&report.wrote(ctx, "verify.json"), &json!({"seed": ctx.seed, "results": results}))?;
    report.result = json!({"passed": passed, "total": results.len()});
    if passed == results.len() {
        Ok(())
    } else {
        Err(CliError::Verify(format!("{} of {} criteria failed", results.len() - passed, results.len())))
    }
}

struct SweepEntry {
    value: String,
    dir: String,
    outputs: Vec<String>,
    partial: bool,
    /// Solve outcome, then the fit of its profile when there is one.
    status: Result<Option<Result<FitRecord, String>>, String>,
}

fn sweep(ctx: &Context, report: &mut Report) -> Result<(), CliError> {
    let rf = &ctx.rf;
    rf.require("sweep", "sweep")?;
    let cmd_name = rf.require_str("sweep", "command")?;
    let cmd = match Command::from_name(cmd_name) {
        Some(c @ (Command::RadialSolve | Command::DirichletSolve | Command::ExteriorSolve)) => c,
        _ => {
            return Err(rf
                .error_at("sweep", "command", "sweep command must be `radial solve`, `dirichlet solve` or `exterior solve`")
                .into())
        }
    };
    let key = rf.require_str("sweep", "key")?;
    let (section, field) = key
        .split_once('.')
        .filter(|(s, k)| *s != "sweep" && schema(s).contains(k))
        .ok_or_else(|| rf.error_at("sweep", "key", format!("`{key}` is not a `section.key` name")))?;
    let values: Vec<String> = rf
        .require_str("sweep", "values")?
        .split(',')
        .map(|v| v.trim().to_owned())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(rf.error_at("sweep", "values", "no sweep values").into());
    }
    let entries: Vec<SweepEntry> = values
        .par_iter()
        .enumerate()
        .map(|(i, value)| {
            let mut erf = rf.clone();
            erf.set(section, field, value.clone());
            let dir = format!("entry_{i:03}");
            let ectx = Context { rf: erf, out: ctx.out.join(&dir), seed: ctx.seed };
            let mut er = Report::default();
            let solved = match cmd {
                Command::RadialSolve => radial_solve(&ectx, &mut er),
                _ => grid_solve(&ectx, &mut er, cmd == Command::ExteriorSolve),
            };
            let status = solved.map_err(|e| e.to_string()).and_then(|profile| match profile {
                None => Ok(None),
                Some((r, u)) => {
                    let fit = config::fit_options(&ectx.rf).and_then(|opts| fit_profile(&r, &u, &opts));
                    Ok(Some(fit.map_err(|e| e.to_string())))
                }
            });
            SweepEntry {
                value: value.clone(),
                outputs: er.outputs.iter().map(|o| format!("{dir}/{o}")).collect(),
                dir,
                partial: er.partial,
                status,
            }
        })
        .collect();

    let opt = |v: Option<f64>| v.map_or("nan".to_owned(), emit::fmt_f64);
    let mut table = format!("index,{key},status,regime,d,c,alpha,Kinf,R2\n");
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        report.outputs.extend(e.outputs.iter().cloned());
        report.partial |= e.partial;
        let (status, fit, fit_error) = match &e.status {
            Ok(None) => ("ok", None, None),
            Ok(Some(Ok(fit))) => ("ok", Some(fit.clone()), None),
            Ok(Some(Err(msg))) => ("fit_failed", None, Some(msg.clone())),
            Err(msg) => {
                failures.push(format!("entry {i} ({key} = {}): {msg}", e.value));
                ("failed", None, None)
            }
        };
        match &fit {
            Some(f) => table.push_str(&format!(
                "{i},{},{status},{},{},{},{},{},{}\n",
                e.value,
                f.regime,
                emit::fmt_f64(f.d),
                emit::fmt_f64(f.c),
                opt(f.alpha),
                opt(f.kinf),
                emit::fmt_f64(f.r2)
            )),
            None => table.push_str(&format!("{i},{},{status},,nan,nan,nan,nan,nan\n", e.value)),
        }
        report.lines.push(format!(
            "{key} = {}: {}",
            e.value,
            match (&e.status, &fit, &fit_error) {
                (Err(m), ..) => format!("failed: {m}"),
                (Ok(_), Some(f), _) => format!("{} fit d = {:.6e}, c = {:.6e}", f.regime, f.d, f.c),
                (Ok(_), None, Some(m)) => format!("solved; fit failed: {m}"),
                (Ok(_), None, None) => "solved".to_owned(),
            }
        ));
        records.push(json!({
            "index": i,
            "value": e.value,
            "dir": e.dir,
            "status": status,
            "error": e.status.as_ref().err(),
            "fit": fit,
            "fit_error": fit_error,
        }));
    }
    emit::write_text(&report.wrote(ctx, "sweep_fit.csv"), &table)?;
    let summary = json!({"command": cmd.name(), "key": key, "entries": records});
    emit::write_json(&report.wrote(ctx, "sweep.json"), &summary)?;
    report.result = summary;
    if failures.is_empty() {
        Ok(())
    } else {
        report.partial = true;
        Err(CliError::Solver(failures.join("; ")))
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

/// One record per invocation, written as `summary.json`.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub command: String,
    pub config_hash: Option<String>,
    pub seed: u64,
    pub wall_time: f64,
    pub outputs: Vec<String>,
    pub verdicts: Vec<Value>,
    pub result: Value,
    pub partial: bool,
    pub exit_code: u8,
    pub error: Option<ErrorRecord>,
}

pub struct Invocation {
    pub summary: RunSummary,
    pub lines: Vec<String>,
    pub out: Option<PathBuf>,
}

/// Parses the run file (if any), runs `cmd` and assembles the summary.
/// `out` overrides `[output] dir`, which defaults to `out`.
pub fn execute(cmd: Command, run_file: Option<&Path>, out: Option<&Path>, seed: u64) -> Invocation {
    let start = Instant::now();
    let mut report = Report::default();
    let mut hash = None;
    let mut out_dir = out.map(Path::to_path_buf);
    let result = (|| {
        let rf = match run_file {
            Some(p) => RunFile::parse_file(p)?,
            None if cmd.needs_run_file() => {
                return Err(ParseError::global(format!("`{}` requires --run <path>", cmd.name())).into())
            }
            None => RunFile::default(),
        };
        hash = run_file.is_some().then(|| rf.config_hash());
        let dir = out_dir.clone().unwrap_or_else(|| rf.str("output", "dir").map_or(PathBuf::from("out"), |d| rf.resolve(d)));
        out_dir = Some(dir.clone());
        let ctx = Context { rf, out: dir, seed };
        run(cmd, &ctx, &mut report)
    })();
    let error = result.err().map(|e| ErrorRecord { code: e.code(), kind: e.kind(), message: e.to_string() });
    let summary = RunSummary {
        command: cmd.name().to_owned(),
        config_hash: hash,
        seed,
        wall_time: start.elapsed().as_secs_f64(),
        outputs: report.outputs,
        verdicts: report.verdicts,
        result: report.result,
        partial: report.partial,
        exit_code: error.as_ref().map_or(0, |e| e.code),
        error,
    };
    Invocation { summary, lines: report.lines, out: out_dir }
}

/// Writes `summary.json` into the output directory.
pub fn write_summary(inv: &Invocation) -> Result<Option<PathBuf>, CliError> {
    let Some(dir) = &inv.out else { return Ok(None) };
    let path = dir.join("summary.json");
    emit::write_json(&path, &inv.summary)?;
    Ok(Some(path))
}
