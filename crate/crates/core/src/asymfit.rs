//! Asymptotic structure of computed ends: log expansions, power-law
//! constants, regime selection, sign and comparison checks, and the
//! curvature-estimate diagnostic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use faer::prelude::*;
use faer::Mat;
use serde::Serialize;
use thiserror::Error;

use crate::fdsolver::GridSolution;
use crate::radial::{asymptotic_constant, RadialSolution};
use crate::relation::Regime;

/// Largest reported remainder rate; faster decay is certified as this.
pub const ALPHA_CAP: f64 = 1.0 - 1e-3;
/// Threshold on regression R² used by the model selection.
pub const R2_THRESHOLD: f64 = 0.9;
/// Log-log slope of `dū/d log r` separating the three growth classes.
pub const GROWTH_SLOPE_TOL: f64 = 0.1;
/// Relative decade-to-decade drift below which a power fit counts as converged.
pub const POWER_DRIFT_TOL: f64 = 1e-2;

/// Relative solver-precision tolerance for the bracket and agreement tests.
pub const COMPARISON_TOL_REL: f64 = 1e-8;

const BETA_RANGE: (f64, f64) = (0.05, 4.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymfitError {
    #[error("window: {0}")]
    Window(String),
    #[error("solutions are not ordered: u - utilde = {value:e} at node {node} (tolerance {tol:e})")]
    Ordering { node: usize, value: f64, tol: f64 },
    #[error("solutions live on different grids")]
    GridMismatch,
    #[error("Gauss map leaves the upper hemisphere margin at node {node} (|Du| = {slope})")]
    Hemisphere { node: usize, slope: f64 },
    #[error("{0}")]
    Radial(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticFit {
    pub regime: Regime,
    /// Coefficient of `log r` (zero for power fits).
    pub d: f64,
    pub c: f64,
    /// Certified remainder rate in `(0, 1)`.
    pub alpha: Option<f64>,
    /// Raw fitted decay exponent of the remainder.
    pub remainder_exponent: Option<f64>,
    /// R² of the remainder log-log regression.
    pub alpha_r2: Option<f64>,
    /// Exponent of the auxiliary `r^{-β}` column, when used.
    pub beta: Option<f64>,
    pub kinf: Option<f64>,
    pub exponent: Option<f64>,
    /// Relative change of `kinf` between the last two decades.
    pub drift: Option<f64>,
    pub converged: Option<bool>,
    /// R² of the fitted model on the samples.
    pub model_r2: f64,
    /// Uncertainty scale of `d`: largest residual over the log-width of the window.
    pub delta_fit: f64,
    /// `(r, |residual|)` over the window.
    pub residual_profile: Vec<(f64, f64)>,
    pub window: (f64, f64),
    pub warnings: Vec<String>,
}

fn lstsq(cols: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let a = Mat::<f64>::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let b = Mat::<f64>::from_fn(n, 1, |i, _| y[i]);
    let x = a.qr().solve_lstsq(&b);
    let coef: Vec<f64> = (0..cols.len()).map(|j| x[(j, 0)]).collect();
    let res = (0..n)
        .map(|i| y[i] - cols.iter().zip(&coef).map(|(c, k)| c[i] * k).sum::<f64>())
        .collect();
    (coef, res)
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn r_squared(y: &[f64], res: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if tot == 0.0 {
        if sum_sq(res) == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - sum_sq(res) / tot
    }
}

/// Slope, intercept and R² of the ordinary regression of `y` on `x`.
fn regression(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    if x.len() < 3 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, my - slope * mx, r2))
}

/// Samples inside `window` (default: the whole range), validated.
fn windowed(r: &[f64], u: &[f64], window: Option<(f64, f64)>) -> Result<(Vec<f64>, Vec<f64>, (f64, f64)), AsymfitError> {
    if r.len() != u.len() {
        return Err(AsymfitError::Window(format!("{} radii but {} values", r.len(), u.len())));
    }
    let (lo, hi) = window.unwrap_or((
        r.iter().copied().fold(f64::INFINITY, f64::min),
        r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ));
    let (mut rs, mut us) = (Vec::new(), Vec::new());
    for (&a, &b) in r.iter().zip(u) {
        if a >= lo && a <= hi && a > 0.0 && b.is_finite() {
            rs.push(a);
            us.push(b);
        }
    }
    if rs.len() < 8 {
        return Err(AsymfitError::Window(format!("need at least 8 radii in the window, got {}", rs.len())));
    }
    let (r1, r2) = (rs.iter().copied().fold(f64::INFINITY, f64::min), rs.iter().copied().fold(0.0, f64::max));
    if r2 < 10.0 * r1 * (1.0 - 1e-12) {
        return Err(AsymfitError::Window(format!("window [{r1}, {r2}] spans less than a decade")));
    }
    Ok((rs, us, (r1, r2)))
}

/// Fits `ū ≈ d log r + c` with the remainder `|ū - d log r - c|` modelled as
/// a power of `r`. Unless the two-term fit is already exact, an auxiliary
/// `r^{-β}` column is fitted jointly (variable projection over `β`) so that
/// a slowly decaying remainder does not bias `(d, c)`.
pub fn fit_log_expansion(r: &[f64], ubar: &[f64], window: Option<(f64, f64)>) -> Result<AsymptoticFit, AsymfitError> {
    let (rs, us, win) = windowed(r, ubar, window)?;
    let r1 = win.0;
    let logr: Vec<f64> = rs.iter().map(|v| (v / r1).ln()).collect();
    let ones = vec![1.0; rs.len()];
    let scale = 1.0 + us.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (coef2, res2) = lstsq(&[logr.clone(), ones.clone()], &us);
    let exact = res2.iter().all(|e| e.abs() <= 1e-12 * scale);
    let mut warnings = Vec::new();

    let (d, c_shifted, beta) = if exact {
        (coef2[0], coef2[1], None)
    } else {
        let cost = |beta: f64| {
            let col: Vec<f64> = rs.iter().map(|v| (v / r1).powf(-beta)).collect();
            sum_sq(&lstsq(&[logr.clone(), ones.clone(), col], &us).1)
        };
        let n_scan = 60;
        let (lo, hi) = (BETA_RANGE.0.ln(), BETA_RANGE.1.ln());
        let grid: Vec<f64> = (0..n_scan).map(|i| (lo + (hi - lo) * i as f64 / (n_scan - 1) as f64).exp()).collect();
        let costs: Vec<f64> = grid.iter().map(|&b| cost(b)).collect();
        let best = (0..n_scan).min_by(|&a, &b| costs[a].total_cmp(&costs[b])).unwrap_or(0);
        let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n_scan - 1)]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut x1, mut x2) = (b - phi * (b - a), a + phi * (b - a));
        let (mut f1, mut f2) = (cost(x1), cost(x2));
        for _ in 0..80 {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = cost(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = cost(x2);
            }
        }
        let beta = 0.5 * (a + b);
        let col: Vec<f64> = rs.iter().map(|v| (v / r1).powf(-beta)).collect();
        let (coef3, res3) = lstsq(&[logr.clone(), ones.clone(), col], &us);
        if sum_sq(&res3) < sum_sq(&res2) {
            (coef3[0], coef3[1], Some(beta))
        } else {
            (coef2[0], coef2[1], None)
        }
    };
    let c = c_shifted - d * r1.ln();
    let remainder: Vec<f64> = rs.iter().zip(&us).map(|(&x, &y)| y - d * x.ln() - c).collect();
    let model_r2 = r_squared(&us, &remainder);

    let floor = 1e3 * f64::EPSILON * scale;
    let (lx, ly): (Vec<f64>, Vec<f64>) = rs
        .iter()
        .zip(&remainder)
        .filter(|(_, e)| e.abs() > floor)
        .map(|(x, e)| (x.ln(), e.abs().ln()))
        .unzip();
    let (mut alpha, mut raw, mut alpha_r2) = (None, None, None);
    if lx.len() >= 4 {
        if let Some((slope, _, r2)) = regression(&lx, &ly) {
            raw = Some(-slope);
            alpha_r2 = Some(r2);
            if -slope > 0.0 {
                alpha = Some((-slope).min(ALPHA_CAP));
            } else {
                warnings.push(format!("remainder does not decay (log-log slope {slope:.3})"));
            }
            if r2 < R2_THRESHOLD {
                warnings.push(format!("remainder not power-like (R2 = {r2:.3})"));
            }
        }
    } else {
        warnings.push("remainder below the noise floor; rate undetermined".into());
    }
    let delta_fit = remainder.iter().fold(0.0f64, |m, e| m.max(e.abs())) / (win.1 / win.0).ln();
    if d < -delta_fit {
        warnings.push(format!("negative log coefficient d = {d:e}"));
    }
    Ok(AsymptoticFit {
        regime: Regime::Log,
        d,
        c,
        alpha,
        remainder_exponent: raw,
        alpha_r2,
        beta,
        kinf: None,
        exponent: None,
        drift: None,
        converged: None,
        model_r2,
        delta_fit,
        residual_profile: rs.iter().zip(&remainder).map(|(&x, e)| (x, e.abs())).collect(),
        window: win,
        warnings,
    })
}

/// `K` and `c` of `ū ≈ K r^β + c` on `[lo, hi]`, or `None` if too few points.
#[allow(clippy::type_complexity)]
fn power_lsq(rs: &[f64], us: &[f64], beta: f64, lo: f64, hi: f64) -> Option<(f64, f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (r, u): (Vec<f64>, Vec<f64>) = rs
        .iter()
        .zip(us)
        .filter(|(&x, _)| x >= lo * (1.0 - 1e-12) && x <= hi * (1.0 + 1e-12))
        .map(|(a, b)| (*a, *b))
        .unzip();
    if r.len() < 4 {
        return None;
    }
    let col: Vec<f64> = r.iter().map(|x| (x / hi).powf(beta)).collect();
    let (coef, res) = lstsq(&[col, vec![1.0; r.len()]], &u);
    Some((coef[0] / hi.powf(beta), coef[1], r, u, res))
}

/// `K_∞ = lim ū / r^β` from a least-squares fit of `ū ≈ K r^β + c` over
/// the last decade of the window; the drift compares with the decade before.
pub fn fit_power(r: &[f64], ubar: &[f64], exponent: f64, window: Option<(f64, f64)>) -> Result<AsymptoticFit, AsymfitError> {
    if !(exponent > 0.0 && exponent < 1.0) {
        return Err(AsymfitError::Window(format!("power exponent must lie in (0, 1), got {exponent}")));
    }
    let (rs, us, win) = windowed(r, ubar, window)?;
    let hi = win.1;
    let (kinf, c, r_last, u_last, res) = power_lsq(&rs, &us, exponent, hi / 10.0, hi)
        .ok_or_else(|| AsymfitError::Window("fewer than 4 radii in the last decade".into()))?;
    let drift = (win.0 <= hi / 100.0 * (1.0 + 1e-12))
        .then(|| power_lsq(&rs, &us, exponent, hi / 100.0, hi / 10.0))
        .flatten()
        .map(|(k_prev, ..)| ((kinf - k_prev) / kinf).abs());
    let mut warnings = Vec::new();
    let converged = drift.map(|d| d <= POWER_DRIFT_TOL);
    if converged == Some(false) {
        warnings.push(format!("power constant not converged (drift {:.3e})", drift.unwrap_or(f64::NAN)));
    }
    let delta_fit = res.iter().fold(0.0f64, |m, e| m.max(e.abs())) / 10f64.ln();
    Ok(AsymptoticFit {
        regime: Regime::Power,
        d: 0.0,
        c,
        alpha: None,
        remainder_exponent: None,
        alpha_r2: None,
        beta: None,
        kinf: Some(kinf),
        exponent: Some(exponent),
        drift,
        converged,
        model_r2: r_squared(&u_last, &res),
        delta_fit,
        residual_profile: r_last.iter().zip(&res).map(|(&x, e)| (x, e.abs())).collect(),
        window: win,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthVerdict {
    pub regime: Regime,
    /// Log-log slope of `m = dū/d log r`.
    pub slope: f64,
    pub slope_r2: f64,
    /// R² of the two-term log model on `ū`.
    pub log_model_r2: f64,
    /// Whether the thresholds were met; `false` means the verdict is a
    /// best guess.
    pub decisive: bool,
}

/// Classifies `ū` as power-like (`m` growing), logarithmic (`m` flat) or
/// bounded (`m` decaying) from the log-log slope of `m = dū/d log r`.
pub fn classify_growth(r: &[f64], ubar: &[f64], window: Option<(f64, f64)>) -> Result<GrowthVerdict, AsymfitError> {
    let (rs, us, _) = windowed(r, ubar, window)?;
    let lr: Vec<f64> = rs.iter().map(|v| v.ln()).collect();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for i in 1..rs.len() - 1 {
        let m = (us[i + 1] - us[i - 1]) / (lr[i + 1] - lr[i - 1]);
        if m > 0.0 {
            x.push(lr[i]);
            y.push(m.ln());
        }
    }
    let (_, res_log) = lstsq(&[lr.clone(), vec![1.0; rs.len()]], &us);
    let log_model_r2 = r_squared(&us, &res_log);
    let Some((slope, _, slope_r2)) = (x.len() * 2 >= rs.len()).then(|| regression(&x, &y)).flatten() else {
        return Ok(GrowthVerdict { regime: Regime::Bounded, slope: f64::NEG_INFINITY, slope_r2: 0.0, log_model_r2, decisive: false });
    };
    let (regime, decisive) = if slope > GROWTH_SLOPE_TOL {
        (Regime::Power, slope_r2 >= R2_THRESHOLD)
    } else if slope < -GROWTH_SLOPE_TOL {
        (Regime::Bounded, slope_r2 >= R2_THRESHOLD)
    } else {
        (Regime::Log, log_model_r2 >= R2_THRESHOLD)
    };
    Ok(GrowthVerdict { regime, slope, slope_r2, log_model_r2, decisive })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignReport {
    pub plane_height: f64,
    pub sign: Sign,
    /// Node (or radial index) with the smallest sign margin, or a node of
    /// the minority sign when mixed.
    pub witness: usize,
    pub witness_value: f64,
}

pub enum SignTarget<'a> {
    /// Plane height chosen by regime: the limit for bounded ends, 0 otherwise.
    Radial(&'a RadialSolution),
    /// Grid solution with an explicit plane height; the inner circle of an
    /// annulus is excluded.
    Grid(&'a GridSolution, f64),
    Field(&'a [f64], f64),
}

fn classify_sign(values: impl Iterator<Item = (usize, f64)>, plane_height: f64) -> SignReport {
    let (mut min, mut max) = ((0usize, f64::INFINITY), (0usize, f64::NEG_INFINITY));
    for (i, v) in values {
        let w = v - plane_height;
        if w < min.1 {
            min = (i, w);
        }
        if w > max.1 {
            max = (i, w);
        }
    }
    let (sign, witness) = if min.1 > 0.0 {
        (Sign::Positive, min)
    } else if max.1 < 0.0 {
        (Sign::Negative, max)
    } else if max.1 > 0.0 && min.1 < 0.0 {
        (Sign::Mixed, if max.1 >= -min.1 { min } else { max })
    } else {
        (Sign::Mixed, if min.1 == 0.0 { min } else { max })
    };
    SignReport { plane_height, sign, witness: witness.0, witness_value: witness.1 }
}

/// Sign of `u - plane_height` away from the inner boundary.
pub fn check_constant_sign(target: SignTarget<'_>) -> Result<SignReport, AsymfitError> {
    Ok(match target {
        SignTarget::Radial(sol) => {
            let h = match sol.regime {
                Regime::Bounded => {
                    let a = asymptotic_constant(sol).map_err(|e| AsymfitError::Radial(e.to_string()))?;
                    a.kinf + a.tail_estimate
                }
                _ => 0.0,
            };
            classify_sign(sol.u.iter().copied().enumerate().skip(1), h)
        }
        SignTarget::Grid(sol, h) => {
            let skip_inner = sol.grid.domain.is_annulus();
            classify_sign(
                sol.u.iter().copied().enumerate().filter(|(n, _)| !(skip_inner && sol.grid.ring_of(*n) == 0)),
                h,
            )
        }
        SignTarget::Field(v, h) => classify_sign(v.iter().copied().enumerate(), h),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub radii: Vec<f64>,
    pub circle_mins: Vec<f64>,
    pub circle_maxs: Vec<f64>,
    /// Circle average of `u - ũ` on the outermost circle.
    pub c0_estimate: f64,
    /// First circle index at which the bracket is checked.
    pub first_checked: usize,
    pub bracketing_ok: bool,
    /// `|u - ũ| ≤ tolerance` everywhere: the two graphs agree.
    pub agreement: bool,
    /// Slope of the circle-averaged difference against `log r` over the
    /// outer half (nonzero when the difference diverges logarithmically).
    pub log_slope: Option<f64>,
    /// Tolerance of the bracket and agreement tests (solver precision).
    pub tolerance: f64,
    /// Tolerance of the ordering precondition `u ≥ ũ` (one truncation unit).
    pub ordering_tolerance: f64,
}

fn compare_circles(radii: Vec<f64>, mins: Vec<f64>, maxs: Vec<f64>, means: &[f64], tol: f64, ordering_tol: f64) -> ComparisonReport {
    let n = radii.len();
    let c0 = *means.last().expect("at least one circle");
    let first = n / 4;
    let bracketing_ok = (first..n).all(|j| mins[j] - tol <= c0 && c0 <= maxs[j] + tol);
    let agreement = mins.iter().chain(&maxs).all(|v| v.abs() <= tol);
    let half = n / 2;
    let log_slope = (n - half >= 3)
        .then(|| {
            let x: Vec<f64> = radii[half..].iter().map(|r| r.ln()).collect();
            regression(&x, &means[half..]).map(|s| s.0)
        })
        .flatten();
    ComparisonReport {
        radii,
        circle_mins: mins,
        circle_maxs: maxs,
        c0_estimate: if agreement { 0.0 } else { c0 },
        first_checked: first,
        bracketing_ok,
        agreement,
        log_slope,
        tolerance: tol,
        ordering_tolerance: ordering_tol,
    }
}

/// Per-circle bracket of `u - ũ` for two solutions on the same grid, with
/// `u ≥ ũ` required up to one truncation unit. Both discrete solutions carry
/// the same scheme, so the bracket itself is tested at solver precision.
pub fn comparison_at_infinity(u: &GridSolution, utilde: &GridSolution) -> Result<ComparisonReport, AsymfitError> {
    let g = &u.grid;
    if g.nodes != utilde.grid.nodes {
        return Err(AsymfitError::GridMismatch);
    }
    let ordering_tol = u.delta_h().max(utilde.delta_h());
    let scale = u.u.iter().chain(&utilde.u).fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = COMPARISON_TOL_REL * scale;
    let diff: Vec<f64> = u.u.iter().zip(&utilde.u).map(|(a, b)| a - b).collect();
    if let Some((node, &value)) = diff.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
        if value < -ordering_tol {
            return Err(AsymfitError::Ordering { node, value, tol: ordering_tol });
        }
    }
    let mut mins = Vec::with_capacity(g.n_rings);
    let mut maxs = Vec::with_capacity(g.n_rings);
    for j in 0..g.n_rings {
        let ring = (0..g.n_theta).map(|k| diff[g.node(j, k)]);
        mins.push(ring.clone().fold(f64::INFINITY, f64::min));
        maxs.push(ring.fold(f64::NEG_INFINITY, f64::max));
    }
    let means = g.ring_means(&diff);
    let radii = (0..g.n_rings).map(|j| g.ring_radius(j)).collect();
    Ok(compare_circles(radii, mins, maxs, &means, tol, ordering_tol))
}

/// Radial counterpart of [`comparison_at_infinity`]; both ends must share
/// their output grid.
pub fn comparison_at_infinity_radial(u: &RadialSolution, utilde: &RadialSolution, tol: f64) -> Result<ComparisonReport, AsymfitError> {
    if u.r != utilde.r {
        return Err(AsymfitError::GridMismatch);
    }
    let diff: Vec<f64> = u.u.iter().zip(&utilde.u).map(|(a, b)| a - b).collect();
    if let Some((node, &value)) = diff.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
        if value < -tol {
            return Err(AsymfitError::Ordering { node, value, tol });
        }
    }
    Ok(compare_circles(u.r.clone(), diff.clone(), diff.clone(), &diff, tol, tol))
}

/// Upper-hemisphere margin: the Gauss map must stay within this angle of
/// the vertical.
pub const HEMISPHERE_MARGIN_DEG: f64 = 89.0;

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Graph-metric distance from every node to the boundary nodes, by
/// Dijkstra on the grid graph with edge lengths `√(|dx|² + du²)`.
pub fn boundary_distance(sol: &GridSolution) -> Vec<f64> {
    let g = &sol.grid;
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut heap = BinaryHeap::new();
    for n in g.boundary_nodes() {
        dist[n] = 0.0;
        heap.push(HeapItem(0.0, n));
    }
    while let Some(HeapItem(d, n)) = heap.pop() {
        if d > dist[n] {
            continue;
        }
        let [x, y] = g.nodes[n];
        for m in g.neighbours(n) {
            let [xm, ym] = g.nodes[m];
            let du = sol.u[m] - sol.u[n];
            let w = ((xm - x).powi(2) + (ym - y).powi(2) + du * du).sqrt();
            if d + w < dist[m] {
                dist[m] = d + w;
                heap.push(HeapItem(d + w, m));
            }
        }
    }
    dist
}

/// `sup |σ| · d(p, ∂Σ)` over interior nodes.
pub fn curvature_estimate_diag(sol: &GridSolution) -> Result<f64, AsymfitError> {
    let g = &sol.grid;
    let max_slope = HEMISPHERE_MARGIN_DEG.to_radians().tan();
    for n in g.interior_nodes() {
        let p = g.discrete_jet(&sol.u, n).p;
        let slope = p[0].hypot(p[1]);
        if !(slope < max_slope) {
            return Err(AsymfitError::Hemisphere { node: n, slope });
        }
    }
    let dist = boundary_distance(sol);
    Ok(g.interior_nodes().map(|n| sol.curvature_field[n].sigma_norm * dist[n]).fold(0.0, f64::max))
}

/// `(r, ū)` circle averages of a grid solution, one per ring.
pub fn circle_averages(sol: &GridSolution) -> (Vec<f64>, Vec<f64>) {
    let g = &sol.grid;
    ((0..g.n_rings).map(|j| g.ring_radius(j)).collect(), g.ring_means(&sol.u))
}
