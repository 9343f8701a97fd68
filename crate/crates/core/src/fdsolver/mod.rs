//! Dirichlet problems for the jet operator on boundary-fitted grids.
//!
//! The discrete equation `t F(Du, D²u) + (1 - t) Δu = 0` is followed from
//! the Laplacian at `t = 0` to the full operator at `t = 1` with an adaptive
//! step, solving each stage by damped Newton on sparse LU factorizations.

mod continuation;
mod grid;

use std::sync::Arc;
use std::time::Instant;

use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::jetop::{curvatures, operator_derivs, operator_value, CurvatureData, DEFAULT_EPS};
use crate::relation::{RelationError, RelationSpec};

pub use continuation::{ContinuationSchedule, StallError, MAX_BISECTIONS};
pub use grid::{build_grid, DomainKind, DomainSpec, GeometryError, Grid, JetStencil};

#[derive(Debug, Error)]
pub enum FdError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error("continuation stalled at t={t} after {bisections} bisections")]
    ContinuationStall { t: f64, bisections: usize, partial: Box<GridSolution> },
    #[error("singular Jacobian at t={t}")]
    SingularJacobian { t: f64 },
}

/// Boundary heights as functions of the angle `θ` of the boundary node.
pub type BoundaryFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryData {
    Curve(BoundaryFn),
    Annulus { inner: BoundaryFn, outer: BoundaryFn },
}

impl std::fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Curve(_) => f.write_str("BoundaryData::Curve(..)"),
            Self::Annulus { .. } => f.write_str("BoundaryData::Annulus { .. }"),
        }
    }
}

impl BoundaryData {
    pub fn curve(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Curve(Arc::new(f))
    }

    pub fn annulus(
        inner: impl Fn(f64) -> f64 + Send + Sync + 'static,
        outer: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::Annulus { inner: Arc::new(inner), outer: Arc::new(outer) }
    }

    pub fn constant(c: f64) -> Self {
        Self::curve(move |_| c)
    }

    /// Nodal field holding the boundary values (zero elsewhere).
    pub fn nodal(&self, grid: &Grid) -> Result<Vec<f64>, FdError> {
        let mut u = vec![0.0; grid.len()];
        for n in grid.boundary_nodes() {
            let theta = grid.theta[grid.angle_index(n)];
            u[n] = match (self, grid.ring_of(n)) {
                (Self::Curve(f), _) if !grid.domain.is_annulus() => f(theta),
                (Self::Annulus { inner, .. }, 0) if grid.domain.is_annulus() => inner(theta),
                (Self::Annulus { outer, .. }, _) if grid.domain.is_annulus() => outer(theta),
                _ => {
                    return Err(FdError::InvalidInput(
                        "boundary data does not match the domain kind".into(),
                    ))
                }
            };
            if !u[n].is_finite() {
                return Err(FdError::InvalidInput(format!("non-finite boundary value at theta={theta}")));
            }
        }
        Ok(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Damping {
    /// Step reduction factor of the backtracking line search.
    pub factor: f64,
    /// Smallest step length tried before declaring the Newton stage failed.
    pub min_step: f64,
    /// Sufficient-decrease constant on the residual 2-norm.
    pub armijo: f64,
}

impl Default for Damping {
    fn default() -> Self {
        Self { factor: 0.5, min_step: 1.0 / 1024.0, armijo: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub n_s: usize,
    pub n_theta: usize,
    pub eps: f64,
    /// Initial continuation step is `1 / t_steps`.
    pub t_steps: usize,
    /// Max-norm residual target of each Newton stage.
    pub newton_tol: f64,
    pub newton_max: usize,
    pub damping: Damping,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_s: 32,
            n_theta: 64,
            eps: DEFAULT_EPS,
            t_steps: 4,
            newton_tol: 1e-10,
            newton_max: 25,
            damping: Damping::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_resolution(mut self, n_s: usize, n_theta: usize) -> Self {
        self.n_s = n_s;
        self.n_theta = n_theta;
        self
    }

    pub fn validate(&self) -> Result<(), FdError> {
        let bad = |m: String| Err(FdError::InvalidInput(m));
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.t_steps == 0 {
            return bad("t_steps must be at least 1".into());
        }
        if !(self.newton_tol > 0.0) || self.newton_max == 0 {
            return bad("newton_tol must be positive and newton_max at least 1".into());
        }
        let d = self.damping;
        if !(d.factor > 0.0 && d.factor < 1.0 && d.min_step > 0.0 && d.min_step <= 1.0 && d.armijo >= 0.0) {
            return bad(format!("invalid damping parameters {d:?}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub t: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct GridSolution {
    pub grid: Grid,
    pub u: Vec<f64>,
    /// Max-norm of the `t = 1` residual over interior nodes.
    pub residual_norm: f64,
    pub curvature_field: Vec<CurvatureData>,
    pub converged: bool,
    pub continuation_trace: Vec<TraceEntry>,
    /// Newton updates summed over the whole continuation, including the
    /// harmonic-extension solve.
    pub newton_iterations: usize,
    pub wall_time: f64,
    pub eps: f64,
}

impl GridSolution {
    pub fn domain(&self) -> &DomainSpec {
        &self.grid.domain
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.grid.nodes
    }

    /// `(min, max)` of the boundary values.
    pub fn boundary_range(&self) -> (f64, f64) {
        self.grid
            .boundary_nodes()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), n| (lo.min(self.u[n]), hi.max(self.u[n])))
    }

    /// One truncation unit `h_max² · osc(φ)`, with a floor at solver
    /// precision.
    pub fn delta_h(&self) -> f64 {
        let (lo, hi) = self.boundary_range();
        self.grid.h_max.powi(2) * (hi - lo) + 1e-9 * (1.0 + lo.abs().max(hi.abs()))
    }

    /// Residual of the full operator at every node (zero on the boundary).
    pub fn residual_field(&self, spec: &RelationSpec) -> Result<Vec<f64>, RelationError> {
        residual_field(spec, &self.grid, &self.u, self.eps)
    }
}

/// `F` at every interior node of `u`; boundary entries are zero.
pub fn residual_field(spec: &RelationSpec, grid: &Grid, u: &[f64], eps: f64) -> Result<Vec<f64>, RelationError> {
    let mut out = vec![0.0; grid.len()];
    for n in grid.interior_nodes() {
        out[n] = operator_value(spec, &grid.discrete_jet(u, n), eps)?;
    }
    Ok(out)
}

/// Solves the Dirichlet problem on an interior domain, or on an annulus
/// with [`BoundaryData::Annulus`].
pub fn solve_dirichlet(
    spec: &RelationSpec,
    domain: &DomainSpec,
    bc: &BoundaryData,
    config: &SolverConfig,
) -> Result<GridSolution, FdError> {
    let grid = build_grid(domain, config.n_s, config.n_theta)?;
    let boundary = bc.nodal(&grid)?;
    solve_on_grid(spec, grid, &boundary, config)
}

/// Truncated exterior problem on `Rin ≤ |x - c| ≤ Rout`.
pub fn solve_exterior(
    spec: &RelationSpec,
    annulus: &DomainSpec,
    inner: BoundaryFn,
    outer: BoundaryFn,
    config: &SolverConfig,
) -> Result<GridSolution, FdError> {
    if !annulus.is_annulus() {
        return Err(FdError::InvalidInput("exterior solves need an annulus domain".into()));
    }
    solve_dirichlet(spec, annulus, &BoundaryData::Annulus { inner, outer }, config)
}

/// Continuation solve on a prebuilt grid; `boundary` is a nodal field whose
/// boundary entries are the Dirichlet values.
pub fn solve_on_grid(
    spec: &RelationSpec,
    grid: Grid,
    boundary: &[f64],
    config: &SolverConfig,
) -> Result<GridSolution, FdError> {
    config.validate()?;
    if !spec.is_minimal_type() {
        return Err(FdError::InvalidInput("the Dirichlet solver needs a minimal-type relation".into()));
    }
    if boundary.len() != grid.len() {
        return Err(FdError::InvalidInput(format!(
            "boundary field has {} entries for {} nodes",
            boundary.len(),
            grid.len()
        )));
    }
    let start = Instant::now();
    let mut solver = Newton { spec, grid: &grid, config };
    let mut u = boundary.to_vec();
    for &n in grid.unknown_nodes() {
        u[n] = 0.0;
    }
    let mut trace = Vec::new();
    let mut total_iters = 0;

    // Harmonic extension: the t = 0 equation is linear.
    let stage = solver.stage(&mut u, 0.0, config.newton_max)?;
    total_iters += stage.iterations;
    trace.push(TraceEntry { t: 0.0, iterations: stage.iterations, converged: stage.converged });

    let mut schedule = ContinuationSchedule::new(config.t_steps);
    let mut stalled = None;
    if stage.converged {
        while let Some(t) = schedule.next_t() {
            let mut trial = u.clone();
            let stage = solver.stage(&mut trial, t, config.newton_max)?;
            total_iters += stage.iterations;
            trace.push(TraceEntry { t, iterations: stage.iterations, converged: stage.converged });
            if stage.converged {
                u = trial;
                schedule.accept(stage.iterations);
            } else if let Err(e) = schedule.reject() {
                stalled = Some(e);
                break;
            }
        }
    } else {
        stalled = Some(StallError { t: 0.0, bisections: 0 });
    }

    let converged = stalled.is_none();
    let residual = residual_field(spec, &grid, &u, config.eps)?;
    let residual_norm = grid.interior_nodes().map(|n| residual[n].abs()).fold(0.0, f64::max);
    let curvature_field = (0..grid.len()).map(|n| curvatures(&grid.discrete_jet(&u, n))).collect();
    let sol = GridSolution {
        grid,
        u,
        residual_norm,
        curvature_field,
        converged,
        continuation_trace: trace,
        newton_iterations: total_iters,
        wall_time: start.elapsed().as_secs_f64(),
        eps: config.eps,
    };
    match stalled {
        None => Ok(sol),
        Some(StallError { t, bisections }) => Err(FdError::ContinuationStall { t, bisections, partial: Box::new(sol) }),
    }
}

struct StageResult {
    iterations: usize,
    converged: bool,
}

struct Newton<'a> {
    spec: &'a RelationSpec,
    grid: &'a Grid,
    config: &'a SolverConfig,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Newton<'_> {
    /// Homotopy residual at the unknowns, or `None` if `F` is undefined.
    fn residual(&self, u: &[f64], t: f64) -> Option<Vec<f64>> {
        let mut r = Vec::with_capacity(self.grid.n_unknowns());
        for &n in self.grid.unknown_nodes() {
            let jet = self.grid.discrete_jet(u, n);
            let lap = jet.m.trace();
            let f = if t > 0.0 { operator_value(self.spec, &jet, self.config.eps).ok()? } else { 0.0 };
            let v = t * f + (1.0 - t) * lap;
            if !v.is_finite() {
                return None;
            }
            r.push(v);
        }
        Some(r)
    }

    fn jacobian(&self, u: &[f64], t: f64) -> Result<SparseColMat<usize, f64>, RelationError> {
        let g = self.grid;
        let mut trip = Vec::with_capacity(g.n_unknowns() * 9);
        for (row, &n) in g.unknown_nodes().iter().enumerate() {
            let jet = g.discrete_jet(u, n);
            let mut grad = [0.0, 0.0, 1.0 - t, 0.0, 1.0 - t];
            if t > 0.0 {
                let ev = operator_derivs(self.spec, &jet, self.config.eps)?.gradient();
                for a in 0..5 {
                    grad[a] += t * ev[a];
                }
            }
            for (nb, w) in g.stencil(n) {
                if let Some(col) = g.unknown_of(*nb) {
                    let v: f64 = (0..5).map(|a| grad[a] * w[a]).sum();
                    trip.push(Triplet::new(row, col, v));
                }
            }
        }
        let n = g.n_unknowns();
        Ok(SparseColMat::try_new_from_triplets(n, n, &trip).expect("triplet indices are in range"))
    }

    /// Damped Newton at fixed `t`, updating `u` in place.
    fn stage(&mut self, u: &mut [f64], t: f64, max_iter: usize) -> Result<StageResult, FdError> {
        let g = self.grid;
        let d = self.config.damping;
        let Some(mut r) = self.residual(u, t) else {
            return Ok(StageResult { iterations: 0, converged: false });
        };
        let mut iterations = 0;
        while max_norm(&r) > self.config.newton_tol {
            if iterations >= max_iter {
                return Ok(StageResult { iterations, converged: false });
            }
            let jac = match self.jacobian(u, t) {
                Ok(j) => j,
                Err(_) => return Ok(StageResult { iterations, converged: false }),
            };
            let lu = jac.sp_lu().map_err(|_| FdError::SingularJacobian { t })?;
            let rhs = Col::<f64>::from_fn(r.len(), |i| -r[i]);
            let delta = lu.solve(&rhs);
            if (0..delta.nrows()).any(|i| !delta[i].is_finite()) {
                return Err(FdError::SingularJacobian { t });
            }
            iterations += 1;
            let norm0 = two_norm(&r);
            let mut step = 1.0;
            let accepted = loop {
                let mut trial = u.to_vec();
                for (i, &n) in g.unknown_nodes().iter().enumerate() {
                    trial[n] += step * delta[i];
                }
                if let Some(rt) = self.residual(&trial, t) {
                    if two_norm(&rt) <= (1.0 - d.armijo * step) * norm0 || max_norm(&rt) <= self.config.newton_tol {
                        u.copy_from_slice(&trial);
                        r = rt;
                        break true;
                    }
                }
                step *= d.factor;
                if step < d.min_step {
                    break false;
                }
            };
            if !accepted {
                return Ok(StageResult { iterations, converged: false });
            }
        }
        Ok(StageResult { iterations, converged: true })
    }
}
