//! Domains and boundary-fitted polar grids with precomputed jet stencils.

use std::f64::consts::TAU;

use serde::Serialize;
use thiserror::Error;

use crate::jetop::{GraphJet, Sym2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid domain parameter: {0}")]
    InvalidParameter(String),
    #[error("boundary is not strictly convex: min curvature {min_curvature:e} at theta={theta}")]
    NotConvex { min_curvature: f64, theta: f64 },
    #[error("invalid grid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Disk { r: f64 },
    Ellipse { a: f64, b: f64 },
    Annulus { r_in: f64, r_out: f64 },
    /// Boundary radius `ρ(θ)` sampled at `θ_m = 2πm/M`.
    StarConvex { samples: Vec<f64> },
}

/// Real trigonometric interpolant of periodic samples.
#[derive(Debug, Clone, PartialEq)]
struct Fourier {
    a0: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Fourier {
    fn new(samples: &[f64]) -> Self {
        let m = samples.len();
        let a0 = samples.iter().sum::<f64>() / m as f64;
        let kmax = m / 2;
        let mut cos = Vec::with_capacity(kmax);
        let mut sin = Vec::with_capacity(kmax);
        for k in 1..=kmax {
            let (mut ca, mut sa) = (0.0, 0.0);
            for (i, &v) in samples.iter().enumerate() {
                let ang = TAU * (k * i) as f64 / m as f64;
                ca += v * ang.cos();
                sa += v * ang.sin();
            }
            // The Nyquist mode is shared between +k and -k.
            let w = if 2 * k == m { 1.0 } else { 2.0 };
            cos.push(w * ca / m as f64);
            sin.push(if 2 * k == m { 0.0 } else { w * sa / m as f64 });
        }
        Self { a0, cos, sin }
    }

    /// `(ρ, ρ', ρ'')` at `θ`.
    fn eval(&self, theta: f64) -> (f64, f64, f64) {
        let (mut f, mut d1, mut d2) = (self.a0, 0.0, 0.0);
        for (i, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let k = (i + 1) as f64;
            let (s, c) = (k * theta).sin_cos();
            f += a * c + b * s;
            d1 += k * (b * c - a * s);
            d2 -= k * k * (a * c + b * s);
        }
        (f, d1, d2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub center: [f64; 2],
    /// `(min, max)` boundary curvature. For annuli the inner circle counts
    /// with negative sign (it is concave as seen from the domain).
    pub boundary_curvature: (f64, f64),
    #[serde(skip)]
    fourier: Option<Fourier>,
}

fn polar_curvature(r: f64, d1: f64, d2: f64) -> f64 {
    (r * r + 2.0 * d1 * d1 - r * d2) / (r * r + d1 * d1).powf(1.5)
}

fn positive(name: &str, v: f64) -> Result<(), GeometryError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

impl DomainSpec {
    pub fn disk(r: f64) -> Result<Self, GeometryError> {
        positive("R", r)?;
        Ok(Self { kind: DomainKind::Disk { r }, center: [0.0; 2], boundary_curvature: (1.0 / r, 1.0 / r), fourier: None })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self, GeometryError> {
        positive("a", a)?;
        positive("b", b)?;
        let (big, small) = if a >= b { (a, b) } else { (b, a) };
        Ok(Self {
            kind: DomainKind::Ellipse { a, b },
            center: [0.0; 2],
            boundary_curvature: (small / (big * big), big / (small * small)),
            fourier: None,
        })
    }

    pub fn annulus(r_in: f64, r_out: f64) -> Result<Self, GeometryError> {
        positive("Rin", r_in)?;
        positive("Rout", r_out)?;
        if r_in >= r_out {
            return Err(GeometryError::InvalidParameter(format!("Rin={r_in} must be below Rout={r_out}")));
        }
        Ok(Self {
            kind: DomainKind::Annulus { r_in, r_out },
            center: [0.0; 2],
            boundary_curvature: (-1.0 / r_in, 1.0 / r_out),
            fourier: None,
        })
    }

    /// Star-shaped domain with boundary `ρ(θ)` given by equispaced samples,
    /// interpolated trigonometrically; rejected unless strictly convex.
    pub fn star_convex(samples: Vec<f64>) -> Result<Self, GeometryError> {
        if samples.len() < 8 {
            return Err(GeometryError::InvalidParameter(format!(
                "need at least 8 boundary samples, got {}",
                samples.len()
            )));
        }
        for &v in &samples {
            positive("rho sample", v)?;
        }
        let fourier = Fourier::new(&samples);
        let n_check = (16 * samples.len()).max(1024);
        let (mut lo, mut hi, mut at) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for i in 0..n_check {
            let theta = TAU * i as f64 / n_check as f64;
            let (r, d1, d2) = fourier.eval(theta);
            if r <= 0.0 {
                return Err(GeometryError::InvalidParameter(format!("interpolated rho({theta}) <= 0")));
            }
            let k = polar_curvature(r, d1, d2);
            if k < lo {
                lo = k;
                at = theta;
            }
            hi = hi.max(k);
        }
        if lo <= 0.0 {
            return Err(GeometryError::NotConvex { min_curvature: lo, theta: at });
        }
        Ok(Self {
            kind: DomainKind::StarConvex { samples },
            center: [0.0; 2],
            boundary_curvature: (lo, hi),
            fourier: Some(fourier),
        })
    }

    pub fn with_center(mut self, center: [f64; 2]) -> Self {
        self.center = center;
        self
    }

    pub fn is_annulus(&self) -> bool {
        matches!(self.kind, DomainKind::Annulus { .. })
    }

    /// Boundary radius in direction `θ`, for the interior kinds.
    pub fn rho(&self, theta: f64) -> Option<f64> {
        match &self.kind {
            DomainKind::Disk { r } => Some(*r),
            DomainKind::Ellipse { a, b } => {
                let (s, c) = theta.sin_cos();
                Some(a * b / (b * b * c * c + a * a * s * s).sqrt())
            }
            DomainKind::StarConvex { .. } => self.fourier.as_ref().map(|f| f.eval(theta).0),
            DomainKind::Annulus { .. } => None,
        }
    }
}

/// Per-node linear map from nodal heights to the jet `(p1, p2, M11, M12, M22)`.
pub type JetStencil = Vec<(usize, [f64; 5])>;

#[derive(Debug, Clone)]
pub struct Grid {
    pub domain: DomainSpec,
    pub n_s: usize,
    pub n_theta: usize,
    pub n_rings: usize,
    /// Spacing of the radial parameter (`s` for interior kinds, `r` for annuli).
    pub h_s: f64,
    /// Radial parameter of each ring.
    pub ring_s: Vec<f64>,
    pub theta: Vec<f64>,
    pub nodes: Vec<[f64; 2]>,
    pub boundary: Vec<bool>,
    /// Largest physical distance between adjacent nodes.
    pub h_max: f64,
    unknown_of: Vec<Option<usize>>,
    unknown_nodes: Vec<usize>,
    stencils: Vec<JetStencil>,
}

fn validate_resolution(n_s: usize, n_theta: usize) -> Result<(), GeometryError> {
    if n_s < 8 {
        return Err(GeometryError::InvalidConfig(format!("n_s must be >= 8, got {n_s}")));
    }
    if n_theta < 16 || n_theta % 2 != 0 {
        return Err(GeometryError::InvalidConfig(format!("n_theta must be even and >= 16, got {n_theta}")));
    }
    Ok(())
}

/// Boundary-fitted grid. Interior kinds use `x = c + s ρ(θ) e(θ)` with
/// `n_s` staggered interior rings `s_j = (j + ½) h` and the boundary at
/// `s = 1`; the innermost ring couples to its antipodal nodes instead of a
/// pole node. Annuli use `n_s` radial intervals between the two circles.
pub fn build_grid(domain: &DomainSpec, n_s: usize, n_theta: usize) -> Result<Grid, GeometryError> {
    validate_resolution(n_s, n_theta)?;
    let n_rings = n_s + 1;
    let k = TAU / n_theta as f64;
    let theta: Vec<f64> = (0..n_theta).map(|i| i as f64 * k).collect();
    let [cx, cy] = domain.center;
    let annulus = domain.is_annulus();
    let (h_s, ring_s) = match domain.kind {
        DomainKind::Annulus { r_in, r_out } => {
            let h = (r_out - r_in) / n_s as f64;
            let rings: Vec<f64> = (0..n_rings).map(|j| r_in + j as f64 * h).collect();
            (h, rings)
        }
        _ => {
            let h = 1.0 / (n_s as f64 + 0.5);
            let mut rings: Vec<f64> = (0..n_s).map(|j| (j as f64 + 0.5) * h).collect();
            rings.push(1.0);
            (h, rings)
        }
    };
    let radius: Vec<f64> = theta
        .iter()
        .map(|&t| domain.rho(t).unwrap_or(1.0))
        .collect();
    let mut nodes = Vec::with_capacity(n_rings * n_theta);
    let mut boundary = Vec::with_capacity(n_rings * n_theta);
    for (j, &s) in ring_s.iter().enumerate() {
        let on_boundary = j == n_s || (annulus && j == 0);
        for (i, &t) in theta.iter().enumerate() {
            let (sn, cs) = t.sin_cos();
            let rr = s * radius[i];
            nodes.push([cx + rr * cs, cy + rr * sn]);
            boundary.push(on_boundary);
        }
    }
    let mut unknown_of = vec![None; nodes.len()];
    let mut unknown_nodes = Vec::new();
    for (n, &b) in boundary.iter().enumerate() {
        if !b {
            unknown_of[n] = Some(unknown_nodes.len());
            unknown_nodes.push(n);
        }
    }
    let mut grid = Grid {
        domain: domain.clone(),
        n_s,
        n_theta,
        n_rings,
        h_s,
        ring_s,
        theta,
        nodes,
        boundary,
        h_max: 0.0,
        unknown_of,
        unknown_nodes,
        stencils: Vec::new(),
    };
    grid.h_max = grid.max_spacing();
    grid.stencils = (0..grid.nodes.len()).map(|n| grid.jet_stencil(n)).collect();
    Ok(grid)
}

/// Three-point second-order stencils in the radial parameter.
fn ring_stencils(j: usize, last: usize, annulus: bool, h: f64) -> (Vec<(isize, f64)>, Vec<(isize, f64)>) {
    let j = j as isize;
    let h2 = h * h;
    if j as usize == last {
        (
            vec![(j, 1.5 / h), (j - 1, -2.0 / h), (j - 2, 0.5 / h)],
            vec![(j, 2.0 / h2), (j - 1, -5.0 / h2), (j - 2, 4.0 / h2), (j - 3, -1.0 / h2)],
        )
    } else if annulus && j == 0 {
        (
            vec![(0, -1.5 / h), (1, 2.0 / h), (2, -0.5 / h)],
            vec![(0, 2.0 / h2), (1, -5.0 / h2), (2, 4.0 / h2), (3, -1.0 / h2)],
        )
    } else {
        (
            vec![(j + 1, 0.5 / h), (j - 1, -0.5 / h)],
            vec![(j + 1, 1.0 / h2), (j, -2.0 / h2), (j - 1, 1.0 / h2)],
        )
    }
}

fn accumulate(list: &mut Vec<(usize, [f64; 5])>, node: usize, slot: usize, c: f64) {
    if let Some(e) = list.iter_mut().find(|e| e.0 == node) {
        e.1[slot] += c;
    } else {
        let mut v = [0.0; 5];
        v[slot] = c;
        list.push((node, v));
    }
}

impl Grid {
    pub fn node(&self, ring: usize, k: usize) -> usize {
        ring * self.n_theta + k % self.n_theta
    }

    pub fn ring_of(&self, node: usize) -> usize {
        node / self.n_theta
    }

    pub fn angle_index(&self, node: usize) -> usize {
        node % self.n_theta
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_unknowns(&self) -> usize {
        self.unknown_nodes.len()
    }

    pub fn unknown_of(&self, node: usize) -> Option<usize> {
        self.unknown_of[node]
    }

    pub fn unknown_nodes(&self) -> &[usize] {
        &self.unknown_nodes
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.unknown_nodes.iter().copied()
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&n| self.boundary[n])
    }

    pub fn stencil(&self, node: usize) -> &JetStencil {
        &self.stencils[node]
    }

    /// Ring index, resolving ring `-1` of interior kinds to the antipodal
    /// nodes of ring 0.
    fn node_at(&self, ring: isize, k: isize) -> usize {
        let n = self.n_theta as isize;
        if ring < 0 {
            debug_assert!(!self.domain.is_annulus() && ring == -1);
            self.node(0, (k + n / 2).rem_euclid(n) as usize)
        } else {
            self.node(ring as usize, k.rem_euclid(n) as usize)
        }
    }

    /// Grid neighbours in the `s` and `θ` directions, including diagonals.
    pub fn neighbours(&self, node: usize) -> Vec<usize> {
        let j = self.ring_of(node) as isize;
        let k = self.angle_index(node) as isize;
        let mut out = Vec::with_capacity(8);
        for dj in -1..=1 {
            for dk in -1..=1 {
                if dj == 0 && dk == 0 {
                    continue;
                }
                let r = j + dj;
                if r >= self.n_rings as isize || (r < 0 && self.domain.is_annulus()) {
                    continue;
                }
                out.push(self.node_at(r, k + dk));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    fn max_spacing(&self) -> f64 {
        let mut h: f64 = 0.0;
        let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
        for j in 0..self.n_rings {
            for k in 0..self.n_theta {
                let n = self.node(j, k);
                h = h.max(dist(self.nodes[n], self.nodes[self.node(j, k + 1)]));
                if j + 1 < self.n_rings {
                    h = h.max(dist(self.nodes[n], self.nodes[self.node(j + 1, k)]));
                }
            }
        }
        h
    }

    fn jet_stencil(&self, node: usize) -> JetStencil {
        let j = self.ring_of(node);
        let k = self.angle_index(node) as isize;
        let kk = TAU / self.n_theta as f64;
        let (s1, s2) = ring_stencils(j, self.n_rings - 1, self.domain.is_annulus(), self.h_s);
        let t1 = [(1isize, 0.5 / kk), (-1, -0.5 / kk)];
        let t2 = [(1isize, 1.0 / (kk * kk)), (0, -2.0 / (kk * kk)), (-1, 1.0 / (kk * kk))];
        let jr = j as isize;
        // Coefficients of (f_s, f_θ, f_ss, f_sθ, f_θθ).
        let mut d: Vec<(usize, [f64; 5])> = Vec::with_capacity(12);
        for &(r, c) in &s1 {
            accumulate(&mut d, self.node_at(r, k), 0, c);
        }
        for &(dk, c) in &t1 {
            accumulate(&mut d, self.node_at(jr, k + dk), 1, c);
        }
        for &(r, c) in &s2 {
            accumulate(&mut d, self.node_at(r, k), 2, c);
        }
        for &(r, c) in &s1 {
            for &(dk, c2) in &t1 {
                accumulate(&mut d, self.node_at(r, k + dk), 3, c * c2);
            }
        }
        for &(dk, c) in &t2 {
            accumulate(&mut d, self.node_at(jr, k + dk), 4, c);
        }
        let apply = |coord: usize| -> [f64; 5] {
            let mut out = [0.0; 5];
            for (n, c) in &d {
                for a in 0..5 {
                    out[a] += c[a] * self.nodes[*n][coord];
                }
            }
            out
        };
        let xd = apply(0);
        let yd = apply(1);
        // J = ∂(x, y)/∂(s, θ); p = J^{-T} (u_s, u_θ).
        let det = xd[0] * yd[1] - xd[1] * yd[0];
        let jinv = [[yd[1] / det, -xd[1] / det], [-yd[0] / det, xd[0] / det]];
        let x2 = Sym2::new(xd[2], xd[3], xd[4]);
        let y2 = Sym2::new(yd[2], yd[3], yd[4]);
        d.into_iter()
            .map(|(n, c)| {
                let p = [
                    jinv[0][0] * c[0] + jinv[1][0] * c[1],
                    jinv[0][1] * c[0] + jinv[1][1] * c[1],
                ];
                let u2 = [
                    [c[2] - p[0] * x2.m11 - p[1] * y2.m11, c[3] - p[0] * x2.m12 - p[1] * y2.m12],
                    [c[3] - p[0] * x2.m12 - p[1] * y2.m12, c[4] - p[0] * x2.m22 - p[1] * y2.m22],
                ];
                // M = J^{-T} U2 J^{-1}.
                let mut m = [[0.0; 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        let mut acc = 0.0;
                        for i in 0..2 {
                            for l in 0..2 {
                                acc += jinv[i][a] * u2[i][l] * jinv[l][b];
                            }
                        }
                        m[a][b] = acc;
                    }
                }
                (n, [p[0], p[1], m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]])
            })
            .collect()
    }

    /// Second-order jet of the nodal field `u` at `node`.
    pub fn discrete_jet(&self, u: &[f64], node: usize) -> GraphJet {
        let mut v = [0.0; 5];
        for (n, w) in &self.stencils[node] {
            for a in 0..5 {
                v[a] += w[a] * u[*n];
            }
        }
        GraphJet::from_array(v)
    }

    /// Samples `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&[x, y]| f(x, y)).collect()
    }

    /// Mean of `u` over each ring.
    pub fn ring_means(&self, u: &[f64]) -> Vec<f64> {
        (0..self.n_rings)
            .map(|j| (0..self.n_theta).map(|k| u[self.node(j, k)]).sum::<f64>() / self.n_theta as f64)
            .collect()
    }

    /// Radius of ring `j` measured from the centre (annuli and disks).
    pub fn ring_radius(&self, j: usize) -> f64 {
        let [cx, cy] = self.domain.center;
        let n = self.node(j, 0);
        (self.nodes[n][0] - cx).hypot(self.nodes[n][1] - cy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disk_counts() {
        let g = build_grid(&DomainSpec::disk(1.0).unwrap(), 8, 16).unwrap();
        assert_eq!(g.n_unknowns(), 128);
        assert_eq!(g.boundary_nodes().count(), 16);
        assert!((g.ring_s[0] - 0.5 / 8.5).abs() < 1e-15);
    }

    #[test]
    fn ellipse_curvature_range() {
        let e = DomainSpec::ellipse(2.0, 1.0).unwrap();
        assert_eq!(e.boundary_curvature, (0.25, 2.0));
        assert!((e.rho(0.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((e.rho(PI / 2.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn annulus_has_two_boundary_rings() {
        let g = build_grid(&DomainSpec::annulus(1.0, 4.0).unwrap(), 8, 16).unwrap();
        assert_eq!(g.boundary_nodes().count(), 32);
        assert!(g.boundary[0] && g.boundary[g.len() - 1]);
        assert_eq!(g.unknown_of(16), Some(0));
    }

    #[test]
    fn star_convex_checks() {
        let circle: Vec<f64> = vec![1.5; 32];
        let d = DomainSpec::star_convex(circle).unwrap();
        assert!((d.boundary_curvature.0 - 1.0 / 1.5).abs() < 1e-12);
        let dented: Vec<f64> = (0..32)
            .map(|i| 1.0 + 0.3 * (3.0 * TAU * i as f64 / 32.0).cos())
            .collect();
        assert!(matches!(DomainSpec::star_convex(dented), Err(GeometryError::NotConvex { .. })));
    }

    #[test]
    fn rejects_bad_resolution() {
        let d = DomainSpec::disk(1.0).unwrap();
        assert!(build_grid(&d, 4, 16).is_err());
        assert!(build_grid(&d, 8, 17).is_err());
    }

    #[test]
    fn linear_data_is_exact() {
        for d in [DomainSpec::disk(1.0).unwrap(), DomainSpec::ellipse(2.0, 1.0).unwrap(), DomainSpec::annulus(1.0, 3.0).unwrap()] {
            let g = build_grid(&d, 8, 16).unwrap();
            let u = g.sample(|x, y| 0.3 * x - 0.7 * y + 2.0);
            for n in 0..g.len() {
                let jet = g.discrete_jet(&u, n);
                assert!((jet.p[0] - 0.3).abs() < 1e-10 && (jet.p[1] + 0.7).abs() < 1e-10);
                assert!(jet.m.norm() < 1e-10, "node {n}: {:?}", jet.m);
            }
        }
    }

    #[test]
    fn saddle_hessian_is_second_order() {
        let d = DomainSpec::disk(1.0).unwrap();
        let err = |n_s: usize| {
            let g = build_grid(&d, n_s, 2 * n_s).unwrap();
            let u = g.sample(|x, y| x * x - y * y + x * y * y);
            // Mixed-derivative truncation scales like h²/s near the centre.
            g.interior_nodes()
                .filter(|&n| g.ring_s[g.ring_of(n)] >= 0.3)
                .map(|n| {
                    let [x, y] = g.nodes[n];
                    let jet = g.discrete_jet(&u, n);
                    let exact = Sym2::new(2.0 + 0.0, 2.0 * y, -2.0 + 2.0 * x);
                    let e = Sym2::new(jet.m.m11 - exact.m11, jet.m.m12 - exact.m12, jet.m.m22 - exact.m22).norm();
                    e
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e1 < 0.2 && e2 < e1 / 3.5, "{e1} {e2}");
    }
}
