//! Curvatures of a graph from its 2-jet `(Du, D²u)` and the fully nonlinear
//! operator `F(p, M) = κ₂ - f(κ₁)` with its first derivatives.
//!
//! The square root `√(H² - K)` is not differentiable on the umbilic set. It is
//! replaced by `√(H² - K + ε²) - ε`, which is smooth for `ε > 0`, vanishes on
//! umbilic jets (so planes stay exact solutions for every relation) and
//! reduces to the true operator at `ε = 0`.

use serde::Serialize;

use crate::relation::{RelationError, RelationSpec};

/// Rounding slack below zero tolerated in `H² - K` before it is clamped.
pub const DISC_CLAMP: f64 = 1e-14;

/// Default umbilic regularization, in curvature units.
pub const DEFAULT_EPS: f64 = 1e-8;

/// Relative disagreement between analytic and finite-difference derivatives
/// above which the finite-difference value is used.
pub const DERIV_FALLBACK_TOL: f64 = 1e-4;

/// Symmetric 2×2 matrix with the off-diagonal entry stored once.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Sym2 {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { m11: 0.0, m12: 0.0, m22: 0.0 };
    pub const IDENTITY: Sym2 = Sym2 { m11: 1.0, m12: 0.0, m22: 1.0 };

    pub fn new(m11: f64, m12: f64, m22: f64) -> Self {
        Self { m11, m12, m22 }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, b)
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.m11 + self.m22);
        let half_gap = (0.5 * (self.m11 - self.m22)).hypot(self.m12);
        (mean + half_gap, mean - half_gap)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        (self.m11 * self.m11 + 2.0 * self.m12 * self.m12 + self.m22 * self.m22).sqrt()
    }

    /// `Q A Qᵀ` for the rotation `Q` by `angle`.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let q = [[c, -s], [s, c]];
        let a = [[self.m11, self.m12], [self.m12, self.m22]];
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out[i][j] += q[i][k] * a[k][l] * q[j][l];
                    }
                }
            }
        }
        Self::new(out[0][0], 0.5 * (out[0][1] + out[1][0]), out[1][1])
    }
}

/// Gradient and Hessian of a graph at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct GraphJet {
    pub p: [f64; 2],
    pub m: Sym2,
}

impl GraphJet {
    pub fn new(p: [f64; 2], m: Sym2) -> Self {
        Self { p, m }
    }

    /// `(Qp, QMQᵀ)`.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let p = [c * self.p[0] - s * self.p[1], s * self.p[0] + c * self.p[1]];
        Self::new(p, self.m.rotated(angle))
    }

    /// `|p| + |M|`, the size used for jet bounds.
    pub fn size(&self) -> f64 {
        self.p[0].hypot(self.p[1]) + self.m.norm()
    }

    /// Jet coordinates in the order `(p1, p2, M11, M12, M22)`.
    pub fn to_array(&self) -> [f64; 5] {
        [self.p[0], self.p[1], self.m.m11, self.m.m12, self.m.m22]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self::new([v[0], v[1]], Sym2::new(v[2], v[3], v[4]))
    }

    /// Jet of the graph whose principal curvatures are `k1 ≥ k2`, with the
    /// `k1` principal direction at `angle` in the intrinsic frame.
    pub fn with_curvatures(p: [f64; 2], k1: f64, k2: f64, angle: f64) -> Self {
        let w = 1.0 + p[0] * p[0] + p[1] * p[1];
        let sw = w.sqrt();
        // S = √w Q diag(k1, k2) Qᵀ, M = g^{1/2} S g^{1/2}, g = I + p pᵀ.
        let s = Sym2::diag(sw * k1, sw * k2).rotated(angle);
        let beta = 1.0 / (1.0 + sw);
        let half = [
            [1.0 + beta * p[0] * p[0], beta * p[0] * p[1]],
            [beta * p[0] * p[1], 1.0 + beta * p[1] * p[1]],
        ];
        let m = sandwich(&half, &s);
        Self::new(p, m)
    }
}

/// `P S P` for symmetric `P`.
fn sandwich(p: &[[f64; 2]; 2], s: &Sym2) -> Sym2 {
    let a = [[s.m11, s.m12], [s.m12, s.m22]];
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[i][j] += p[i][k] * a[k][l] * p[l][j];
                }
            }
        }
    }
    Sym2::new(out[0][0], 0.5 * (out[0][1] + out[1][0]), out[1][1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureData {
    pub h: f64,
    pub k_gauss: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub sigma_norm: f64,
    pub disc: f64,
}

/// Principal curvatures of the upward-oriented graph with 2-jet `jet`.
///
/// Computed from `S = g^{-1/2} M g^{-1/2}` with `g = I + p pᵀ`, whose
/// eigenvalues are `√(1+|p|²) κᵢ`; the discriminant is then a sum of squares.
pub fn curvatures(jet: &GraphJet) -> CurvatureData {
    let [p1, p2] = jet.p;
    let w = 1.0 + p1 * p1 + p2 * p2;
    let sw = w.sqrt();
    let beta = -1.0 / (sw * (1.0 + sw));
    let inv_half = [
        [1.0 + beta * p1 * p1, beta * p1 * p2],
        [beta * p1 * p2, 1.0 + beta * p2 * p2],
    ];
    let s = sandwich(&inv_half, &jet.m);
    let h = 0.5 * s.trace() / sw;
    let half_gap = (0.5 * (s.m11 - s.m22)).hypot(s.m12) / sw;
    let disc = half_gap * half_gap;
    let kappa1 = h + half_gap;
    let kappa2 = h - half_gap;
    CurvatureData {
        h,
        k_gauss: jet.m.det() / (w * w),
        kappa1,
        kappa2,
        sigma_norm: kappa1.hypot(kappa2),
        disc,
    }
}

/// `G(p, M) = 4 (1+|p|²)³ (H² - K)`, evaluated as the expanded polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscriminantPoly {
    pub value: f64,
}

pub fn discriminant_poly(jet: &GraphJet) -> DiscriminantPoly {
    let [p1, p2] = jet.p;
    let Sym2 { m11, m12, m22 } = jet.m;
    let n = (1.0 + p2 * p2) * m11 - 2.0 * p1 * p2 * m12 + (1.0 + p1 * p1) * m22;
    let value = n * n - 4.0 * (1.0 + p1 * p1 + p2 * p2) * (m22 * m11 - m12 * m12);
    DiscriminantPoly { value }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorEval {
    pub value: f64,
    /// `∂F/∂Mᵢⱼ` as a symmetric matrix: the off-diagonal entry is half the
    /// derivative with respect to the single stored `M12`, so that the
    /// linearization reads `aⁱʲ uᵢⱼ`.
    pub df_dm: Sym2,
    pub df_dp: [f64; 2],
    /// `H² - K < ε²` at this jet.
    pub regularized: bool,
}

impl OperatorEval {
    /// Derivatives in jet-coordinate order `(p1, p2, M11, M12, M22)`, with the
    /// `M12` entry taken with respect to the single stored off-diagonal.
    pub fn gradient(&self) -> [f64; 5] {
        [
            self.df_dp[0],
            self.df_dp[1],
            self.df_dm.m11,
            2.0 * self.df_dm.m12,
            self.df_dm.m22,
        ]
    }

    fn from_gradient(value: f64, g: [f64; 5], regularized: bool) -> Self {
        Self {
            value,
            df_dm: Sym2::new(g[2], 0.5 * g[3], g[4]),
            df_dp: [g[0], g[1]],
            regularized,
        }
    }
}

/// Regularized `√(disc + ε²) - ε`, cancellation-free.
fn reg_sqrt(disc: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        disc.sqrt()
    } else {
        disc / ((disc + eps * eps).sqrt() + eps)
    }
}

/// `F(p, M) = H - r - f(H + r)`, `r = √(H² - K + ε²) - ε`.
pub fn operator_value(spec: &RelationSpec, jet: &GraphJet, eps: f64) -> Result<f64, RelationError> {
    let cd = curvatures(jet);
    let r = reg_sqrt(cd.disc, eps);
    Ok(cd.h - r - spec.eval_f(cd.h + r)?)
}

/// Value and analytic first derivatives of the regularized operator.
pub fn operator_derivs(
    spec: &RelationSpec,
    jet: &GraphJet,
    eps: f64,
) -> Result<OperatorEval, RelationError> {
    let [p1, p2] = jet.p;
    let Sym2 { m11, m12, m22 } = jet.m;
    let cd = curvatures(jet);
    let r = reg_sqrt(cd.disc, eps);
    let kappa1 = cd.h + r;
    let fval = spec.eval_f(kappa1)?;
    let fp = spec.eval_fprime(kappa1)?;
    let value = cd.h - r - fval;

    let w = 1.0 + p1 * p1 + p2 * p2;
    let w32 = w * w.sqrt();
    let w52 = w32 * w;
    let n = (1.0 + p2 * p2) * m11 - 2.0 * p1 * p2 * m12 + (1.0 + p1 * p1) * m22;
    let d = m11 * m22 - m12 * m12;
    let w2 = w * w;
    let w3 = w2 * w;
    // ∂H and ∂K in jet order (p1, p2, M11, M12, M22).
    let dh = [
        (p1 * m22 - p2 * m12) / w32 - 1.5 * p1 * n / w52,
        (p2 * m11 - p1 * m12) / w32 - 1.5 * p2 * n / w52,
        0.5 * (1.0 + p2 * p2) / w32,
        -p1 * p2 / w32,
        0.5 * (1.0 + p1 * p1) / w32,
    ];
    let dk = [
        -4.0 * p1 * d / w3,
        -4.0 * p2 * d / w3,
        m22 / w2,
        -2.0 * m12 / w2,
        m11 / w2,
    ];
    let root = (cd.disc + eps * eps).sqrt();
    let mut g = [0.0; 5];
    for i in 0..5 {
        let ddisc = 2.0 * cd.h * dh[i] - dk[i];
        let dr = if root > 0.0 { 0.5 * ddisc / root } else { 0.0 };
        g[i] = (1.0 - fp) * dh[i] - (1.0 + fp) * dr;
    }
    Ok(OperatorEval::from_gradient(value, g, cd.disc < eps * eps))
}

/// Central-difference derivatives of [`operator_value`].
pub fn operator_derivs_fd(
    spec: &RelationSpec,
    jet: &GraphJet,
    eps: f64,
    step: f64,
) -> Result<OperatorEval, RelationError> {
    let base = jet.to_array();
    let value = operator_value(spec, jet, eps)?;
    let mut g = [0.0; 5];
    for i in 0..5 {
        let h = step * (1.0 + base[i].abs());
        let mut plus = base;
        let mut minus = base;
        plus[i] += h;
        minus[i] -= h;
        let fp = operator_value(spec, &GraphJet::from_array(plus), eps)?;
        let fm = operator_value(spec, &GraphJet::from_array(minus), eps)?;
        g[i] = (fp - fm) / (2.0 * h);
    }
    let disc = curvatures(jet).disc;
    Ok(OperatorEval::from_gradient(value, g, disc < eps * eps))
}

/// Analytic derivatives, replaced by finite differences when the two
/// disagree by more than [`DERIV_FALLBACK_TOL`] (near-umbilic jets of
/// relations with `f'(0) ≠ -1`, where `F` is only Lipschitz).
pub fn operator_derivs_guarded(
    spec: &RelationSpec,
    jet: &GraphJet,
    eps: f64,
) -> Result<OperatorEval, RelationError> {
    let analytic = operator_derivs(spec, jet, eps)?;
    let fd = operator_derivs_fd(spec, jet, eps, 1e-6)?;
    let (a, b) = (analytic.gradient(), fd.gradient());
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-12);
    let gap = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if gap > DERIV_FALLBACK_TOL * scale {
        log::debug!(
            "derivative fallback at jet {:?}: analytic/fd gap {gap:e} (scale {scale:e})",
            jet
        );
        Ok(fd)
    } else {
        Ok(analytic)
    }
}

/// Smallest and largest eigenvalue of `F_M` over the sampled jets.
pub fn ellipticity_bounds(
    spec: &RelationSpec,
    jet_samples: &[GraphJet],
    eps: f64,
) -> Result<(f64, f64), RelationError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for jet in jet_samples {
        let ev = operator_derivs(spec, jet, eps)?;
        let (l1, l2) = ev.df_dm.eigenvalues();
        hi = hi.max(l1);
        lo = lo.min(l2);
    }
    Ok((lo, hi))
}
