//! Fixed rules on `[0, 1]`.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `Pₙ`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// 16-point Gauss-Legendre rule mapped to `[0, 1]`.
pub fn gl16_unit() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = gauss_legendre(16);
        x.iter().zip(&w).map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
    })
}

/// Composite midpoint rule with `panels` panels on `[0, 1]`.
pub fn midpoint_unit(panels: usize) -> Vec<(f64, f64)> {
    let h = 1.0 / panels as f64;
    (0..panels).map(|i| ((i as f64 + 0.5) * h, h)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl16_integrates_degree_31_exactly() {
        let rule = gl16_unit();
        assert_eq!(rule.len(), 16);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let int31: f64 = rule.iter().map(|(x, w)| w * x.powi(31)).sum();
        assert!((int31 - 1.0 / 32.0).abs() < 1e-14);
        let cos: f64 = rule.iter().map(|(x, w)| w * (3.0 * x).cos()).sum();
        assert!((cos - 3f64.sin() / 3.0).abs() < 1e-14);
    }

    #[test]
    fn midpoint_is_exact_on_linears() {
        let s: f64 = midpoint_unit(64).iter().map(|(x, w)| w * (2.0 * x + 1.0)).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }
}
