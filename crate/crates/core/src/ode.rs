//! Dormand-Prince 5(4) with error control, landing exactly on requested
//! output abscissae.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError<E> {
    #[error("right-hand side failed: {0}")]
    Rhs(E),
    #[error("step size underflow at t={t} (h={h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t={t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct StepperOptions<const N: usize> {
    pub rtol: f64,
    pub atol: [f64; N],
    pub h_init: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = rhs(t, y)` from `t0` through every abscissa in `stops`
/// (strictly increasing, all `> t0`), returning the state at each stop.
/// `on_step` sees every accepted step, including the stops.
pub fn integrate<const N: usize, E2, F, G>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    stops: &[f64],
    opts: &StepperOptions<N>,
    mut on_step: G,
) -> Result<Vec<[f64; N]>, IntegrateError<E2>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], E2>,
    G: FnMut(f64, &[f64; N]),
{
    let mut out = Vec::with_capacity(stops.len());
    let mut t = t0;
    let mut y = y0;
    let mut k = [[0.0; N]; 7];
    k[0] = rhs(t, &y).map_err(IntegrateError::Rhs)?;
    let mut h = opts.h_init;
    let mut steps = 0usize;
    for &stop in stops {
        while t < stop {
            if steps >= opts.max_steps {
                return Err(IntegrateError::StepUnderflow { t, h });
            }
            let remaining = stop - t;
            let lands = h >= remaining * (1.0 - 1e-12);
            let h_step = if lands { remaining } else { h };
            if h_step < opts.h_min && !lands {
                return Err(IntegrateError::StepUnderflow { t, h: h_step });
            }
            for s in 1..7 {
                let mut ys = y;
                for j in 0..s {
                    let a = A[s][j];
                    if a != 0.0 {
                        for i in 0..N {
                            ys[i] += h_step * a * k[j][i];
                        }
                    }
                }
                k[s] = rhs(t + C[s] * h_step, &ys).map_err(IntegrateError::Rhs)?;
            }
            let mut y_new = y;
            for j in 0..6 {
                let b = A[6][j];
                for i in 0..N {
                    y_new[i] += h_step * b * k[j][i];
                }
            }
            // k[6] was evaluated at y_new (FSAL).
            let mut err = 0.0;
            for i in 0..N {
                let mut e = 0.0;
                for j in 0..7 {
                    e += E[j] * k[j][i];
                }
                let scale = opts.atol[i] + opts.rtol * y[i].abs().max(y_new[i].abs());
                let r = h_step * e / scale;
                err += r * r;
            }
            let err = (err / N as f64).sqrt();
            steps += 1;
            if !err.is_finite() {
                h = 0.2 * h_step;
                if h < opts.h_min {
                    return Err(IntegrateError::NonFinite { t });
                }
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if lands { stop } else { t + h_step };
                y = y_new;
                k[0] = k[6];
                on_step(t, &y);
                // Keep the proposal from a full step when clamped to a stop.
                h = if lands { h.max(h_step * factor).min(h * 5.0) } else { h_step * factor };
            } else {
                h = h_step * factor.min(1.0);
                if h < opts.h_min {
                    return Err(IntegrateError::StepUnderflow { t, h });
                }
            }
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_accurate() {
        let opts = StepperOptions { rtol: 1e-10, atol: [1e-14], h_init: 0.01, h_min: 1e-12, max_steps: 100_000 };
        let stops: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let ys = integrate(|_, y: &[f64; 1]| Ok::<_, ()>([-y[0]]), 0.0, [1.0], &stops, &opts, |_, _| {}).unwrap();
        for (t, y) in stops.iter().zip(&ys) {
            assert!(((y[0] - (-t).exp()) / (-t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn harmonic_oscillator_lands_on_stops() {
        let opts = StepperOptions { rtol: 1e-11, atol: [1e-12; 2], h_init: 0.1, h_min: 1e-12, max_steps: 100_000 };
        let mut seen = Vec::new();
        let ys = integrate(
            |_, y: &[f64; 2]| Ok::<_, ()>([y[1], -y[0]]),
            0.0,
            [0.0, 1.0],
            &[0.5, 3.0],
            &opts,
            |t, _| seen.push(t),
        )
        .unwrap();
        assert!(seen.contains(&0.5) && seen.contains(&3.0));
        assert!((ys[1][0] - 3f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn rhs_errors_propagate() {
        let opts = StepperOptions { rtol: 1e-6, atol: [1e-6], h_init: 0.1, h_min: 1e-12, max_steps: 10 };
        let r = integrate(|t, _y: &[f64; 1]| if t > 0.3 { Err("boom") } else { Ok([1.0]) }, 0.0, [0.0], &[1.0], &opts, |_, _| {});
        assert_eq!(r, Err(IntegrateError::Rhs("boom")));
    }
}
