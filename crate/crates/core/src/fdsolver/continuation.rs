//! Adaptive step control for the continuation parameter `t ∈ [0, 1]`.

use serde::Serialize;

/// Consecutive halvings of the step allowed at one `t` before stalling.
pub const MAX_BISECTIONS: usize = 8;

/// Accepted stages with at most this many Newton updates count as easy.
const EASY_ITERATIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StallError {
    /// Last accepted value of `t`.
    pub t: f64,
    pub bisections: usize,
}

/// Halves the increment on a failed stage, doubles it after two consecutive
/// easy stages.
#[derive(Debug, Clone)]
pub struct ContinuationSchedule {
    t: f64,
    dt: f64,
    bisections: usize,
    easy_run: usize,
    accepted: Vec<f64>,
}

impl ContinuationSchedule {
    pub fn new(t_steps: usize) -> Self {
        Self { t: 0.0, dt: 1.0 / t_steps.max(1) as f64, bisections: 0, easy_run: 0, accepted: vec![0.0] }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Accepted values of `t` so far, starting at 0.
    pub fn accepted(&self) -> &[f64] {
        &self.accepted
    }

    /// Next target, or `None` once `t = 1` has been accepted.
    pub fn next_t(&self) -> Option<f64> {
        (self.t < 1.0).then(|| (self.t + self.dt).min(1.0))
    }

    pub fn accept(&mut self, iterations: usize) {
        self.t = (self.t + self.dt).min(1.0);
        self.accepted.push(self.t);
        self.bisections = 0;
        if iterations <= EASY_ITERATIONS {
            self.easy_run += 1;
            if self.easy_run >= 2 {
                self.dt *= 2.0;
                self.easy_run = 0;
            }
        } else {
            self.easy_run = 0;
        }
    }

    pub fn reject(&mut self) -> Result<(), StallError> {
        self.easy_run = 0;
        if self.bisections >= MAX_BISECTIONS {
            return Err(StallError { t: self.t, bisections: self.bisections });
        }
        self.bisections += 1;
        self.dt *= 0.5;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn easy_steps_collapse_the_schedule() {
        let mut s = ContinuationSchedule::new(8);
        while s.next_t().is_some() {
            s.accept(1);
        }
        assert_eq!(s.accepted(), &[0.0, 0.125, 0.25, 0.5, 0.75, 1.0]);
        let mut s = ContinuationSchedule::new(1);
        s.accept(0);
        assert_eq!(s.accepted(), &[0.0, 1.0]);
    }

    #[test]
    fn failure_bisects() {
        let mut s = ContinuationSchedule::new(4);
        s.accept(5);
        assert_eq!(s.next_t(), Some(0.5));
        s.reject().unwrap();
        assert_eq!(s.next_t(), Some(0.375));
    }

    #[test]
    fn stalls_after_eight_bisections() {
        let mut s = ContinuationSchedule::new(4);
        for _ in 0..MAX_BISECTIONS {
            s.reject().unwrap();
        }
        let e = s.reject().unwrap_err();
        assert_eq!(e, StallError { t: 0.0, bisections: 8 });
    }
}
